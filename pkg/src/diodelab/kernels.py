"""Log-derivative sweep through piecewise-constant two-channel sectors.

The equation solved is psi'' = (W(x) - k^2) psi with W = (2m/hbar^2) M(x).
Within each sector W is frozen at the sector midpoint and diagonalised, so
the sector propagator is exact (trigonometric for open, hyperbolic for
closed eigenchannels).  The complex log-derivative matrix Y = psi' psi^-1 is
swept from the right edge, where it starts as the outgoing-wave value
``i k``, to the left edge.  Because the swept solutions carry non-zero flux,
Y never has poles, and evanescent sectors only ever shrink the accumulated
propagator, so nothing can overflow under a tall barrier.

Two interchangeable implementations are provided: a fused numba kernel and
a numpy path (vectorised sector coefficients + a scalar Python recursion).
Set ``DIODELAB_DISABLE_NUMBA=1`` to force the numpy path.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("DIODELAB_DISABLE_NUMBA", "").strip() not in ("1", "true", "yes")

# |w h^2| below this uses the Taylor form of the sector coefficients
_SERIES_LIMIT = 1e-6


def _channel_coefficients(w, h):
    """Diagonal sector coefficients (y1, y2) for one eigenchannel."""
    x = w * h * h
    if abs(x) < _SERIES_LIMIT:
        inv = 1.0 / h
        return inv + w * h / 3.0 - w * w * h * h * h / 45.0, inv - w * h / 6.0 + 7.0 * w * w * h * h * h / 360.0
    if w < 0.0:
        q = math.sqrt(-w)
        z = q * h
        return q / math.tan(z), q / math.sin(z)
    q = math.sqrt(w)
    z = q * h
    e = math.exp(-z)
    den = -math.expm1(-2.0 * z)
    return q * (1.0 + e * e) / den, 2.0 * q * e / den


def _eigen(a, b, c):
    """Eigen-decomposition of [[a, b], [b, c]]: (cos t, sin t, e_hi, e_lo).

    Columns of the rotation [[cos, -sin], [sin, cos]] are the eigenvectors
    for (e_hi, e_lo).
    """
    mean = 0.5 * (a + c)
    half = 0.5 * (a - c)
    r = math.hypot(half, b)
    if r == 0.0:
        return 1.0, 0.0, mean, mean
    c2 = half / r
    s2 = b / r
    if c2 >= 0.0:
        ct = math.sqrt(0.5 * (1.0 + c2))
        st = s2 / (2.0 * ct)
    else:
        st = math.sqrt(0.5 * (1.0 - c2))
        if s2 < 0.0:
            st = -st
        ct = s2 / (2.0 * st)
    return ct, st, mean + r, mean - r


def _step(ct, st, a1, a2, b1, b2, y11, y12, y22):
    """One sector of the right-to-left sweep.

    Returns the new log-derivative (lab frame) and the sector propagator P
    mapping psi(left edge) to psi(right edge).
    """
    cc = ct * ct
    ss = st * st
    cs = ct * st
    # rotate Y into the sector eigenbasis
    t11 = cc * y11 + 2.0 * cs * y12 + ss * y22
    t22 = ss * y11 - 2.0 * cs * y12 + cc * y22
    t12 = -cs * y11 + (cc - ss) * y12 + cs * y22
    d11 = a1 - t11
    d22 = b1 - t22
    det = d11 * d22 - t12 * t12
    i11 = d22 / det
    i22 = d11 / det
    i12 = t12 / det
    u11 = a2 * i11 * a2 - a1
    u22 = b2 * i22 * b2 - b1
    u12 = a2 * i12 * b2
    p11 = i11 * a2
    p12 = i12 * b2
    p21 = i12 * a2
    p22 = i22 * b2
    # back to the lab frame
    n11 = cc * u11 - 2.0 * cs * u12 + ss * u22
    n22 = ss * u11 + 2.0 * cs * u12 + cc * u22
    n12 = cs * u11 + (cc - ss) * u12 - cs * u22
    q11 = ct * p11 - st * p21
    q12 = ct * p12 - st * p22
    q21 = st * p11 + ct * p21
    q22 = st * p12 + ct * p22
    P11 = q11 * ct - q12 * st
    P12 = q11 * st + q12 * ct
    P21 = q21 * ct - q22 * st
    P22 = q21 * st + q22 * ct
    return n11, n12, n22, P11, P12, P21, P22


def _forward_fill(props, psi0):
    n = props.shape[0]
    psi = np.empty((n + 1, 2), dtype=np.complex128)
    psi[0, 0] = psi0[0]
    psi[0, 1] = psi0[1]
    for i in range(n):
        a = psi[i, 0]
        b = psi[i, 1]
        psi[i + 1, 0] = props[i, 0, 0] * a + props[i, 0, 1] * b
        psi[i + 1, 1] = props[i, 1, 0] * a + props[i, 1, 1] * b
    return psi


if HAVE_NUMBA:
    _channel_coefficients_nb = numba.njit(cache=True)(_channel_coefficients)
    _eigen_nb = numba.njit(cache=True)(_eigen)
    _step_nb = numba.njit(cache=True)(_step)

    @numba.njit(cache=True)
    def _sweep_fused_nb(w11, w12, w22, h, k, store):
        n = w11.shape[0]
        k2 = k * k
        y11 = 1j * k
        y12 = 0j
        y22 = 1j * k
        k11 = 1.0 + 0j
        k12 = 0j
        k21 = 0j
        k22 = 1.0 + 0j
        props = np.zeros((n if store else 0, 2, 2), dtype=np.complex128)
        for i in range(n - 1, -1, -1):
            ct, st, e1, e2 = _eigen_nb(w11[i], w12[i], w22[i])
            a1, a2 = _channel_coefficients_nb(e1 - k2, h)
            b1, b2 = _channel_coefficients_nb(e2 - k2, h)
            y11, y12, y22, P11, P12, P21, P22 = _step_nb(ct, st, a1, a2, b1, b2, y11, y12, y22)
            m11 = k11 * P11 + k12 * P21
            m12 = k11 * P12 + k12 * P22
            m21 = k21 * P11 + k22 * P21
            m22 = k21 * P12 + k22 * P22
            k11, k12, k21, k22 = m11, m12, m21, m22
            if store:
                props[i, 0, 0] = P11
                props[i, 0, 1] = P12
                props[i, 1, 0] = P21
                props[i, 1, 1] = P22
        y = np.empty(3, dtype=np.complex128)
        y[0] = y11
        y[1] = y12
        y[2] = y22
        kk = np.empty((2, 2), dtype=np.complex128)
        kk[0, 0] = k11
        kk[0, 1] = k12
        kk[1, 0] = k21
        kk[1, 1] = k22
        return y, kk, props

    _forward_fill_nb = numba.njit(cache=True)(_forward_fill)


def sector_coefficients(w11, w12, w22, h, k):
    """Vectorised sector data: (cos t, sin t, a1, a2, b1, b2) arrays.

    ``(a1, a2)`` belong to the upper eigenchannel, ``(b1, b2)`` to the lower.
    """
    w11 = np.asarray(w11, dtype=float)
    w12 = np.asarray(w12, dtype=float)
    w22 = np.asarray(w22, dtype=float)
    mean = 0.5 * (w11 + w22)
    half = 0.5 * (w11 - w22)
    r = np.hypot(half, w12)
    safe = np.where(r == 0.0, 1.0, r)
    c2 = np.where(r == 0.0, 1.0, half / safe)
    s2 = np.where(r == 0.0, 0.0, w12 / safe)
    pos = c2 >= 0.0
    ct_pos = np.sqrt(0.5 * (1.0 + c2))
    st_neg = np.sqrt(0.5 * (1.0 - c2)) * np.where(s2 < 0.0, -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ct = np.where(pos, ct_pos, s2 / (2.0 * st_neg))
        st = np.where(pos, s2 / (2.0 * ct_pos), st_neg)
    a1, a2 = _channel_coefficients_vec(mean + r - k * k, h)
    b1, b2 = _channel_coefficients_vec(mean - r - k * k, h)
    return ct, st, a1, a2, b1, b2


def _channel_coefficients_vec(w, h):
    w = np.asarray(w, dtype=float)
    series = np.abs(w * h * h) < _SERIES_LIMIT
    openc = (w < 0.0) & ~series
    closed = (w >= 0.0) & ~series
    y1 = np.empty_like(w)
    y2 = np.empty_like(w)
    ws = w[series]
    y1[series] = 1.0 / h + ws * h / 3.0 - ws * ws * h**3 / 45.0
    y2[series] = 1.0 / h - ws * h / 6.0 + 7.0 * ws * ws * h**3 / 360.0
    q = np.sqrt(-w[openc])
    z = q * h
    y1[openc] = q / np.tan(z)
    y2[openc] = q / np.sin(z)
    q = np.sqrt(w[closed])
    z = q * h
    e = np.exp(-z)
    den = -np.expm1(-2.0 * z)
    y1[closed] = q * (1.0 + e * e) / den
    y2[closed] = 2.0 * q * e / den
    return y1, y2


def _sweep_numpy(w11, w12, w22, h, k, store):
    ct, st, a1, a2, b1, b2 = sector_coefficients(w11, w12, w22, h, k)
    n = ct.shape[0]
    cols = [arr.tolist() for arr in (ct, st, a1, a2, b1, b2)]
    y11 = 1j * k
    y12 = 0j
    y22 = 1j * k
    k11, k12, k21, k22 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
    props = np.zeros((n if store else 0, 2, 2), dtype=np.complex128)
    plist = [None] * n if store else None
    for i in range(n - 1, -1, -1):
        y11, y12, y22, P11, P12, P21, P22 = _step(
            cols[0][i], cols[1][i], cols[2][i], cols[3][i], cols[4][i], cols[5][i], y11, y12, y22
        )
        k11, k12, k21, k22 = (
            k11 * P11 + k12 * P21,
            k11 * P12 + k12 * P22,
            k21 * P11 + k22 * P21,
            k21 * P12 + k22 * P22,
        )
        if store:
            plist[i] = (P11, P12, P21, P22)
    if store:
        props[:] = np.asarray(plist, dtype=np.complex128).reshape(n, 2, 2)
    return np.array([y11, y12, y22]), np.array([[k11, k12], [k21, k22]]), props


def _forward_fill_numpy(props, psi0):
    n = props.shape[0]
    flat = props.reshape(n, 4).tolist()
    a, b = complex(psi0[0]), complex(psi0[1])
    out = [(a, b)]
    for p11, p12, p21, p22 in flat:
        a, b = p11 * a + p12 * b, p21 * a + p22 * b
        out.append((a, b))
    return np.asarray(out, dtype=np.complex128)


def sweep(w11, w12, w22, h, k, store=False, use_numba=None):
    """Sweep the log-derivative from the right edge to the left edge.

    Parameters
    ----------
    w11, w12, w22 : ndarray
        Entries of (2m/hbar^2) M at the sector midpoints, ordered left to right (m^-2).
    h : float
        Uniform sector width (m).
    k : float
        Asymptotic wavenumber (m^-1).
    store : bool
        Keep every sector propagator (needed to rebuild the wavefunction).

    Returns
    -------
    y : ndarray (3,)
        (Y11, Y12, Y22) at the left edge.
    kmat : ndarray (2, 2)
        Maps psi(left edge) to psi(right edge) for the swept solutions.
    props : ndarray (n, 2, 2) or (0, 2, 2)
        Sector propagators psi(x_i) -> psi(x_{i+1}) when ``store``.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    w11 = np.ascontiguousarray(w11, dtype=np.float64)
    w12 = np.ascontiguousarray(w12, dtype=np.float64)
    w22 = np.ascontiguousarray(w22, dtype=np.float64)
    if use_numba:
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not available")
        return _sweep_fused_nb(w11, w12, w22, float(h), float(k), bool(store))
    return _sweep_numpy(w11, w12, w22, float(h), float(k), bool(store))


def forward_fill(props, psi0, use_numba=None):
    """psi at every node from psi at the left edge and the sector propagators."""
    if use_numba is None:
        use_numba = USE_NUMBA
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if use_numba:
        return _forward_fill_nb(np.ascontiguousarray(props), psi0)
    return _forward_fill_numpy(props, psi0)
