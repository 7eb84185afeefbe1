"""Adiabatic (dressed-state) frame of the potential matrix.

The rows of ``U(x)`` are the eigenvectors of M(x),

    U = [[-cos phi, sin phi], [sin phi, cos phi]],   tan(2 phi) = 2 Omega / (W2 - W1),

so that ``U M U^T = diag(lambda_-, lambda_+)``.  Because M is a sum of
Gaussians, the mixing angle and all its derivatives are ratios of
homogeneous expressions in (W1, W2, Omega); they are evaluated after
dividing out the largest Gaussian in log space, which keeps the angle
well defined deep in the tails where every profile underflows.

The kinetic operator transformed to this frame produces the coupling

    Q = [[mB^2/2, A - iBp], [-(A - iBp), mB^2/2]]

with ``A = -(hbar^2/2m) phi''`` and ``B = (hbar/m) phi'``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .physics import CaseLabel, DiodeConfig, kinematics, laser_profiles, simulation_domain
from .solver import ConvergenceError, Side

_SQRT_HALF = 1.0 / np.sqrt(2.0)
_MIXED = np.array([[-_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, _SQRT_HALF]])
_GROUND_LOW = np.array([[-1.0, 0.0], [0.0, 1.0]])
_EXCITED_LOW = np.array([[0.0, 1.0], [1.0, 0.0]])


def _lasers(cfg: DiodeConfig):
    """(amplitude, centre) for Omega, W1, W2."""
    return (
        (cfg.omega_hat, cfg.delta),
        (cfg.w1_hat, cfg.d),
        (cfg.w2_hat, -cfg.d),
    )


def _scaled_profiles(x, cfg: DiodeConfig):
    """Profiles and two derivatives, all divided by the largest Gaussian.

    Returns (omega, w1, w2) triples of (value, first, second) derivatives,
    each sharing one positive x-dependent scale factor.
    """
    x = np.asarray(x, dtype=float)
    dx2 = cfg.delta_x ** 2
    logs = []
    for amp, centre in _lasers(cfg):
        with np.errstate(divide="ignore"):
            logs.append(np.log(amp) - 0.5 * (x - centre) ** 2 / dx2 if amp > 0 else np.full(x.shape, -np.inf))
    top = np.maximum(np.maximum(logs[0], logs[1]), logs[2])
    top = np.where(np.isfinite(top), top, 0.0)
    out = []
    for (amp, centre), lg in zip(_lasers(cfg), logs):
        g = np.exp(lg - top)
        s = (x - centre) / dx2
        out.append((g, -s * g, (s * s - 1.0 / dx2) * g))
    return out


def _angle_derivatives(x, cfg: DiodeConfig):
    """phi, phi', phi'' on an array of positions."""
    (om, om1, om2), (a, a1, a2), (b, b1, b2) = _scaled_profiles(x, cfg)
    wm, wm1, wm2 = a - b, a1 - b1, a2 - b2
    mu2 = 4.0 * om * om + wm * wm
    flat = mu2 == 0.0
    phi = np.where(flat, 0.25 * np.pi, 0.5 * np.arctan2(2.0 * om, -wm))
    safe = np.where(flat, 1.0, mu2)
    num = om * wm1 - om1 * wm
    dnum = om * wm2 - om2 * wm
    dmu2 = 8.0 * om * om1 + 2.0 * wm * wm1
    dphi = np.where(flat, 0.0, num / safe)
    ddphi = np.where(flat, 0.0, dnum / safe - num * dmu2 / (safe * safe))
    return phi, dphi, ddphi


def _u_from_angle(phi):
    c, s = np.cos(phi), np.sin(phi)
    u = np.empty(np.shape(phi) + (2, 2))
    u[..., 0, 0] = -c
    u[..., 0, 1] = s
    u[..., 1, 0] = s
    u[..., 1, 1] = c
    return u


def transformation_matrix(x, cfg: DiodeConfig) -> np.ndarray:
    """U(x), shape ``np.shape(x) + (2, 2)``; symmetric and orthogonal."""
    phi, _, _ = _angle_derivatives(np.asarray(x, dtype=float), cfg)
    return _u_from_angle(phi)


def _eigenvalues(w1, w2, omega, hbar):
    s = w1 + w2
    mu = np.hypot(2.0 * omega, w1 - w2)
    lam_plus = 0.25 * hbar * (s + mu)
    den = s + mu
    # product form avoids cancellation when lambda_- is tiny next to lambda_+
    lam_minus = np.where(den > 0, hbar * (w1 * w2 - omega * omega) / np.where(den > 0, den, 1.0), 0.0)
    return lam_minus, lam_plus, mu


@dataclass(frozen=True)
class AdiabaticProfile:
    """Adiabatic quantities sampled on a grid (SI units)."""

    x: np.ndarray
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    w_minus: np.ndarray
    mu: np.ndarray
    a_coupling: np.ndarray
    b_coupling: np.ndarray
    b2_diagonal: np.ndarray

    @property
    def overlaps(self) -> tuple[np.ndarray, np.ndarray]:
        """(|<1|lambda_->|^2, |<2|lambda_->|^2)."""
        return self.u[..., 0, 0] ** 2, self.u[..., 0, 1] ** 2


@dataclass(frozen=True)
class AdiabaticPoint:
    x: float
    lambda_minus: float
    lambda_plus: float
    u: np.ndarray
    a_coupling: float
    b_coupling: float
    w_minus: float
    mu: float
    b2_diagonal: float


def adiabatic_frame(x, cfg: DiodeConfig) -> AdiabaticProfile:
    """Eigenvalues, frame and couplings on an array of positions."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w1, w2, omega = laser_profiles(x, cfg)
    lam_minus, lam_plus, mu = _eigenvalues(w1, w2, omega, cfg.hbar)
    phi, dphi, ddphi = _angle_derivatives(x, cfg)
    a = -0.5 * cfg.hbar ** 2 / cfg.mass * ddphi
    b = cfg.hbar / cfg.mass * dphi
    return AdiabaticProfile(
        x=x,
        lambda_minus=lam_minus,
        lambda_plus=lam_plus,
        u=_u_from_angle(phi),
        phi=phi,
        w_minus=w1 - w2,
        mu=mu,
        a_coupling=a,
        b_coupling=b,
        b2_diagonal=0.5 * cfg.mass * b * b,
    )


def eigensystem(x: float, cfg: DiodeConfig) -> AdiabaticPoint:
    p = adiabatic_frame(np.array([float(x)]), cfg)
    return AdiabaticPoint(
        x=float(x),
        lambda_minus=float(p.lambda_minus[0]),
        lambda_plus=float(p.lambda_plus[0]),
        u=p.u[0],
        a_coupling=float(p.a_coupling[0]),
        b_coupling=float(p.b_coupling[0]),
        w_minus=float(p.w_minus[0]),
        mu=float(p.mu[0]),
        b2_diagonal=float(p.b2_diagonal[0]),
    )


def overlap_probabilities(x, cfg: DiodeConfig):
    """Ground- and excited-state weights of the lower adiabatic state."""
    u = transformation_matrix(x, cfg)
    return u[..., 0, 0] ** 2, u[..., 0, 1] ** 2


def coupling_functions(x, cfg: DiodeConfig):
    """(A, B, mB^2/2) of the adiabatic-frame coupling."""
    p = adiabatic_frame(x, cfg)
    return p.a_coupling, p.b_coupling, p.b2_diagonal


def closed_form_b(x, cfg: DiodeConfig):
    """B(x) written out explicitly; valid only for a centred pump."""
    if cfg.delta != 0.0:
        raise ValueError("closed form for B assumes the pump is centred at x = 0")
    (om, _, _), (a, _, _), (b, _, _) = _scaled_profiles(np.asarray(x, dtype=float), cfg)
    mu2 = 4.0 * om * om + (a - b) ** 2
    return cfg.hbar * cfg.d * om * (a + b) / (cfg.mass * mu2 * cfg.delta_x ** 2)


def effective_potentials(x, cfg: DiodeConfig):
    """lambda_-/+ shifted by the diagonal mB^2/2 of the coupling."""
    p = adiabatic_frame(x, cfg)
    return p.lambda_minus + p.b2_diagonal, p.lambda_plus + p.b2_diagonal


# -- asymptotic frames and amplitude prediction ------------------------------

@dataclass(frozen=True)
class AsymptoticFrames:
    u_left: np.ndarray
    u_right: np.ndarray
    case: CaseLabel


def _tail_frame(cfg: DiodeConfig, sign: float) -> np.ndarray:
    """Limit of U for x -> sign * infinity.

    The Gaussian whose centre lies furthest towards the tail dominates; equal
    centres share the tail in the ratio of their amplitudes.
    """
    present = [(amp, centre, name) for (amp, centre), name in zip(_lasers(cfg), ("omega", "w1", "w2")) if amp > 0]
    if not present:
        return _MIXED.copy()
    reach = max(sign * centre for _, centre, _ in present)
    dominant = {name: amp for amp, centre, name in present if sign * centre == reach}
    if set(dominant) == {"omega"}:
        return _MIXED.copy()
    if set(dominant) == {"w1"}:
        return _EXCITED_LOW.copy()
    if set(dominant) == {"w2"}:
        return _GROUND_LOW.copy()
    om = dominant.get("omega", 0.0)
    wm = dominant.get("w1", 0.0) - dominant.get("w2", 0.0)
    phi = 0.25 * np.pi if om == 0.0 and wm == 0.0 else 0.5 * math.atan2(2.0 * om, -wm)
    return _u_from_angle(np.float64(phi))


def asymptotic_frames(cfg: DiodeConfig) -> AsymptoticFrames:
    return AsymptoticFrames(_tail_frame(cfg, -1.0), _tail_frame(cfg, 1.0), cfg.case)


@dataclass(frozen=True)
class AdiabaticPrediction:
    """Real amplitudes expected when the motion follows the adiabatic states.

    The lower state ``-`` passes with amplitude ``c_minus``; the upper state
    ``+`` meets its barrier and returns with a hard-wall sign flip.
    """

    side: Side
    channel: int
    c_minus: float
    c_plus: float
    r1: float
    r2: float
    t1: float
    t2: float

    @property
    def probabilities(self) -> tuple[float, float, float, float]:
        return self.r1 ** 2, self.r2 ** 2, self.t1 ** 2, self.t2 ** 2


def adiabatic_prediction(cfg: DiodeConfig, side, channel: int) -> AdiabaticPrediction:
    side = Side.parse(side)
    if channel not in (1, 2):
        raise ValueError(f"channel must be 1 or 2, got {channel!r}")
    frames = asymptotic_frames(cfg)
    near, far = (frames.u_left, frames.u_right) if side is Side.LEFT else (frames.u_right, frames.u_left)
    c = near[:, channel - 1]
    refl = near.T @ np.array([0.0, -c[1]])
    trans = far.T @ np.array([c[0], 0.0])
    return AdiabaticPrediction(side, channel, float(c[0]), float(c[1]), *map(float, (*refl, *trans)))


# -- validity limits ----------------------------------------------------------

def _global_max(f, lo: float, hi: float, step: float, candidates: int = 3) -> float:
    """Maximum of a smooth scalar function: grid seed, then bounded Brent."""
    n = max(int(math.ceil((hi - lo) / step)), 2)
    xs = np.linspace(lo, hi, n + 1)
    ys = f(xs)
    best = float(np.max(ys))
    inner = np.flatnonzero((ys[1:-1] >= ys[:-2]) & (ys[1:-1] >= ys[2:])) + 1
    order = inner[np.argsort(ys[inner])[::-1][:candidates]]
    h = xs[1] - xs[0]
    for i in order:
        res = minimize_scalar(
            lambda t: -float(f(np.array([t]))[0]),
            bounds=(xs[i] - h, xs[i] + h),
            method="bounded",
            options={"xatol": 1e-6 * h},
        )
        best = max(best, -float(res.fun))
    return best


def lambda_maxima(cfg: DiodeConfig, margin: float = 10.0) -> tuple[float, float]:
    """(max lambda_-, max lambda_+) over the simulation domain, in joules."""
    lo, hi = simulation_domain(cfg, margin)
    step = cfg.delta_x / 50.0

    def lam(sel):
        def f(x):
            w1, w2, om = laser_profiles(x, cfg)
            return _eigenvalues(w1, w2, om, cfg.hbar)[sel]
        return f

    return _global_max(lam(0), lo, hi, step), _global_max(lam(1), lo, hi, step)


def lambda_limits(cfg: DiodeConfig, margin: float = 10.0) -> tuple[float, float]:
    """(v_lambda_min, v_lambda_max): speeds whose energy clears each maximum."""
    top_minus, top_plus = lambda_maxima(cfg, margin)
    vmin = math.sqrt(2.0 * top_minus / cfg.mass) if top_minus > 0 else 0.0
    vmax = math.sqrt(2.0 * top_plus / cfg.mass) if top_plus > 0 else 0.0
    return vmin, vmax


class AdiabaticityMeasure:
    """q(v) = max over [-d, d] of (A^2 + 2mB^2(E - lambda_-)) / (lambda_+ - lambda_-)^2.

    The frame is sampled once; each call only combines the cached arrays and
    refines the best grid maxima.
    """

    def __init__(self, cfg: DiodeConfig, step_fraction: float = 50.0):
        self.cfg = cfg
        n = max(int(math.ceil(2 * cfg.d / (cfg.delta_x / step_fraction))), 2)
        self.x = np.linspace(-cfg.d, cfg.d, n + 1)
        self._profile = adiabatic_frame(self.x, cfg)
        self.v_lambda_min = lambda_limits(cfg)[0]

    def _terms(self, p: AdiabaticProfile, energy: float):
        gap2 = (p.lambda_plus - p.lambda_minus) ** 2
        num = p.a_coupling ** 2 + 2.0 * self.cfg.mass * p.b_coupling ** 2 * (energy - p.lambda_minus)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(num == 0.0, 0.0, num / gap2)

    def __call__(self, v: float) -> float:
        if not v > self.v_lambda_min:
            raise ValueError(
                f"adiabaticity measure needs v > v_lambda_min = {self.v_lambda_min:.6g} m/s "
                f"(kinetic energy must exceed the lower adiabatic potential), got v = {v}"
            )
        energy, _ = kinematics(v, self.cfg)
        ys = self._terms(self._profile, energy)
        best = float(np.max(ys))
        if best == 0.0:
            return 0.0
        inner = np.flatnonzero((ys[1:-1] >= ys[:-2]) & (ys[1:-1] >= ys[2:])) + 1
        h = self.x[1] - self.x[0]
        for i in inner[np.argsort(ys[inner])[::-1][:3]]:
            res = minimize_scalar(
                lambda t: -float(self._terms(adiabatic_frame(np.array([t]), self.cfg), energy)[0]),
                bounds=(self.x[i] - h, self.x[i] + h),
                method="bounded",
                options={"xatol": 1e-6 * h},
            )
            best = max(best, -float(res.fun))
        return best


def adiabaticity_q(cfg: DiodeConfig, v: float) -> float:
    return AdiabaticityMeasure(cfg)(v)


@dataclass(frozen=True)
class AdiabaticLimits:
    v_lambda_min: float
    v_lambda_max: float
    v_ad_max: float
    epsilon: float


def v_ad_max(
    cfg: DiodeConfig,
    epsilon: float = 0.01,
    v_lower: float = 0.005,
    v_upper: float = 1.2,
    points: int = 200,
    rtol: float = 1e-3,
    measure: AdiabaticityMeasure | None = None,
) -> float:
    """Largest speed below which the adiabaticity measure stays under ``epsilon``.

    The measure grows with v, so the first grid sample that breaches the
    threshold is bracketed against its predecessor and bisected.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    q = measure if measure is not None else AdiabaticityMeasure(cfg)
    floor = q.v_lambda_min
    grid = np.geomspace(v_lower, v_upper, points)
    grid = grid[grid > floor]
    if grid.size == 0:
        return floor
    prev = floor
    for v in grid:
        if q(v) >= epsilon:
            break
        prev = float(v)
    else:
        return float(grid[-1])
    lo, hi = prev, float(v)
    if lo == floor:
        # breached straight away unless a finer look just above the floor says otherwise
        probe = floor * (1.0 + rtol) if floor > 0 else hi * rtol
        if probe >= hi or q(probe) >= epsilon:
            return floor
        lo = probe
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if q(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    return lo


def adiabatic_limits(cfg: DiodeConfig, epsilon: float = 0.01, **grid) -> AdiabaticLimits:
    measure = AdiabaticityMeasure(cfg)
    vmin, vmax = lambda_limits(cfg)
    return AdiabaticLimits(vmin, vmax, v_ad_max(cfg, epsilon, measure=measure, **grid), epsilon)


# -- admixture of the upper state ---------------------------------------------

def first_order_admixture(energy, lambda_minus, lambda_plus, a_tilde, b_tilde, mass) -> complex:
    """Upper-state amplitude carried along by a lower-state plane wave, to first order."""
    if lambda_plus == lambda_minus:
        raise ValueError("adiabatic levels are degenerate")
    if not energy > lambda_minus:
        raise ValueError("energy must exceed the lower adiabatic level")
    p = math.sqrt(2.0 * mass * (energy - lambda_minus))
    return complex(a_tilde, -b_tilde * p) / (lambda_minus - lambda_plus)


def _chebyshev(n: int):
    """Collocation points on [-1, 1] and the first-derivative matrix."""
    j = np.arange(n + 1)
    x = np.cos(np.pi * j / n)
    c = np.where((j == 0) | (j == n), 2.0, 1.0) * (-1.0) ** j
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return x, d


def _solve_admixture(e, a, b, eps, length, n):
    """Constant-coefficient two-mode boundary-value problem in gap units.

    Lower mode: incoming unit wave from the left, outgoing on the right.
    Upper mode: closed, decaying outside the interval.
    """
    t, d1 = _chebyshev(n)
    xs = 0.5 * length * (1.0 - t)  # node 0 sits at the left end
    d1 = -2.0 / length * d1
    d2 = d1 @ d1
    eye = np.eye(n + 1)
    k0 = math.sqrt(e)
    kappa = math.sqrt(1.0 - e)
    shift = 0.25 * (eps * b) ** 2
    m = np.zeros((2 * (n + 1), 2 * (n + 1)), dtype=complex)
    lo, hi = slice(0, n + 1), slice(n + 1, 2 * (n + 1))
    m[lo, lo] = -d2 + (shift - e) * eye
    m[lo, hi] = eps * (a * eye + b * d1)
    m[hi, hi] = -d2 + (1.0 + shift - e) * eye
    m[hi, lo] = eps * (a * eye - b * d1)
    rhs = np.zeros(2 * (n + 1), dtype=complex)
    first, last = 0, n
    rows = [
        (first, lo, d1[first] + 1j * k0 * eye[first], 2j * k0),
        (last, lo, d1[last] - 1j * k0 * eye[last], 0.0),
        (n + 1 + first, hi, d1[first] - kappa * eye[first], 0.0),
        (n + 1 + last, hi, d1[last] + kappa * eye[last], 0.0),
    ]
    for row, block, coeffs, value in rows:
        m[row] = 0.0
        m[row, block] = coeffs
        rhs[row] = value
    sol = np.linalg.solve(m, rhs)
    mid = n // 2
    return sol[n + 1 + mid] / sol[mid], xs[mid]


def admixture_oracle(
    energy,
    lambda_minus,
    lambda_plus,
    a_tilde,
    b_tilde,
    epsilon,
    mass,
    length=None,
    hbar=None,
    nodes: int = 256,
    tol: float = 1e-11,
) -> complex:
    """Upper/lower amplitude ratio from a direct solve with coupling scaled by ``epsilon``.

    The couplings ``a_tilde`` (energy) and ``b_tilde`` (velocity) are frozen
    to constants; the ratio is read at the centre of an interval of
    ``length`` metres, far from the boundary layers of the closed mode.
    """
    from .physics import HBAR

    hbar = HBAR if hbar is None else hbar
    gap = lambda_plus - lambda_minus
    if not gap > 0:
        raise ValueError("need lambda_plus > lambda_minus")
    e = (energy - lambda_minus) / gap
    if not 0.0 < e < 1.0:
        raise ValueError("energy must lie between the two adiabatic levels")
    if epsilon == 0:
        return 0j
    unit = hbar / math.sqrt(2.0 * mass * gap)
    a = a_tilde / gap
    b = b_tilde * math.sqrt(2.0 * mass * gap) / gap
    span = 80.0 / math.sqrt(1.0 - e) if length is None else length / unit
    coarse, _ = _solve_admixture(e, a, b, epsilon, span, nodes)
    fine, _ = _solve_admixture(e, a, b, epsilon, span, int(1.5 * nodes) // 2 * 2)
    if not abs(fine - coarse) <= tol * max(abs(fine), 1e-300) + tol * abs(epsilon):
        raise ConvergenceError(
            f"collocation ratio changed by {abs(fine - coarse):.3e} on refinement", residual=abs(fine - coarse)
        )
    return complex(fine)
