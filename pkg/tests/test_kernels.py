import cmath
import math

import numpy as np
import pytest
from diodelab import kernels
from diodelab.solver import _solve_left

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def random_sectors(rng, n, scale=4e14):
    w11 = scale * rng.uniform(-0.2, 1.0, n)
    w22 = scale * rng.uniform(-0.2, 1.0, n)
    w12 = scale * rng.uniform(-0.5, 0.5, n)
    return w11, w12, w22


def barrier_transmission(u0, k, width):
    """|t|^2 for a single rectangular step of height u0 (in k^2 units), textbook form."""
    w = u0 - k * k
    if w > 0:
        kappa = math.sqrt(w)
        return 1.0 / (1.0 + (u0 * math.sinh(kappa * width)) ** 2 / (4 * k * k * w))
    q = math.sqrt(-w)
    return 1.0 / (1.0 + (u0 * math.sin(q * width)) ** 2 / (4 * k * k * q * q))


@needs_numba
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_numba_and_numpy_agree(seed):
    rng = np.random.default_rng(seed)
    w11, w12, w22 = random_sectors(rng, 3000)
    h, k = 2e-9, 2.5e7
    y_a, k_a, p_a = kernels.sweep(w11, w12, w22, h, k, store=True, use_numba=True)
    y_b, k_b, p_b = kernels.sweep(w11, w12, w22, h, k, store=True, use_numba=False)
    np.testing.assert_allclose(y_a, y_b, rtol=1e-11, atol=0)
    np.testing.assert_allclose(k_a, k_b, rtol=1e-10, atol=1e-12 * np.max(np.abs(k_a)))
    np.testing.assert_allclose(p_a, p_b, rtol=1e-11, atol=1e-14)
    psi0 = np.array([1.0 + 0.5j, -0.3j])
    np.testing.assert_allclose(
        kernels.forward_fill(p_a, psi0, use_numba=True), kernels.forward_fill(p_b, psi0, use_numba=False), rtol=1e-11
    )


def test_store_flag_controls_propagators():
    w = np.zeros(7)
    _, _, props = kernels.sweep(w, w, w, 1e-8, 1e7, store=False)
    assert props.shape == (0, 2, 2)
    _, _, props = kernels.sweep(w, w, w, 1e-8, 1e7, store=True)
    assert props.shape == (7, 2, 2)


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_free_space_is_exact(use_numba):
    n, h, k = 500, 3e-9, 4e7
    w = np.zeros(n)
    y, kmat, _ = kernels.sweep(w, w, w, h, k, use_numba=use_numba)
    np.testing.assert_allclose(y, [1j * k, 0.0, 1j * k], atol=1e-6 * k)
    np.testing.assert_allclose(kmat, cmath.exp(1j * k * n * h) * np.eye(2), atol=1e-10)


@pytest.mark.parametrize("height", [0.3, 0.9, 1.5, 4.0, 30.0])
@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_rectangular_barrier_matches_closed_form(height, use_numba):
    # channel 1 sees a flat step, channel 2 is free; a staircase of equal steps is exact
    k, n, h = 1.0e7, 400, 1.0e-9
    u0 = height * k * k
    w11 = np.full(n, u0)
    zeros = np.zeros(n)
    y, kmat, _ = kernels.sweep(w11, zeros, zeros, h, k, use_numba=use_numba)
    sol = _solve_left(w11, zeros, zeros, h, k, 0.0, n * h)
    assert abs(sol.transmission[0, 0]) ** 2 == pytest.approx(barrier_transmission(u0, k, n * h), rel=1e-10, abs=1e-300)
    assert abs(sol.transmission[1, 1]) == pytest.approx(1.0, abs=1e-12)
    assert abs(sol.transmission[1, 0]) < 1e-14


def test_tall_barrier_does_not_overflow():
    # kappa * width ~ 3000: a transfer matrix would overflow by e^3000
    k, n, h = 1e6, 3000, 1e-9
    w11 = np.full(n, 1e18)
    zeros = np.zeros(n)
    with np.errstate(all="raise"):
        y, kmat, _ = kernels.sweep(w11, zeros, zeros, h, k)
    sol = _solve_left(w11, zeros, zeros, h, k, 0.0, n * h)
    assert np.all(np.isfinite(kmat)) and np.all(np.isfinite(y))
    assert abs(sol.reflection[0, 0]) == pytest.approx(1.0, abs=1e-12)
    assert abs(sol.transmission[0, 0]) < 1e-300


class TestSectorCoefficients:
    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_series_branch_is_continuous(self, sign):
        h = 1e-9
        # either side of the switch to the Taylor form at |w h^2| = 1e-6
        a_in, b_in = kernels._channel_coefficients(sign * 0.999e-6 / h ** 2, h)
        a_out, b_out = kernels._channel_coefficients(sign * 1.001e-6 / h ** 2, h)
        assert a_in == pytest.approx(a_out, rel=1e-8)
        assert b_in == pytest.approx(b_out, rel=1e-8)

    @pytest.mark.parametrize("w", [-4e14, -1e12, 1e10, 1e14, 4e16, 1e20])
    def test_closed_forms(self, w):
        h = 2e-9
        y1, y2 = kernels._channel_coefficients(w, h)
        if w > 0:
            kap = math.sqrt(w)
            assert y1 == pytest.approx(kap / math.tanh(kap * h), rel=1e-12)
            assert y2 == pytest.approx(kap / math.sinh(kap * h), rel=1e-12, abs=1e-300)
        else:
            q = math.sqrt(-w)
            assert y1 == pytest.approx(q / math.tan(q * h), rel=1e-12)
            assert y2 == pytest.approx(q / math.sin(q * h), rel=1e-12)

    def test_vector_form_matches_scalar(self):
        rng = np.random.default_rng(5)
        w11, w12, w22 = random_sectors(rng, 200)
        w12[:10] = 0.0
        w11[:5] = w22[:5]
        h, k = 3e-9, 1.7e7
        ct, st_, a1, a2, b1, b2 = kernels.sector_coefficients(w11, w12, w22, h, k)
        for i in range(200):
            c, s, e_hi, e_lo = kernels._eigen(w11[i], w12[i], w22[i])
            assert (ct[i], st_[i]) == pytest.approx((c, s), abs=1e-14)
            assert (a1[i], a2[i]) == pytest.approx(kernels._channel_coefficients(e_hi - k * k, h), rel=1e-10)
            assert (b1[i], b2[i]) == pytest.approx(kernels._channel_coefficients(e_lo - k * k, h), rel=1e-10)

    def test_eigenvectors_diagonalise(self):
        rng = np.random.default_rng(7)
        for w11, w12, w22 in zip(*random_sectors(rng, 50)):
            c, s, e_hi, e_lo = kernels._eigen(w11, w12, w22)
            t = np.array([[c, -s], [s, c]])
            d = t.T @ np.array([[w11, w12], [w12, w22]]) @ t
            np.testing.assert_allclose(d, np.diag([e_hi, e_lo]), atol=1e-12 * max(abs(e_hi), abs(e_lo)))
