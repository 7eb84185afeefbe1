import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diodelab import adiabatic as ad
from diodelab.physics import HBAR, NEON_MASS, DiodeConfig, potential_matrix
from diodelab.selfcheck import ADIABATIC_AMPLITUDES
from diodelab.solver import ConvergenceError

R = 1 / math.sqrt(2)
MIXED = np.array([[-R, R], [R, R]])
GROUND_LOW = np.array([[-1.0, 0.0], [0.0, 1.0]])
EXCITED_LOW = np.array([[0.0, 1.0], [1.0, 0.0]])

CASE0 = DiodeConfig.from_units(1.0, 0.0, 0.0, 50.0)
CASE1 = DiodeConfig.from_units(1.0, 100.0, 0.0, 50.0)
CASE2 = DiodeConfig.from_units(1.0, 0.0, 100.0, 50.0)
CASE12 = DiodeConfig.from_units(1.0, 100.0, 100.0, 50.0)

config_strategy = st.builds(
    DiodeConfig.from_units,
    st.floats(0.0, 1.0),
    st.floats(0.0, 100.0),
    st.floats(0.0, 100.0),
    st.floats(20.0, 120.0),
    st.floats(-30.0, 30.0),
)


class TestEigensystem:
    def test_pump_only(self):
        cfg = DiodeConfig.from_units(1.0, 0.0, 0.0, 50.0)
        p = ad.eigensystem(0.0, cfg)
        half = 0.5 * HBAR * cfg.omega_hat
        assert p.lambda_minus == pytest.approx(-half, rel=1e-14)
        assert p.lambda_plus == pytest.approx(half, rel=1e-14)
        np.testing.assert_allclose(p.u, MIXED, atol=1e-15)

    def test_only_w2(self):
        cfg = DiodeConfig.from_units(0.0, 0.0, 100.0, 50.0)
        p = ad.eigensystem(-cfg.d, cfg)
        assert p.lambda_minus == 0.0
        assert p.lambda_plus == pytest.approx(0.5 * HBAR * cfg.w2_hat, rel=1e-14)
        np.testing.assert_array_equal(p.u, GROUND_LOW)

    def test_only_w1(self):
        cfg = DiodeConfig.from_units(0.0, 100.0, 0.0, 50.0)
        p = ad.eigensystem(cfg.d, cfg)
        assert p.lambda_minus == 0.0
        assert p.lambda_plus == pytest.approx(0.5 * HBAR * cfg.w1_hat, rel=1e-14)
        np.testing.assert_allclose(p.u, EXCITED_LOW, atol=1e-16)

    @settings(max_examples=20)
    @given(config_strategy)
    def test_frame_diagonalizes(self, cfg):
        x = np.linspace(-4 * cfg.d - 60e-6, 4 * cfg.d + 60e-6, 301)
        p = ad.adiabatic_frame(x, cfg)
        m = potential_matrix(x, cfg)
        d = p.u @ m @ np.swapaxes(p.u, -1, -2)
        scale = HBAR * max(cfg.omega_hat, cfg.w1_hat, cfg.w2_hat, 1.0)
        assert np.max(np.abs(d[:, 0, 1])) <= 1e-12 * scale
        np.testing.assert_allclose(d[:, 0, 0], p.lambda_minus, atol=1e-12 * scale)
        np.testing.assert_allclose(d[:, 1, 1], p.lambda_plus, atol=1e-12 * scale)
        np.testing.assert_allclose(p.u @ p.u, np.broadcast_to(np.eye(2), p.u.shape), atol=1e-14)

    def test_trace_and_gap_identities(self):
        x = np.linspace(-200e-6, 200e-6, 10_000)
        for cfg in (CASE0, CASE1, CASE2, CASE12, DiodeConfig.from_units(0.2, 20.0, 100.0, 40.0, 5.0)):
            p = ad.adiabatic_frame(x, cfg)
            w = potential_matrix(x, cfg)
            trace = w[:, 0, 0] + w[:, 1, 1]
            size = np.abs(p.lambda_minus) + np.abs(p.lambda_plus)
            assert np.all(np.abs(p.lambda_minus + p.lambda_plus - trace) <= 1e-12 * size)
            assert np.all(np.abs(p.lambda_plus - p.lambda_minus - 0.5 * HBAR * p.mu) <= 1e-12 * size)

    def test_tiny_lower_level_keeps_precision(self):
        # far in the tail lambda_- is many orders below lambda_+
        cfg = DiodeConfig.from_units(0.2, 100.0, 100.0, 50.0)
        x = np.array([0.0])
        w = potential_matrix(x, cfg)[0]
        exact = (w[0, 0] * w[1, 1] - w[0, 1] ** 2) / ad.eigensystem(0.0, cfg).lambda_plus
        assert ad.eigensystem(0.0, cfg).lambda_minus == pytest.approx(exact, rel=1e-12)

    def test_tails_are_finite(self):
        p = ad.adiabatic_frame(np.array([-5e-3, 5e-3]), CASE12)
        assert np.all(np.isfinite(p.u)) and np.all(np.isfinite(p.a_coupling))


class TestOverlaps:
    def test_transfer_across_case12(self):
        p1, p2 = ad.overlap_probabilities(np.array([-300e-6, 300e-6]), CASE12)
        np.testing.assert_allclose([p1[0], p2[0]], [1, 0], atol=1e-12)
        np.testing.assert_allclose([p1[1], p2[1]], [0, 1], atol=1e-12)

    def test_case1_left_is_mixed(self):
        p1, p2 = ad.overlap_probabilities(-300e-6, CASE1)
        assert p1 == pytest.approx(0.5, abs=1e-12) and p2 == pytest.approx(0.5, abs=1e-12)

    def test_sum_to_one(self):
        p1, p2 = ad.overlap_probabilities(np.linspace(-1e-4, 1e-4, 50), CASE2)
        np.testing.assert_allclose(p1 + p2, 1.0, rtol=1e-14)


class TestCouplings:
    x = np.linspace(-150e-6, 150e-6, 2001)

    @pytest.mark.parametrize("cfg", [CASE1, CASE2, CASE12, DiodeConfig.from_units(0.2, 20.0, 100.0, 60.0)])
    def test_derivative_b_matches_closed_form(self, cfg):
        _, b, _ = ad.coupling_functions(self.x, cfg)
        closed = ad.closed_form_b(self.x, cfg)
        scale = np.max(np.abs(b))
        np.testing.assert_allclose(b, closed, rtol=1e-6, atol=1e-12 * scale)

    def test_closed_form_needs_centred_pump(self):
        with pytest.raises(ValueError):
            ad.closed_form_b(0.0, DiodeConfig.from_units(1.0, 100.0, 100.0, 50.0, 10.0))

    @pytest.mark.parametrize("cfg", [CASE12, DiodeConfig.from_units(0.4, 30.0, 90.0, 40.0, -12.0)])
    def test_against_finite_differences(self, cfg):
        h1, h2 = 1e-9, 1e-8
        x = np.linspace(-100e-6, 100e-6, 41)
        phi = lambda z: ad.adiabatic_frame(z, cfg).phi
        dphi = (phi(x + h1) - phi(x - h1)) / (2 * h1)
        ddphi = (phi(x + h2) - 2 * phi(x) + phi(x - h2)) / h2 ** 2
        a, b, b2 = ad.coupling_functions(x, cfg)
        np.testing.assert_allclose(b, HBAR / cfg.mass * dphi, rtol=1e-5, atol=1e-7 * np.max(np.abs(b)))
        np.testing.assert_allclose(a, -0.5 * HBAR ** 2 / cfg.mass * ddphi, rtol=1e-2, atol=1e-3 * np.max(np.abs(a)))
        np.testing.assert_allclose(b2, 0.5 * cfg.mass * b ** 2)

    def test_du_dx_is_b_times_rotation(self):
        # dU/dx U^T = (m B / hbar) [[0, -1], [1, 0]]-type generator
        x = np.linspace(-80e-6, 80e-6, 17)
        h = 1e-9
        du = (ad.transformation_matrix(x + h, CASE12) - ad.transformation_matrix(x - h, CASE12)) / (2 * h)
        gen = du @ np.swapaxes(ad.transformation_matrix(x, CASE12), -1, -2)
        _, b, _ = ad.coupling_functions(x, CASE12)
        np.testing.assert_allclose(np.abs(gen[:, 0, 1]), np.abs(CASE12.mass * b / HBAR), rtol=1e-5, atol=1e-6 * np.max(np.abs(b)) * CASE12.mass / HBAR)
        np.testing.assert_allclose(gen[:, 0, 0], 0.0, atol=1e-3)

    def test_pump_only_has_no_coupling(self):
        p = ad.adiabatic_frame(np.linspace(-3e-4, 3e-4, 10_001), CASE0)
        assert np.max(np.abs(p.a_coupling)) == 0.0 and np.max(np.abs(p.b_coupling)) == 0.0

    def test_vanish_in_tails(self):
        a, b, _ = ad.coupling_functions(np.array([-1e-3, 1e-3]), CASE12)
        assert np.all(np.abs(a) < 1e-40) and np.all(np.abs(b) < 1e-20)

    def test_effective_potentials(self):
        lm, lp = ad.effective_potentials(self.x, CASE12)
        p = ad.adiabatic_frame(self.x, CASE12)
        np.testing.assert_allclose(lp - lm, p.lambda_plus - p.lambda_minus)
        assert np.all(lm >= p.lambda_minus)


class TestAsymptotics:
    @pytest.mark.parametrize("cfg,left,right", [
        (CASE0, MIXED, MIXED),
        (CASE1, MIXED, EXCITED_LOW),
        (CASE2, GROUND_LOW, MIXED),
        (CASE12, GROUND_LOW, EXCITED_LOW),
    ])
    def test_frames(self, cfg, left, right):
        f = ad.asymptotic_frames(cfg)
        np.testing.assert_array_equal(f.u_left, left)
        np.testing.assert_array_equal(f.u_right, right)

    @pytest.mark.parametrize("cfg", [CASE0, CASE1, CASE2, CASE12])
    def test_frames_are_tail_limits(self, cfg):
        f = ad.asymptotic_frames(cfg)
        np.testing.assert_allclose(ad.transformation_matrix(-2e-3, cfg), f.u_left, atol=1e-12)
        np.testing.assert_allclose(ad.transformation_matrix(2e-3, cfg), f.u_right, atol=1e-12)

    @pytest.mark.parametrize("w1,w2", list(ADIABATIC_AMPLITUDES))
    @pytest.mark.parametrize("side", ["left", "right"])
    def test_amplitude_table(self, w1, w2, side):
        p = ad.adiabatic_prediction(DiodeConfig.from_units(1.0, w1, w2, 50.0), side, 1)
        got = (p.c_minus, p.c_plus, p.r1, p.r2, p.t1, p.t2)
        assert got == pytest.approx(ADIABATIC_AMPLITUDES[(w1, w2)][side], abs=1e-15)

    def test_examples(self):
        p = ad.adiabatic_prediction(CASE12, "left", 1)
        assert (p.c_minus, p.c_plus, p.r1, p.r2, p.t1, p.t2) == (-1, 0, 0, 0, 0, -1)
        p = ad.adiabatic_prediction(CASE1, "right", 1)
        assert (p.c_minus, p.c_plus, p.r1, p.r2, p.t1, p.t2) == (0, 1, -1, 0, 0, 0)
        assert ad.adiabatic_prediction(CASE2, "right", 1).t1 == R

    @pytest.mark.parametrize("cfg", [CASE0, CASE1, CASE2, CASE12])
    @pytest.mark.parametrize("side", ["left", "right"])
    @pytest.mark.parametrize("channel", [1, 2])
    def test_prediction_conserves_probability(self, cfg, side, channel):
        assert sum(ad.adiabatic_prediction(cfg, side, channel).probabilities) == pytest.approx(1.0, abs=1e-15)

    def test_bad_channel(self):
        with pytest.raises(ValueError):
            ad.adiabatic_prediction(CASE12, "left", 0)


class TestLimits:
    def test_pump_only(self):
        vmin, vmax = ad.lambda_limits(CASE0)
        assert vmin == 0.0
        assert vmax == pytest.approx(math.sqrt(HBAR * CASE0.omega_hat / CASE0.mass), rel=1e-9)
        assert vmax == pytest.approx(0.0560991367557614, rel=1e-9)

    def test_plateau_config(self):
        vmin, vmax = ad.lambda_limits(CASE12)
        assert vmax == pytest.approx(0.5609913675576, rel=1e-3)
        weak = ad.lambda_limits(DiodeConfig.from_units(0.2, 100.0, 100.0, 50.0))
        assert 0.02 <= weak[0] <= 0.03

    def test_lower_max_matches_dense_sampling(self):
        cfg = DiodeConfig.from_units(0.2, 100.0, 100.0, 50.0)
        x = np.linspace(-60e-6, 60e-6, 200_001)
        dense = float(np.max(ad.adiabatic_frame(x, cfg).lambda_minus))
        assert ad.lambda_maxima(cfg)[0] == pytest.approx(dense, rel=1e-8)

    def test_q_zero_for_pump_only(self):
        q = ad.AdiabaticityMeasure(CASE0)
        assert all(q(v) == 0.0 for v in (0.01, 0.3, 1.0))
        assert ad.v_ad_max(CASE0) == pytest.approx(1.2)

    def test_q_increases_with_speed(self, weak_pump_diode):
        q = ad.AdiabaticityMeasure(weak_pump_diode)
        vs = np.geomspace(0.03, 1.0, 12)
        values = [q(v) for v in vs]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_q_rejects_slow(self, weak_pump_diode):
        with pytest.raises(ValueError, match="v_lambda_min"):
            ad.adiabaticity_q(weak_pump_diode, 0.01)

    def test_v_ad_max_brackets_threshold(self, weak_pump_diode):
        q = ad.AdiabaticityMeasure(weak_pump_diode)
        v = ad.v_ad_max(weak_pump_diode, 0.01, measure=q)
        assert q(v) < 0.01 <= q(v * 1.002)

    def test_v_ad_max_monotone_in_epsilon(self, weak_pump_diode):
        q = ad.AdiabaticityMeasure(weak_pump_diode)
        values = [ad.v_ad_max(weak_pump_diode, e, measure=q) for e in (0.005, 0.01, 0.02, 0.04)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_v_ad_max_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            ad.v_ad_max(CASE0, 0.0)

    def test_limits_bundle(self, weak_pump_diode):
        lim = ad.adiabatic_limits(weak_pump_diode)
        assert lim.v_lambda_min < lim.v_ad_max < lim.v_lambda_max


GAP = HBAR * 1e6


class TestAdmixture:
    def test_zero_coupling(self):
        assert ad.first_order_admixture(0.5 * GAP, 0.0, GAP, 0.0, 0.0, NEON_MASS) == 0

    def test_real_without_velocity_coupling(self):
        z = ad.first_order_admixture(0.5 * GAP, 0.0, GAP, 0.3 * GAP, 0.0, NEON_MASS)
        assert z == pytest.approx(-0.3) and z.imag == 0.0

    def test_velocity_term(self):
        e, b = 0.5 * GAP, 1e-3
        p = math.sqrt(2 * NEON_MASS * e)
        assert ad.first_order_admixture(e, 0.0, GAP, 0.0, b, NEON_MASS) == pytest.approx(1j * b * p / GAP)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ad.first_order_admixture(GAP, GAP, GAP, 0.1, 0.1, NEON_MASS)
        with pytest.raises(ValueError):
            ad.first_order_admixture(-1.0, 0.0, GAP, 0.1, 0.1, NEON_MASS)
        with pytest.raises(ValueError):
            ad.admixture_oracle(1.5 * GAP, 0.0, GAP, 0.1, 0.1, 0.01, NEON_MASS)

    def test_oracle_zero_epsilon(self):
        assert ad.admixture_oracle(0.5 * GAP, 0.0, GAP, 0.2 * GAP, 0.0, 0.0, NEON_MASS) == 0

    def test_oracle_is_shift_invariant(self):
        args = (0.1 * GAP, 1e-4, 0.01, NEON_MASS)
        a = ad.admixture_oracle(0.4 * GAP, 0.0, GAP, *args)
        b = ad.admixture_oracle(2.4 * GAP, 2 * GAP, 3 * GAP, *args)
        assert a == pytest.approx(b, rel=1e-9)

    def test_oracle_resolution_failure_is_reported(self):
        with pytest.raises(ConvergenceError):
            ad.admixture_oracle(0.5 * GAP, 0.0, GAP, 0.3 * GAP, 0.0, 0.01, NEON_MASS, nodes=12)

    @pytest.mark.parametrize("e,a,b", [(0.3, 0.5, 0.0), (0.6, 0.0, 0.8), (0.45, -0.7, 0.4)])
    def test_residual_shrinks_quadratically(self, e, a, b):
        b_si = b * GAP / math.sqrt(2 * NEON_MASS * GAP)
        first = ad.first_order_admixture(e * GAP, 0.0, GAP, a * GAP, b_si, NEON_MASS)
        eps = np.array([0.02, 0.01, 0.005])
        rel = [abs(ad.admixture_oracle(e * GAP, 0.0, GAP, a * GAP, b_si, x, NEON_MASS) / (x * first) - 1) for x in eps]
        slope = np.polyfit(np.log(eps), np.log(rel), 1)[0]
        assert abs(slope - 2.0) <= 0.3
        assert rel[-1] < 1e-3
