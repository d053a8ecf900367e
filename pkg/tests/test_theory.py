import numpy as np
import pytest
from scipy.optimize import brentq

from poissonkf import (
    InfeasibleRegimeError,
    ScalarModel,
    check_sampling_rate,
    covariance_lower_bounds,
    expected_cov_odes,
    expected_mean_odes,
    gamma_bar,
    phi,
    phi_product_identity_residual,
    ultimate_bound,
)

BENCH = dict(A=-1.0, G=1.0, C=1.0, V=0.5, lam=5.0, P0=1.0)


def bench(M=10, **kw):
    return ScalarModel(M=M, **{**BENCH, **kw})


class TestPhi:
    def test_at_zero(self):
        assert phi(0.0, 1.0, 1.0) == 1.0

    def test_saturation(self):
        assert phi(1e6, 1.0, 1.0) < 1.1e-6

    def test_hand_value(self):
        assert phi(1.0, 1.0, 0.5) == pytest.approx(1.0 / 3.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            phi(1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            phi(-1.0, 1.0, 1.0)


class TestPhiIdentity:
    def test_equal_arguments(self):
        assert phi_product_identity_residual(2.0, 2.0, 1.0, 1.0) == 0.0

    def test_hand_case(self):
        # both sides equal 1/2 at P1=1, P2=0, C=V=1
        assert phi_product_identity_residual(1.0, 0.0, 1.0, 1.0) < 1e-15

    def test_randomized_identity(self):
        rng = np.random.default_rng(12)
        for _ in range(10_000):
            P1, P2 = rng.uniform(0.0, 1e3, size=2)
            C = rng.uniform(-10.0, 10.0)
            if C == 0.0:
                C = 1.0
            V = rng.uniform(1e-3, 1e3)
            scale = max(1.0, abs(P1), abs(P2))
            assert phi_product_identity_residual(P1, P2, C, V) < 1e-12 * scale


class TestScalarModel:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ScalarModel(A=0.0, G=0.0, C=1.0, V=1.0, lam=1.0, M=2)
        with pytest.raises(ValueError):
            ScalarModel(A=0.0, G=1.0, C=0.0, V=1.0, lam=1.0, M=2)
        with pytest.raises(ValueError):
            ScalarModel(A=0.0, G=1.0, C=1.0, V=0.0, lam=1.0, M=2)
        with pytest.raises(ValueError):
            ScalarModel(A=0.0, G=1.0, C=1.0, V=1.0, lam=1.0, M=1)

    def test_q0m_default_and_gm(self):
        m = bench(M=10)
        assert m.Q0M == m.P0
        assert m.G_M == pytest.approx(np.sqrt(0.9))


class TestExpectedCovOdes:
    def test_no_observation_limit(self):
        # lam -> 0: pure Lyapunov ODE with fixed point G^2/(2|A|) = 0.5
        m = bench(M=10, lam=1e-9)
        traj = expected_cov_odes(m, 40.0, 1e-2)
        assert traj.P_cal[-1] == pytest.approx(0.5, abs=1e-6)

    def test_infinite_ensemble_collapses_gap(self):
        m = bench(M=10**12)
        traj = expected_cov_odes(m, 10.0, 1e-3)
        assert np.max(np.abs(traj.E_cal)) < 1e-9

    def test_stationary_point_matches_root(self):
        # oracle: root of (2A - lam) P + G^2 + lam P V/(P C^2 + V) = 0
        m = bench(M=10)
        f = lambda P: (2 * m.A - m.lam) * P + m.G**2 + m.lam * P * m.V / (P * m.C**2 + m.V)
        root = brentq(f, 1e-9, 10.0, xtol=1e-14)
        traj = expected_cov_odes(m, 20.0, 1e-3)
        assert abs(traj.P_cal[-1] - root) < 1e-6
        assert root == pytest.approx(1.0 / np.sqrt(14.0), rel=1e-12)

    def test_positivity_and_gap_bookkeeping(self):
        m = bench(M=10)
        traj = expected_cov_odes(m, 20.0, 1e-3)
        assert np.all(traj.P_cal > 0) and np.all(traj.Q_cal > 0)
        assert np.allclose(traj.E_cal, traj.Q_cal - traj.P_cal)

    def test_phi_stays_below_uniform_bound(self):
        # numeric form of the attenuation-band property along the trajectory
        m = bench(M=10)
        traj = expected_cov_odes(m, 20.0, 1e-3)
        band_P = m.V / (traj.P_cal.min() * m.C**2 + m.V)
        band_Q = m.V / (traj.Q_cal.min() * m.C**2 + m.V)
        phis_P = m.V / (traj.P_cal * m.C**2 + m.V)
        phis_Q = m.V / (traj.Q_cal * m.C**2 + m.V)
        assert np.all(phis_P > 0) and np.all(phis_P <= band_P)
        assert np.all(phis_Q > 0) and np.all(phis_Q <= band_Q)


class TestExpectedMeanOdes:
    def test_zero_fixed_point(self):
        m = bench(M=10)
        traj = expected_cov_odes(m, 5.0, 1e-3)
        X, S, chi = expected_mean_odes(m, traj.P_cal, traj.Q_cal, 0.0, 5.0, 1e-3)
        assert np.all(X == 0.0) and np.all(S == 0.0) and np.all(chi == 0.0)

    def test_identical_gains_keep_chi_zero(self):
        m = bench(M=10**12)
        traj = expected_cov_odes(m, 5.0, 1e-3)
        X, S, chi = expected_mean_odes(m, traj.P_cal, traj.Q_cal, 1.0, 5.0, 1e-3)
        assert np.max(np.abs(chi)) < 1e-9

    def test_unbiased_initialization_tracks_state_mean(self):
        # with filter means started at x0_mean both equal exp(At) x0_mean
        m = bench(M=10)
        traj = expected_cov_odes(m, 5.0, 1e-3)
        X, S, chi = expected_mean_odes(m, traj.P_cal, traj.Q_cal, 1.0, 5.0, 1e-3)
        assert np.allclose(X, np.exp(-traj.grid), atol=1e-9)
        assert np.max(np.abs(chi)) < 1e-12

    def test_chi_shrinks_with_ensemble_size(self):
        # biased initialization (filters at 1, state mean 0): the transient
        # decays at gain-dependent rates, so |chi_T| scales like 1/M
        T, dt = 20.0, 1e-3
        finals = {}
        for M in (10, 100):
            m = bench(M=M)
            traj = expected_cov_odes(m, T, dt)
            _, _, chi = expected_mean_odes(m, traj.P_cal, traj.Q_cal, 0.0, T, dt, xhat0=1.0, shat0=1.0)
            finals[M] = abs(chi[-1])
            # |chi| is nonincreasing once past its initial transient
            peak = int(np.argmax(np.abs(chi)))
            tail = np.abs(chi[peak:])
            assert np.all(np.diff(tail) <= 1e-12 * tail[0])
        assert finals[10] / finals[100] >= 5.0

    def test_distinct_initializations_decay(self):
        m = bench(M=10**12)
        traj = expected_cov_odes(m, 10.0, 1e-3)
        X, S, chi = expected_mean_odes(m, traj.P_cal, traj.Q_cal, 1.0, 10.0, 1e-3, shat0=0.5)
        assert chi[0] == pytest.approx(0.5)
        assert abs(chi[-1]) < abs(chi[0]) * 1e-3

    def test_grid_mismatch_rejected(self):
        m = bench(M=10)
        traj = expected_cov_odes(m, 5.0, 1e-3)
        with pytest.raises(ValueError):
            expected_mean_odes(m, traj.P_cal[:-1], traj.Q_cal, 1.0, 5.0, 1e-3)


class TestGammaBar:
    def test_benchmark_hand_value(self):
        gb = gamma_bar(bench(M=10))
        assert gb == pytest.approx(max(0.25 / 2.25, (3.5 / 4.4) ** 2), rel=1e-12)
        assert gb == pytest.approx(0.63275, abs=5e-6)

    def test_small_noise_vanishes(self):
        gb = gamma_bar(bench(M=10, V=1e-6))
        assert gb < 1e-5

    def test_infeasible_regime(self):
        with pytest.raises(InfeasibleRegimeError):
            gamma_bar(bench(M=10, A=3.0))  # lam=5 <= 2A=6

    def test_in_unit_interval(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            m = bench(
                M=int(rng.integers(2, 50)),
                A=rng.uniform(-3.0, 1.0),
                G=rng.uniform(0.1, 3.0),
                C=rng.uniform(0.1, 3.0),
                V=rng.uniform(0.01, 5.0),
                lam=rng.uniform(2.5, 20.0),
                P0=rng.uniform(0.1, 5.0),
            )
            gb = gamma_bar(m)
            assert 0.0 < gb < 1.0


class TestSamplingRate:
    def test_nonpositive_drift_always_feasible(self):
        report = check_sampling_rate(bench(M=10))
        assert report.feasible and report.lambda_min == 0.0

    def test_zero_drift_feasible_for_any_rate(self):
        report = check_sampling_rate(bench(M=10, A=0.0, lam=0.01))
        assert report.feasible

    def test_noise_inequality_holds_when_av_small(self):
        # AV <= G_M^2 C^2 makes the first sufficient inequality automatic
        m = bench(M=10, A=0.5, lam=20.0)
        assert m.A * m.V <= m.G_M**2 * m.C**2
        report = check_sampling_rate(m)
        assert report.ineq_noise

    def test_infeasible_reported_not_raised(self):
        report = check_sampling_rate(bench(M=10, A=3.0))
        assert not report.feasible
        assert report.ultimate_bound is None
        assert np.isnan(report.gamma_bar)

    def test_contraction_coefficient_negative_when_feasible(self):
        # 2(2A - lam) + 2 lam gamma_bar^2 < 0 whenever the rate is feasible
        rng = np.random.default_rng(7)
        for _ in range(200):
            m = bench(
                M=int(rng.integers(2, 50)),
                A=rng.uniform(-2.0, 2.0),
                lam=rng.uniform(0.5, 20.0),
                V=rng.uniform(0.01, 2.0),
            )
            report = check_sampling_rate(m)
            if report.feasible:
                coeff = 2.0 * (2.0 * m.A - m.lam) + 2.0 * m.lam * report.gamma_bar**2
                assert coeff < 0.0


class TestUltimateBound:
    def test_benchmark_hand_value(self):
        assert ultimate_bound(bench(M=10)) == pytest.approx(0.07002590593228288, rel=1e-12)
        assert ultimate_bound(bench(M=10)) == pytest.approx(0.07003, abs=5e-6)

    def test_large_ensemble_vanishes(self):
        assert ultimate_bound(bench(M=10**9)) < 1e-8

    def test_doubling_m_halves_bound(self):
        m10, m20 = bench(M=10), bench(M=20)
        # same gamma_bar needed for the exact halving; pin Q0M branch dominant
        if gamma_bar(m10) == gamma_bar(m20):
            assert ultimate_bound(m20) == pytest.approx(ultimate_bound(m10) / 2.0, rel=1e-12)
        b10 = ultimate_bound(bench(M=10, Q0M=0.01))
        b20 = ultimate_bound(bench(M=20, Q0M=0.01))
        assert b20 == pytest.approx(b10 / 2.0, rel=1e-12)

    def test_infeasible_raises(self):
        with pytest.raises(InfeasibleRegimeError):
            ultimate_bound(bench(M=10, A=3.0))


class TestLowerBounds:
    def test_benchmark_hand_values(self):
        lo_P, lo_Q = covariance_lower_bounds(bench(M=10))
        assert lo_P == pytest.approx(1.0 / 7.0)
        assert lo_Q == pytest.approx(9.0 / 70.0)

    def test_small_p0_selects_initial_value(self):
        lo_P, _ = covariance_lower_bounds(bench(M=10, P0=1e-6))
        assert lo_P == 1e-6

    def test_ode_trajectory_respects_bound(self):
        m = bench(M=10)
        lo_P, lo_Q = covariance_lower_bounds(m)
        traj = expected_cov_odes(m, 20.0, 1e-3)
        assert traj.P_cal.min() >= lo_P - 1e-9
        assert traj.Q_cal.min() >= lo_Q - 1e-9

    def test_requires_subcritical_drift(self):
        with pytest.raises(InfeasibleRegimeError):
            covariance_lower_bounds(bench(M=10, A=3.0))


class TestOdeGapAgainstBound:
    def test_gap_within_ultimate_bound_on_late_window(self):
        # ODE-level version of the main convergence statement
        T, dt = 20.0, 1e-3
        for M in (10, 20, 40):
            m = bench(M=M)
            traj = expected_cov_odes(m, T, dt)
            late = traj.grid >= T / 2
            assert np.max(np.abs(traj.E_cal[late])) <= ultimate_bound(m) + 1e-9
