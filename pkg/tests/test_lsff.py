import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_pll.frames import rot
from adaptive_pll.gpebo import Regressor
from adaptive_pll.lsff import (EstimatorGains, EstimatorState, InsufficientHistory,
                               estimator_deriv, excitation_gram, gain_norm, pe_metric,
                               run_estimator, synthetic_regressor)

GRID_RATE = 100 * np.pi


def half_step_grid(duration, dt):
    n = int(round(duration / dt))
    return np.arange(2 * n + 1) * (dt / 2)


def test_gain_validation():
    with pytest.raises(ValueError):
        EstimatorGains(alpha=0.0)
    with pytest.raises(ValueError):
        EstimatorGains(beta=-1.0)
    with pytest.raises(ValueError):
        EstimatorGains(norm="max")
    EstimatorGains(beta=0.0)


def test_initial_state():
    e = EstimatorState.initial(EstimatorGains(f0=4.0), theta0=(1, 2, 3))
    np.testing.assert_array_equal(e.F, np.eye(3) / 4)
    np.testing.assert_array_equal(e.theta_hat, [1, 2, 3])


def test_no_excitation_no_forgetting_is_static():
    e = EstimatorState(theta_hat=np.array([1.0, 2.0, 3.0]), F=np.eye(3))
    dth, dF = estimator_deriv(e, Regressor(np.zeros(2), np.zeros((2, 3))),
                              EstimatorGains(beta=0.0))
    assert not dth.any() and not dF.any()


def test_forgetting_inflates_gain():
    F = np.diag([1.0, 2.0, 3.0])
    _, dF = estimator_deriv(EstimatorState(F=F), Regressor(np.zeros(2), np.zeros((2, 3))),
                            EstimatorGains())
    np.testing.assert_allclose(dF, 500 * F)


def test_freeze_above_cap_keeps_adapting_theta(rng):
    F = np.eye(3) * 100.0  # Frobenius norm 173 > M = 100
    Om = rng.normal(size=(2, 3))
    th = rng.normal(size=3)
    r = Regressor(Om @ th, Om)
    dth, dF = estimator_deriv(EstimatorState(F=F), r, EstimatorGains())
    assert not dF.any()
    np.testing.assert_allclose(dth, 600 * F @ Om.T @ (Om @ th))


def test_spectral_norm_option():
    F = np.eye(3) * 70.0  # Frobenius 121, spectral 70
    assert gain_norm(F, "fro") == pytest.approx(70 * np.sqrt(3))
    assert gain_norm(F, "spectral") == pytest.approx(70.0)
    r = Regressor(np.zeros(2), np.zeros((2, 3)))
    assert not estimator_deriv(EstimatorState(F=F), r, EstimatorGains())[1].any()
    assert estimator_deriv(EstimatorState(F=F), r, EstimatorGains(norm="spectral"))[1].any()


def test_pe_metric_rank_deficient_is_zero():
    Om = np.repeat(np.array([[[1.0, 2.0, 0.0], [0.0, 1.0, 0.0]]]), 101, axis=0)
    assert abs(pe_metric(Om, 0.1, 1e-3)) < 1e-10


def test_pe_metric_empty_or_short_window():
    Om = synthetic_regressor(np.linspace(0, 1, 11))
    with pytest.raises(InsufficientHistory):
        pe_metric(Om, 0.0, 0.1)
    with pytest.raises(InsufficientHistory):
        pe_metric(Om, 2.0, 0.1)


def test_pe_metric_matches_refined_quadrature():
    T = 2 * np.pi
    dt = T / 2000
    coarse = pe_metric(synthetic_regressor(np.arange(2001) * dt), T, dt)
    fine_t = np.arange(20001) * (dt / 10)
    G = excitation_gram(synthetic_regressor(fine_t), dt / 10)
    fine = np.linalg.eigvalsh(G)[0]
    assert coarse > 0.1
    assert coarse == pytest.approx(fine, abs=1e-6)


def test_pe_metric_closed_form():
    """Over a full turn of [rot(t) | e1] the Gram matrix is diag(2pi, 2pi, 2pi)."""
    T = 2 * np.pi
    dt = T / 4000
    G = excitation_gram(synthetic_regressor(np.arange(4001) * dt), dt)
    np.testing.assert_allclose(G, 2 * np.pi * np.eye(3), atol=1e-9)


def _track(theta, gains=None, duration=0.5, dt=1e-5, rate=GRID_RATE, scale=1.0, state=None):
    t = half_step_grid(duration, dt)
    Om = scale * synthetic_regressor(t, rate)
    return run_estimator(Om, Om @ theta, dt, gains or EstimatorGains(), state)


def test_converges_on_synthetic_regressor(rng):
    for theta in rng.uniform(-2000, 2000, size=(10, 3)):
        e = _track(theta)
        assert np.linalg.norm(e.theta_hat - theta) < 1e-4


def test_gain_stays_symmetric_positive_definite(rng):
    for theta in rng.uniform(-2000, 2000, size=(5, 3)):
        for d in (0.001, 0.01, 0.2):
            F = _track(theta, duration=d).F
            assert np.max(np.abs(F - F.T)) < 1e-9
            assert np.linalg.eigvalsh(F)[0] > 0


def test_frozen_gain_still_reduces_error(rng):
    """With a cap below the initial gain the update runs on a constant F."""
    gains = EstimatorGains(M=1e-6)
    for theta in rng.uniform(-2000, 2000, size=(100, 3)):
        e = _track(theta, gains, duration=0.05)
        assert np.linalg.norm(e.theta_hat - theta) < np.linalg.norm(theta)
        np.testing.assert_array_equal(e.F, np.eye(3))


@given(st.floats(0.1, 10.0))
def test_scaling_the_regression_keeps_the_fixed_point(c):
    theta = np.array([314.0, 1100.0, -300.0])
    Om = c * rot(0.4) @ np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    r = Regressor(Om @ theta, Om)
    dth, _ = estimator_deriv(EstimatorState(theta_hat=theta, F=np.eye(3)), r, EstimatorGains())
    np.testing.assert_allclose(dth, 0.0, atol=1e-9)


def test_scaling_changes_speed_not_limit(rng):
    theta = rng.uniform(-2000, 2000, 3)
    for c in (0.5, 2.0):
        assert np.linalg.norm(_track(theta, scale=c).theta_hat - theta) < 1e-4


def test_run_estimator_rejects_bad_sampling():
    with pytest.raises(ValueError):
        run_estimator(np.zeros((4, 2, 3)), np.zeros((4, 2)), 1e-5, EstimatorGains())
