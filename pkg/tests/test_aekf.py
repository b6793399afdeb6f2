import numpy as np
import pytest

from lgfusion.aekf import (
    H_MATRIX,
    NoiseConfig,
    NumericalFailure,
    StateEstimate,
    adapt_noise,
    chi2_gate,
    condition_covariance,
    innovation,
    predict,
    step,
    update,
)
from lgfusion.liegroup import make_pose, se3_exp
from lgfusion.state import TargetState, state_between

R0 = np.diag([1e-6] * 3 + [1e-3] * 3)


def noise(f_q=1.0, f_r=1.0, r=R0):
    return NoiseConfig.from_blocks(1e-5 * np.eye(3), 1e-2 * np.eye(3), r, f_q, f_r)


def test_predict_constant_velocity():
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    prior, f_bar, F = predict(est, noise(), 0.066)
    assert np.allclose(prior.mean.pose[:3, 3], [0.00066, 0, 0], atol=1e-15)
    assert np.allclose(f_bar, np.r_[0, 0, 0, 0.00066, 0, 0, np.zeros(6)])
    assert F.shape == (12, 12)


def test_predict_zero_velocity_only_adds_noise():
    P = 1e-2 * np.eye(12)
    prior, _, F = predict(StateEstimate(TargetState(), P), noise(), 0.1)
    assert np.array_equal(prior.mean.pose, np.eye(4))
    D = np.zeros((12, 12))
    D[:6, 6:] = 0.1 * np.eye(6)
    assert np.allclose(F, np.eye(12) + D)


def test_predict_rejects_bad_dt():
    with pytest.raises(ValueError):
        predict(StateEstimate(TargetState(), np.eye(12)), noise(), 0.0)


def test_update_with_exact_measurement_keeps_mean():
    prior = StateEstimate(TargetState(se3_exp([0.1, 0.2, 0.3, 1, 2, 3])), 1e-2 * np.eye(12))
    post, fields = update(prior, prior.mean.pose, noise())
    assert np.allclose(post.mean.pose, prior.mean.pose, atol=1e-15)
    assert np.all(np.diag(post.cov)[:6] < np.diag(prior.cov)[:6])


def test_gain_matches_euclidean_kalman_gain():
    # near identity, diagonal P and R: K = P H^T (H P H^T + R)^-1 componentwise
    P = np.diag(np.linspace(1e-3, 2e-2, 12))
    prior = StateEstimate(TargetState(), P)
    z = se3_exp([1e-4, -2e-4, 1e-4, 1e-3, 2e-3, -1e-3])
    _, fields = update(prior, z, noise())
    K_ref = P @ H_MATRIX.T @ np.linalg.inv(H_MATRIX @ P @ H_MATRIX.T + R0)
    assert np.allclose(fields["gain"], K_ref, atol=1e-9, rtol=0)


def test_innovation_is_log_of_relative_pose():
    mean = TargetState(make_pose(translation=[1, 0, 0]))
    z = make_pose(translation=[1.5, 0, 0])
    assert np.allclose(innovation(mean, z), [0, 0, 0, 0.5, 0, 0])


def test_step_without_measurement():
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    n = noise(0.9, 0.9)
    post, n2, rec = step(est, n, 0.066)
    assert n2 is n
    assert not rec.measured and rec.gain is None
    assert np.array_equal(rec.correction, np.zeros(12))


def test_forgetting_factor_one_is_constant_noise(rng):
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    n = noise(1.0, 1.0)
    for k in range(20):
        z = se3_exp(0.01 * rng.standard_normal(6))
        est, n2, rec = step(est, n, 0.066, z)
        assert np.array_equal(n2.q, n.q) and np.array_equal(n2.r, n.r)


def test_adaptation_formulas(rng):
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    n = noise(0.9, 0.8)
    z = se3_exp(0.05 * rng.standard_normal(6))
    post, n2, rec = step(est, n, 0.066, z)
    dx = rec.gain @ rec.innovation
    assert np.allclose(n2.q, 0.9 * n.q + 0.1 * np.outer(dx, dx) / 0.066)
    mu = rec.residual
    assert np.allclose(n2.r, 0.8 * n.r + 0.2 * (np.outer(mu, mu) + rec.p_prior[:6, :6]))
    assert np.allclose(mu, state_between(post.mean, TargetState(z))[:6])


def test_adapt_noise_without_measurement_is_noop():
    est = StateEstimate(TargetState(), np.eye(12))
    _, _, rec = step(est, noise(0.5, 0.5), 0.1)
    n = noise(0.5, 0.5)
    assert adapt_noise(n, rec) is n


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_noise_factor_range(bad):
    with pytest.raises(ValueError):
        noise(bad, 1.0)


def test_gate_rejects_outlier():
    est = StateEstimate(TargetState(), 1e-4 * np.eye(12))
    z = se3_exp([0, 0, 0, 5.0, 0, 0])
    post, n2, rec = step(est, noise(), 0.1, z, gate=chi2_gate(0.999))
    assert rec.rejected and not rec.measured
    assert np.array_equal(post.cov, rec.p_prior)


def test_condition_covariance():
    P = np.diag([1.0, 0.0, 1e-14])
    out = condition_covariance(P)
    assert np.linalg.eigvalsh(out)[0] >= 1e-12 * (1 - 1e-9)
    with pytest.raises(NumericalFailure):
        condition_covariance(np.diag([1.0, -1e-3]))
    with pytest.raises(NumericalFailure):
        condition_covariance(np.array([[np.nan, 0], [0, 1.0]]))


def test_covariance_stays_symmetric_psd(rng):
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    n = noise(0.99, 0.95)
    for k in range(200):
        z = se3_exp(0.03 * rng.standard_normal(6)) if k % 3 else None
        est, n, _ = step(est, n, 0.25, z)
        assert np.array_equal(est.cov, est.cov.T)
        assert np.linalg.eigvalsh(est.cov)[0] > 0
