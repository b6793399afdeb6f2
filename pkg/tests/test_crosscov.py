import numpy as np

from lgfusion.aekf import StateEstimate, step
from lgfusion.crosscov import (
    initial_cross_covariance,
    joint_covariance,
    propagate_and_update,
    shared_process_noise,
)
from lgfusion.state import TargetState

from conftest import R0
from lgfusion.aekf import NoiseConfig


def _noise(f=1.0, scale=1.0):
    return NoiseConfig.from_blocks(1e-5 * np.eye(3), scale * 1e-2 * np.eye(3), R0, f, f)


def test_starts_at_zero():
    assert np.array_equal(initial_cross_covariance(), np.zeros((12, 12)))


def test_prediction_only_propagation():
    est = StateEstimate(TargetState(vel=[0.01, 0, 0]), 1e-2 * np.eye(12))
    n = _noise()
    _, _, rb = step(est, n, 0.1)
    _, _, rh = step(est, n, 0.1)
    X = np.eye(12) * 1e-3
    out = propagate_and_update(X, rb, rh)
    from lgfusion.state import state_right_jacobian

    J = state_right_jacobian(rb.f_bar)
    ref = rb.f_matrix @ X @ rh.f_matrix.T + J @ rb.q_d @ J.T
    assert np.allclose(out, ref)


def test_prediction_only_from_shared_prior_tracks_covariance():
    # fully correlated start and no updates: the cross term stays equal to P
    est = StateEstimate(TargetState(vel=[0.01, 0.002, 0], omega=[0, 0, 0.1]), 1e-2 * np.eye(12))
    n = _noise()
    X = est.cov.copy()
    a = b = est
    for _ in range(30):
        a, _, ra = step(a, n, 0.066)
        b, _, rb = step(b, n, 0.066)
        X = propagate_and_update(X, ra, rb)
    assert np.allclose(X, a.cov, rtol=1e-12, atol=1e-15)


def test_shared_noise_reduces_to_common_q():
    est = StateEstimate(TargetState(), np.eye(12))
    _, _, ra = step(est, _noise(), 0.1)
    _, _, rb = step(est, _noise(), 0.1)
    assert np.array_equal(shared_process_noise(ra, rb), ra.q_d)


def test_shared_noise_keeps_joint_psd():
    est = StateEstimate(TargetState(), np.eye(12))
    _, _, ra = step(est, _noise(scale=1.0), 0.1)
    _, _, rb = step(est, _noise(scale=9.0), 0.1)
    C = shared_process_noise(ra, rb)
    assert np.allclose(C[9:, 9:], 3.0 * ra.q_d[9:, 9:])
    J = joint_covariance(ra.q_d, rb.q_d, C)
    assert np.linalg.eigvalsh(J)[0] > -1e-15


def test_joint_layout():
    A, B, C = np.eye(2), 2 * np.eye(2), np.array([[0.1, 0.2], [0.3, 0.4]])
    J = joint_covariance(A, B, C)
    assert np.array_equal(J[:2, 2:], C) and np.array_equal(J[2:, :2], C.T)
