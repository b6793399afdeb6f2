import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgfusion.liegroup import (
    JR_TAYLOR_CUTOFF,
    TAYLOR_CUTOFF,
    ad_matrix,
    adjoint_matrix,
    hat,
    is_rotation,
    orthonormalize,
    pose_inverse,
    se3_V,
    se3_V_inv,
    se3_exp,
    se3_log,
    se3_right_jacobian,
    se3_right_jacobian_inv,
    skew,
    so3_exp,
    so3_log,
    unskew,
    vee,
)
from scipy.linalg import expm
from math import factorial


def random_twist(rng, max_angle=np.pi - 1e-3):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    return np.concatenate([axis * rng.uniform(0, max_angle), rng.uniform(-2, 2, 3)])


finite = st.floats(-3.0, 3.0, allow_nan=False)
twists = st.lists(finite, min_size=6, max_size=6).map(np.array)


def test_identity_maps():
    assert np.array_equal(se3_exp(np.zeros(6)), np.eye(4))
    assert np.array_equal(se3_log(np.eye(4)), np.zeros(6))
    assert np.array_equal(so3_log(np.eye(3)), np.zeros(3))


def test_skew_is_cross_product(rng):
    a, b = rng.standard_normal((2, 3))
    assert np.allclose(skew(a) @ b, np.cross(a, b))
    assert np.allclose(unskew(skew(a)), a)


def test_hat_vee_roundtrip(rng):
    z = rng.standard_normal(6)
    assert np.allclose(vee(hat(z)), z)


def test_exp_matches_matrix_exponential(rng):
    for _ in range(20):
        z = random_twist(rng)
        assert np.allclose(se3_exp(z), expm(hat(z)), atol=1e-12)


def test_pure_translation():
    T = se3_exp([0, 0, 0, 0.1, -0.2, 0.3])
    assert np.allclose(T[:3, 3], [0.1, -0.2, 0.3])
    assert np.array_equal(T[:3, :3], np.eye(3))


def test_quarter_turn_about_z():
    R = so3_exp([0, 0, np.pi / 2])
    assert np.allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(twists)
def test_exp_log_roundtrip_property(z):
    if np.linalg.norm(z[:3]) >= np.pi - 1e-3:
        return
    assert np.allclose(se3_log(se3_exp(z)), z, atol=1e-9)


def test_log_exp_roundtrip_random_poses(rng):
    for _ in range(50):
        T = se3_exp(random_twist(rng))
        assert np.allclose(se3_exp(se3_log(T)), T, atol=1e-12)


@pytest.mark.parametrize("angle", [1e-12, 1e-9, 1e-6, 1e-4, TAYLOR_CUTOFF * 0.999, TAYLOR_CUTOFF * 1.001, 0.1])
def test_small_angles_roundtrip(angle):
    z = np.array([angle, -angle / 2, angle / 3, 0.3, 0.1, -0.2])
    assert np.allclose(se3_log(se3_exp(z)), z, rtol=0, atol=1e-14)


@pytest.mark.parametrize("angle", [TAYLOR_CUTOFF, JR_TAYLOR_CUTOFF])
@pytest.mark.parametrize("side", [1 - 1e-9, 1 + 1e-9])
def test_both_sides_of_taylor_cutoffs_are_accurate(angle, side):
    axis = np.array([0.3, -0.4, 0.5]) / np.linalg.norm([0.3, -0.4, 0.5])
    z = np.r_[axis * angle * side, 1.0, 2.0, 3.0]
    assert np.linalg.norm(se3_exp(z) - expm(hat(z))) < 1e-14
    ad = ad_matrix(z)
    series = sum(np.linalg.matrix_power(-ad, k) / factorial(k + 1) for k in range(40))
    assert np.linalg.norm(se3_right_jacobian(z) - series) < 1e-14
    assert np.linalg.norm(se3_V(z[:3]) @ se3_V_inv(z[:3]) - np.eye(3)) < 1e-13


@pytest.mark.parametrize("axis", [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [-1, 2, 2]])
def test_log_at_pi(axis):
    a = np.asarray(axis, float) / np.linalg.norm(axis)
    R = so3_exp(np.pi * a)
    phi = so3_log(R)
    assert np.isclose(np.linalg.norm(phi), np.pi)
    assert np.allclose(so3_exp(phi), R, atol=1e-12)
    # representative: largest component positive
    assert phi[np.argmax(np.abs(phi))] > 0


def test_log_near_pi_keeps_sign():
    a = np.array([0.2, -0.7, 0.3])
    a /= np.linalg.norm(a)
    for d in (1e-7, 1e-5, 1e-3):
        phi = (np.pi - d) * a
        assert np.allclose(so3_log(so3_exp(phi)), phi, atol=1e-8)


def test_V_inverse(rng):
    for _ in range(20):
        phi = random_twist(rng)[:3]
        assert np.allclose(se3_V(phi) @ se3_V_inv(phi), np.eye(3), atol=1e-12)


def test_adjoint_identity(rng):
    T = se3_exp(random_twist(rng))
    z = rng.standard_normal(6)
    assert np.allclose(adjoint_matrix(T) @ z, vee(T @ hat(z) @ pose_inverse(T)), atol=1e-12)


def test_adjoint_homomorphism(rng):
    for _ in range(50):
        A, B = se3_exp(random_twist(rng)), se3_exp(random_twist(rng))
        assert np.linalg.norm(adjoint_matrix(A @ B) - adjoint_matrix(A) @ adjoint_matrix(B)) < 1e-10


def test_ad_is_lie_bracket(rng):
    a, b = rng.standard_normal((2, 6))
    assert np.allclose(ad_matrix(a) @ b, vee(hat(a) @ hat(b) - hat(b) @ hat(a)))


def test_right_jacobian_at_zero():
    assert np.array_equal(se3_right_jacobian(np.zeros(6)), np.eye(6))


def test_right_jacobian_series(rng):
    # J_r = sum_k (-ad)^k / (k+1)!
    z = 0.8 * random_twist(rng, 1.5)
    ad = ad_matrix(z)
    series = sum(np.linalg.matrix_power(-ad, k) / factorial(k + 1) for k in range(40))
    assert np.allclose(se3_right_jacobian(z), series, atol=1e-12)


def test_right_jacobian_pure_translation():
    z = np.array([0, 0, 0, 0.1, 0.2, 0.3])
    assert np.allclose(se3_right_jacobian(z), np.eye(6) - 0.5 * ad_matrix(z))


def test_right_jacobian_definition(rng):
    # exp(z + d) ~ exp(z) exp(J_r d)
    z = random_twist(rng, 2.0)
    d = 1e-7 * rng.standard_normal(6)
    lhs = se3_log(pose_inverse(se3_exp(z)) @ se3_exp(z + d))
    assert np.allclose(lhs, se3_right_jacobian(z) @ d, atol=1e-12)


def test_right_jacobian_inverse(rng):
    z = random_twist(rng)
    assert np.allclose(se3_right_jacobian(z) @ se3_right_jacobian_inv(z), np.eye(6), atol=1e-10)


def test_orthonormalize():
    R = so3_exp([0.3, 0.2, -0.1]) + 1e-6 * np.ones((3, 3))
    Q = orthonormalize(R)
    assert is_rotation(Q, 1e-12)
    assert np.linalg.norm(Q - R) < 1e-5
