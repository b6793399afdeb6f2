"""SO(3) and SE(3) primitives.

Conventions used throughout the package:

* A pose is a 4x4 homogeneous matrix ``[[R, p], [0, 1]]``.
* A twist is a 6-vector ``[phi; rho]`` with the rotational block first.
* ``se3_exp`` / ``se3_log`` map between twists and poses; perturbations are
  applied on the right, ``T = T_bar @ se3_exp(zeta)``.

Every function is pure and returns fresh arrays.
"""

from __future__ import annotations

import math

import numpy as np

# Below EPS the exact-zero branch is taken; below the Taylor cutoffs the
# trigonometric coefficients are evaluated from their power series to avoid
# cancellation in the closed forms. The right-Jacobian coefficients cancel
# harder (numerators of order a^5), hence their larger cutoff.
EPS = 1e-8
PI_DELTA = 1e-6
TAYLOR_CUTOFF = 0.1
JR_TAYLOR_CUTOFF = 0.5

_I3 = np.eye(3)
_I6 = np.eye(6)


def skew(v):
    """Cross-product matrix, ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew(m):
    """Inverse of :func:`skew`; reads the antisymmetric part of ``m``."""
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def hat(zeta):
    """Twist 6-vector -> 4x4 element of se(3)."""
    zeta = np.asarray(zeta, dtype=float)
    out = np.zeros((4, 4))
    out[:3, :3] = skew(zeta[:3])
    out[:3, 3] = zeta[3:]
    return out


def vee(xi):
    """4x4 element of se(3) -> twist 6-vector."""
    return np.concatenate([unskew(xi[:3, :3]), xi[:3, 3]])


def make_pose(rotation=None, translation=None):
    T = np.eye(4)
    if rotation is not None:
        T[:3, :3] = rotation
    if translation is not None:
        T[:3, 3] = translation
    return T


def pose_inverse(T):
    R = T[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ T[:3, 3]
    return out


def orthonormalize(R):
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)."""
    u, _, vt = np.linalg.svd(R)
    Q = u @ vt
    if np.linalg.det(Q) < 0:
        u[:, -1] *= -1
        Q = u @ vt
    return Q


def is_rotation(R, tol=1e-9):
    R = np.asarray(R)
    return (
        R.shape == (3, 3)
        and np.linalg.norm(R @ R.T - _I3) < tol
        and abs(np.linalg.det(R) - 1.0) < tol
    )


def _series(x, coeffs):
    """``sum_k coeffs[k] * x**k`` by Horner's rule."""
    out = 0.0
    for c in reversed(coeffs):
        out = out * x + c
    return out


# power series in a^2
_SINC = (1.0, -1 / 6, 1 / 120, -1 / 5040, 1 / 362880)
_COSC = (1 / 2, -1 / 24, 1 / 720, -1 / 40320, 1 / 3628800)
_SINC3 = (1 / 6, -1 / 120, 1 / 5040, -1 / 362880, 1 / 39916800)
_LOGC = (1.0, 1 / 6, 7 / 360, 31 / 15120, 127 / 604800)
_VINVC = (1 / 12, 1 / 720, 1 / 30240, 1 / 1209600, 1 / 47900160)
_JR1 = (1 / 2, 0.0, -1 / 720, 1 / 20160, -1 / 1209600, 1 / 119750400, -1 / 17435658240)
_JR2 = (1 / 6, 0.0, -1 / 5040, 1 / 181440, -1 / 13305600, 1 / 1556755200, -1 / 261534873600)
_JR3 = (1 / 24, -1 / 360, 1 / 13440, -1 / 907200, 1 / 95800320, -1 / 14529715200, 1 / 2988969984000)
_JR4 = (1 / 120, -1 / 2520, 1 / 120960, -1 / 9979200, 1 / 1245404160, -1 / 217945728000, 1 / 50812489728000)


def _so3_coeffs(angle):
    """Return sin(a)/a, (1-cos a)/a^2, (a-sin a)/a^3."""
    if angle < TAYLOR_CUTOFF:
        a2 = angle * angle
        return _series(a2, _SINC), _series(a2, _COSC), _series(a2, _SINC3)
    s, c = math.sin(angle), math.cos(angle)
    return s / angle, (1.0 - c) / angle**2, (angle - s) / angle**3


def so3_exp(phi):
    """Rodrigues formula."""
    phi = np.asarray(phi, dtype=float)
    angle = math.sqrt(phi @ phi)
    if angle <= EPS:
        K = skew(phi)
        return _I3 + K + 0.5 * (K @ K)
    a, b, _ = _so3_coeffs(angle)
    K = skew(phi)
    return _I3 + a * K + b * (K @ K)


def _pi_axis(R, psi):
    # symmetric part of R is cos(psi) I + (1 - cos psi) a a^T
    B = (0.5 * (R + R.T) - np.cos(psi) * _I3) / (1.0 - np.cos(psi))
    i = int(np.argmax(np.diag(B)))
    axis = B[:, i] / np.sqrt(max(B[i, i], 0.0))
    axis /= np.linalg.norm(axis)
    # antisymmetric part still carries the sign when psi is not exactly pi
    w = unskew(R)
    if np.linalg.norm(w) > 1e-12:
        if axis @ w < 0:
            axis = -axis
    elif axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    return axis


def so3_log(R):
    """Rotation vector of ``R`` with angle in [0, pi].

    At an angle of exactly pi the axis is ambiguous; the representative whose
    largest-magnitude component is positive is returned.
    """
    R = np.asarray(R, dtype=float)
    w = unskew(R)
    psi = math.atan2(math.sqrt(w @ w), 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0))
    if psi < TAYLOR_CUTOFF:
        # series of psi / sin(psi)
        return _series(psi * psi, _LOGC) * w
    if psi > np.pi - PI_DELTA:
        return psi * _pi_axis(R, psi)
    return psi / math.sin(psi) * w


def se3_V(phi):
    """Left Jacobian of SO(3); maps rho to the translation of ``se3_exp``."""
    phi = np.asarray(phi, dtype=float)
    angle = math.sqrt(phi @ phi)
    K = skew(phi)
    if angle <= EPS:
        return _I3 + 0.5 * K + (K @ K) / 6.0
    _, b, c = _so3_coeffs(angle)
    return _I3 + b * K + c * (K @ K)


def se3_V_inv(phi):
    phi = np.asarray(phi, dtype=float)
    angle = math.sqrt(phi @ phi)
    K = skew(phi)
    if angle < TAYLOR_CUTOFF:
        coef = _series(angle * angle, _VINVC)
    else:
        coef = (1.0 - angle * math.sin(angle) / (2.0 * (1.0 - math.cos(angle)))) / angle**2
    return _I3 - 0.5 * K + coef * (K @ K)


def se3_exp(zeta):
    zeta = np.asarray(zeta, dtype=float)
    T = np.eye(4)
    phi = zeta[:3]
    angle = math.sqrt(phi @ phi)
    K = skew(phi)
    K2 = K @ K
    if angle <= EPS:
        T[:3, :3] = _I3 + K + 0.5 * K2
        T[:3, 3] = zeta[3:] + 0.5 * (K @ zeta[3:]) + (K2 @ zeta[3:]) / 6.0
        return T
    a, b, c = _so3_coeffs(angle)
    T[:3, :3] = _I3 + a * K + b * K2
    T[:3, 3] = zeta[3:] + b * (K @ zeta[3:]) + c * (K2 @ zeta[3:])
    return T


def se3_log(T):
    phi = so3_log(T[:3, :3])
    return np.concatenate([phi, se3_V_inv(phi) @ T[:3, 3]])


def adjoint_matrix(T):
    """6x6 Adjoint, ``Ad_T @ zeta == vee(T @ hat(zeta) @ inv(T))``."""
    R = T[:3, :3]
    out = np.zeros((6, 6))
    out[:3, :3] = R
    out[3:, :3] = skew(T[:3, 3]) @ R
    out[3:, 3:] = R
    return out


def ad_matrix(zeta):
    """6x6 adjoint of se(3), ``ad(a) @ b == vee(hat(a) hat(b) - hat(b) hat(a))``."""
    zeta = np.asarray(zeta, dtype=float)
    P = skew(zeta[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = P
    out[3:, :3] = skew(zeta[3:])
    out[3:, 3:] = P
    return out


def _jr_coeffs(angle):
    if angle < JR_TAYLOR_CUTOFF:
        a2 = angle * angle
        return tuple(_series(a2, c) for c in (_JR1, _JR2, _JR3, _JR4))
    s, c = math.sin(angle), math.cos(angle)
    return (
        (4.0 - angle * s - 4.0 * c) / (2.0 * angle**2),
        (4.0 * angle - 5.0 * s + angle * c) / (2.0 * angle**3),
        (2.0 - angle * s - 2.0 * c) / (2.0 * angle**4),
        (2.0 * angle - 3.0 * s + angle * c) / (2.0 * angle**5),
    )


def se3_right_jacobian(zeta):
    """Right Jacobian of SE(3), equal to sum_k (-ad zeta)^k / (k+1)!.

    At zero rotation the series terminates at ``I - ad/2`` because ``ad`` is
    nilpotent there.
    """
    zeta = np.asarray(zeta, dtype=float)
    angle = math.sqrt(zeta[:3] @ zeta[:3])
    ad = ad_matrix(zeta)
    if angle <= EPS:
        ad2 = ad @ ad
        return _I6 - 0.5 * ad + ad2 / 6.0 - (ad2 @ ad) / 24.0
    c1, c2, c3, c4 = _jr_coeffs(angle)
    ad2 = ad @ ad
    ad3 = ad2 @ ad
    return _I6 - c1 * ad + c2 * ad2 - c3 * ad3 + c4 * (ad3 @ ad)


def se3_right_jacobian_inv(zeta):
    return np.linalg.inv(se3_right_jacobian(zeta))
