"""The target state group SE(3) x R^3 x R^3.

A state holds the pose ``T_BG`` together with the body angular velocity and
the linear velocity. Tangent vectors are 12-dimensional, ordered
``[phi, rho, d_omega, d_vel]``. The velocity factor is abelian, so its
exponential is plain addition.

Some interfaces write tangent vectors in a padded 15-dimensional layout
``[phi, rho, 0, 0, 0, d_omega, d_vel]``; :func:`pad` and
:func:`unpad` convert losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .liegroup import (
    adjoint_matrix,
    pose_inverse,
    se3_exp,
    se3_log,
    se3_right_jacobian,
)

DIM = 12
PADDED_DIM = 15
_DEAD = slice(6, 9)


@dataclass(frozen=True)
class TargetState:
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "pose", np.array(self.pose, dtype=float))
        object.__setattr__(self, "omega", np.array(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "vel", np.array(self.vel, dtype=float).reshape(3))

    @property
    def velocity6(self):
        return np.concatenate([self.omega, self.vel])

    def compose(self, other: "TargetState") -> "TargetState":
        return TargetState(self.pose @ other.pose, self.omega + other.omega, self.vel + other.vel)

    def inverse(self) -> "TargetState":
        return TargetState(pose_inverse(self.pose), -self.omega, -self.vel)

    def __matmul__(self, other):
        return self.compose(other)

    def as_matrix(self):
        """9x9 block embedding: the pose block and the 5x5 velocity block."""
        X = np.zeros((9, 9))
        X[:4, :4] = self.pose
        X[4:, 4:] = np.eye(5)
        X[4:7, 7] = self.omega
        X[4:7, 8] = self.vel
        return X

    @classmethod
    def from_matrix(cls, X):
        X = np.asarray(X, dtype=float)
        return cls(X[:4, :4], X[4:7, 7], X[4:7, 8])


def state_exp(xi) -> TargetState:
    xi = np.asarray(xi, dtype=float)
    return TargetState(se3_exp(xi[:6]), xi[6:9].copy(), xi[9:12].copy())


def state_log(X: TargetState):
    return np.concatenate([se3_log(X.pose), X.omega, X.vel])


def state_between(a: TargetState, b: TargetState):
    """Tangent ``log(a^-1 b)``."""
    return state_log(a.inverse() @ b)


def state_adjoint(X: TargetState):
    out = np.eye(DIM)
    out[:6, :6] = adjoint_matrix(X.pose)
    return out


def state_right_jacobian(xi):
    out = np.eye(DIM)
    out[:6, :6] = se3_right_jacobian(np.asarray(xi, dtype=float)[:6])
    return out


def pad(xi):
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(PADDED_DIM)
    out[:6] = xi[:6]
    out[9:] = xi[6:]
    return out


def unpad(v, tol=1e-12):
    v = np.asarray(v, dtype=float)
    if v.shape != (PADDED_DIM,):
        raise ValueError(f"expected a {PADDED_DIM}-vector, got shape {v.shape}")
    if np.any(np.abs(v[_DEAD]) > tol):
        raise ValueError("padded tangent has nonzero entries in components 7-9")
    return np.concatenate([v[:6], v[9:]])


_KEEP = np.r_[0:6, 9:15]


def pad_covariance(P):
    P = np.asarray(P, dtype=float)
    out = np.zeros((PADDED_DIM, PADDED_DIM))
    out[np.ix_(_KEEP, _KEEP)] = P
    return out


def unpad_covariance(P, tol=None):
    """Drop rows/columns 7-9 of a padded covariance.

    With ``tol`` given, those rows and columns must be zero up to ``tol``.
    Diagonal-only entries such as the ``1e-2 * I15`` initial covariance are
    accepted when ``tol`` is None.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (PADDED_DIM, PADDED_DIM):
        raise ValueError(f"expected {PADDED_DIM}x{PADDED_DIM}, got {P.shape}")
    if tol is not None and (np.any(np.abs(P[_DEAD, :]) > tol) or np.any(np.abs(P[:, _DEAD]) > tol)):
        raise ValueError("padded covariance has nonzero rows/columns 7-9")
    return P[np.ix_(_KEEP, _KEEP)].copy()
