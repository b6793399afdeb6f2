"""Adaptive extended Kalman filter on the target state group.

The estimate is a concentrated Gaussian ``X = X_bar @ state_exp(zeta)`` with
``zeta ~ N(0, P)`` in the 12-dimensional tangent space. The process model is
constant velocity driven by white acceleration noise; measurements are noisy
poses ``Z = T_BG @ se3_exp(m)``.

Process and measurement covariances are re-estimated every update with an
exponentially weighted moving average of the gain-mapped innovation and of
the post-update residual. Forgetting factors of 1 switch adaptation off.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import chi2

from .liegroup import pose_inverse, se3_log
from .state import (
    DIM,
    TargetState,
    state_adjoint,
    state_exp,
    state_right_jacobian,
)

log = logging.getLogger(__name__)

MEAS_DIM = 6
EIG_FLOOR = 1e-12
MAX_CONDITION = 1e12
H_MATRIX = np.hstack([np.eye(MEAS_DIM), np.zeros((MEAS_DIM, DIM - MEAS_DIM))])
H_MATRIX.flags.writeable = False
_EYE = np.eye(DIM)


class NumericalFailure(RuntimeError):
    """A covariance lost positive semi-definiteness or went non-finite."""


@dataclass(frozen=True)
class StateEstimate:
    mean: TargetState
    cov: np.ndarray


@dataclass(frozen=True)
class NoiseConfig:
    """Filter noise model.

    ``q`` is the continuous-time process covariance (12x12, only the velocity
    block is nonzero initially); one prediction over ``dt`` injects
    ``dt * q``. ``r`` is the 6x6 pose measurement covariance.
    """

    q: np.ndarray
    r: np.ndarray
    f_q: float = 1.0
    f_r: float = 1.0

    def __post_init__(self):
        for name in ("f_q", "f_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        q = np.array(self.q, dtype=float)
        r = np.array(self.r, dtype=float)
        if q.shape != (DIM, DIM) or r.shape != (MEAS_DIM, MEAS_DIM):
            raise ValueError(f"bad noise shapes q={q.shape} r={r.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_blocks(cls, q_nw, q_nv, r, f_q=1.0, f_r=1.0):
        q = np.zeros((DIM, DIM))
        q[6:9, 6:9] = q_nw
        q[9:12, 9:12] = q_nv
        return cls(q, r, f_q, f_r)


@dataclass(frozen=True)
class UpdateRecord:
    """Per-step quantities needed by adaptation and the cross-covariance.

    A record is produced on every step. When no measurement was consumed
    ``measured`` is False and ``gain`` is zero, so ``I - K H`` is the identity.
    """

    f_bar: np.ndarray
    f_matrix: np.ndarray
    q_d: np.ndarray
    dt: float
    p_prior: np.ndarray
    measured: bool = False
    gain: Optional[np.ndarray] = None
    innovation: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None
    s_matrix: Optional[np.ndarray] = None
    rejected: bool = False

    h_matrix = H_MATRIX

    @property
    def gain_or_zero(self):
        return self.gain if self.gain is not None else np.zeros((DIM, MEAS_DIM))

    @property
    def correction(self):
        """``K @ nu``, the tangent step applied to the prior mean."""
        if not self.measured:
            return np.zeros(DIM)
        return self.gain @ self.innovation


def condition_covariance(P, what="covariance"):
    """Symmetrize and floor the spectrum of ``P`` at ``EIG_FLOOR``."""
    P = 0.5 * (P + P.T)
    if not np.all(np.isfinite(P)):
        raise NumericalFailure(f"{what} has non-finite entries")
    # cheap path: a Cholesky of P - floor*I succeeds iff every eigenvalue is above the floor
    try:
        np.linalg.cholesky(P - EIG_FLOOR * (_EYE if P.shape == _EYE.shape else np.eye(P.shape[0])))
        return P
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(P)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w[0] < -1e-8 * scale:
        raise NumericalFailure(f"{what} is indefinite (min eigenvalue {w[0]:.3e})")
    if w[0] >= EIG_FLOOR:
        return P
    w = np.maximum(w, EIG_FLOOR)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


def process_vector(mean: TargetState, dt: float):
    """Discrete constant-velocity increment ``dt * f(X)``."""
    f = np.zeros(DIM)
    f[:3] = mean.omega
    f[3:6] = mean.vel
    return dt * f


def process_jacobian_d(dt: float):
    D = np.zeros((DIM, DIM))
    D[:6, 6:] = dt * np.eye(6)
    return D


def predict(est: StateEstimate, noise: NoiseConfig, dt: float):
    """Propagate one step; returns ``(prior, f_bar, F)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f_bar = process_vector(est.mean, dt)
    J = state_right_jacobian(f_bar)
    F = state_adjoint(state_exp(-f_bar)) + J @ process_jacobian_d(dt)
    q_d = dt * noise.q
    P = F @ est.cov @ F.T + J @ q_d @ J.T
    P = condition_covariance(P, "predicted covariance")
    return StateEstimate(est.mean @ state_exp(f_bar), P), f_bar, F


def innovation(mean: TargetState, z):
    return se3_log(pose_inverse(mean.pose) @ z)


def residual(posterior: StateEstimate, z):
    return innovation(posterior.mean, z)


def update(prior: StateEstimate, z, noise: NoiseConfig, gate: Optional[float] = None):
    """Pose measurement update.

    Returns ``(posterior, fields)`` where ``fields`` holds the gain,
    innovation, residual and innovation covariance, or ``None`` when the
    measurement was rejected (ill-conditioned S or failed gate) in which case
    the posterior is the prior.
    """
    P = prior.cov
    nu = innovation(prior.mean, z)
    S = P[:6, :6] + noise.r
    S = 0.5 * (S + S.T)
    if not np.all(np.isfinite(S)):
        raise NumericalFailure("innovation covariance has non-finite entries")
    w = np.linalg.eigvalsh(S)
    if w[0] <= 0 or w[-1] / w[0] > MAX_CONDITION:
        log.warning("innovation covariance ill-conditioned; measurement rejected")
        return prior, None
    if gate is not None and nu @ np.linalg.solve(S, nu) >= gate:
        return prior, None
    K = np.linalg.solve(S, P[:6, :]).T
    dx = K @ nu
    J = state_right_jacobian(dx)
    IKH = np.eye(DIM) - K @ H_MATRIX
    P_post = condition_covariance(J @ IKH @ P @ J.T, "updated covariance")
    post = StateEstimate(prior.mean @ state_exp(dx), P_post)
    fields = dict(gain=K, innovation=nu, residual=residual(post, z), s_matrix=S)
    return post, fields


def adapt_noise(noise: NoiseConfig, rec: UpdateRecord, P_prior=None) -> NoiseConfig:
    """EWMA update of Q and R from one completed measurement update.

    ``K nu nu^T K^T`` estimates the per-step (discrete) process covariance, so
    it is divided by ``dt`` before being blended into the continuous ``q``.
    """
    if not rec.measured:
        return noise
    P_prior = rec.p_prior if P_prior is None else P_prior
    q, r = noise.q, noise.r
    if noise.f_q != 1.0:
        dx = rec.gain @ rec.innovation
        q = noise.f_q * q + (1.0 - noise.f_q) * np.outer(dx, dx) / rec.dt
        q = 0.5 * (q + q.T)
    if noise.f_r != 1.0:
        mu = rec.residual
        r = noise.f_r * r + (1.0 - noise.f_r) * (np.outer(mu, mu) + P_prior[:6, :6])
        r = 0.5 * (r + r.T)
    return replace(noise, q=q, r=r)


def step(est: StateEstimate, noise: NoiseConfig, dt: float, z=None, adapt=True, gate=None):
    """Predict, then update and adapt when a measurement is present.

    Without a measurement the posterior is the prior and the noise model is
    left unchanged. Returns ``(posterior, noise, record)``.
    """
    prior, f_bar, F = predict(est, noise, dt)
    base = dict(f_bar=f_bar, f_matrix=F, q_d=dt * noise.q, dt=dt, p_prior=prior.cov)
    if z is None:
        return prior, noise, UpdateRecord(**base)
    post, fields = update(prior, z, noise, gate=gate)
    if fields is None:
        return prior, noise, UpdateRecord(**base, rejected=True)
    rec = UpdateRecord(**base, measured=True, **fields)
    if adapt:
        noise = adapt_noise(noise, rec)
    return post, noise, rec


def chi2_gate(prob=0.999):
    return float(chi2.ppf(prob, MEAS_DIM))
