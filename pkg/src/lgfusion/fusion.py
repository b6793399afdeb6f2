"""Correlation-aware fusion of group-valued estimates.

Given means ``X_1..X_n`` and the full joint covariance of their tangent
errors (cross blocks included), the fused mean minimizes the Mahalanobis
cost of the stacked errors ``log(X_i^-1 X)``. :func:`fuse` evaluates the
closed-form linearized minimizer about a reference member;
:func:`minimize_cost_oracle` minimizes the same cost numerically and exists
to check it.

Members may be 4x4 SE(3) poses (6-dim tangent), :class:`TargetState` values
(12-dim tangent) or plain vectors (Euclidean, ``J_r = I``); all members of
one input must be of the same kind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .liegroup import pose_inverse, se3_exp, se3_log, se3_right_jacobian
from .state import TargetState, state_between, state_exp, state_right_jacobian

PSD_FLOOR = 1e-12
MAX_CONDITION = 1e12


class DegenerateFusion(ValueError):
    """The joint covariance or the normal matrix cannot be inverted."""


@dataclass(frozen=True)
class _Group:
    dim: int
    between: Callable  # (a, b) -> log(a^-1 b)
    retract: Callable  # (a, d) -> a exp(d)
    jr: Callable


SE3 = _Group(
    6,
    lambda a, b: se3_log(pose_inverse(a) @ b),
    lambda a, d: a @ se3_exp(d),
    se3_right_jacobian,
)
STATE = _Group(12, state_between, lambda a, d: a @ state_exp(d), state_right_jacobian)


def _euclidean(n):
    return _Group(n, lambda a, b: b - a, lambda a, d: a + d, lambda d: np.eye(n))


def group_of(x) -> _Group:
    if isinstance(x, TargetState):
        return STATE
    x = np.asarray(x)
    if x.ndim == 1:
        return _euclidean(x.size)
    if x.shape != (4, 4):
        raise ValueError(f"cannot fuse members of shape {x.shape}")
    return SE3


@dataclass(frozen=True)
class FusionInput:
    means: Sequence
    joint_cov: np.ndarray

    def __post_init__(self):
        if len(self.means) == 0:
            raise ValueError("fusion needs at least one member")
        kinds = {(type(m).__name__, np.shape(m)) for m in self.means}
        if len(kinds) != 1:
            raise ValueError("members must all live in the same group")
        m = self.dim
        n = len(self.means)
        P = np.asarray(self.joint_cov, dtype=float)
        if P.shape != (n * m, n * m):
            raise ValueError(f"joint covariance must be {n * m}x{n * m}, got {P.shape}")
        object.__setattr__(self, "joint_cov", 0.5 * (P + P.T))

    @property
    def dim(self):
        return group_of(self.means[0]).dim

    @property
    def n(self):
        return len(self.means)

    def block(self, i, j):
        m = self.dim
        return self.joint_cov[i * m : (i + 1) * m, j * m : (j + 1) * m]

    def permuted(self, order):
        m = self.dim
        idx = np.concatenate([np.arange(k * m, (k + 1) * m) for k in order])
        return FusionInput([self.means[k] for k in order], self.joint_cov[np.ix_(idx, idx)])


@dataclass(frozen=True)
class FusedEstimate:
    mean: Union[np.ndarray, TargetState]
    cov: np.ndarray
    reference_index: int
    correction: np.ndarray
    iterations: int = 1


def repair_psd(M, floor=PSD_FLOOR):
    """Clamp the spectrum of a symmetric matrix from below at ``floor``."""
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    if w[0] >= floor:
        return M
    # reassembly perturbs eigenvalues by ~n eps |w|; clamp a little above the floor
    margin = 4 * M.shape[0] * np.finfo(float).eps * float(np.max(np.abs(w)))
    M = (V * np.maximum(w, floor + margin)) @ V.T
    return 0.5 * (M + M.T)


def scaled_condition(P):
    """Condition number after symmetric diagonal scaling to unit diagonal.

    This is what limits the accuracy of a Cholesky solve; a huge but
    uncorrelated block (an uninformed member) does not make it large.
    """
    d = 1.0 / np.sqrt(np.diag(P))
    w = np.linalg.eigvalsh(P * np.outer(d, d))
    return w[-1] / w[0]


def _information(joint_cov):
    P = repair_psd(joint_cov)
    cond = scaled_condition(P)
    if not cond <= MAX_CONDITION:
        raise DegenerateFusion(f"joint covariance condition number {cond:.2e} too large")
    c = cho_factor(P, lower=True)
    G = cho_solve(c, np.eye(P.shape[0]))
    return 0.5 * (G + G.T)


def _stacked_errors(candidate, inp: FusionInput):
    g = group_of(candidate)
    return np.concatenate([g.between(m, candidate) for m in inp.means])


def fusion_cost(candidate, inp: FusionInput, G=None):
    """Mahalanobis cost of ``candidate`` against every member."""
    if G is None:
        G = _information(inp.joint_cov)
    e = _stacked_errors(candidate, inp)
    return float(e @ G @ e)


def _reference(inp: FusionInput, policy):
    if isinstance(policy, (int, np.integer)):
        if not 0 <= policy < inp.n:
            raise IndexError(f"reference index {policy} out of range")
        return int(policy)
    if policy in ("min-trace", "min_trace", None):
        return int(np.argmin([np.trace(inp.block(i, i)) for i in range(inp.n)]))
    raise ValueError(f"unknown reference policy {policy!r}")


def _closed_form_step(ref, inp: FusionInput, G):
    g = group_of(ref)
    m, n = g.dim, inp.n
    zetas = [g.between(x, ref) for x in inp.means]
    jinv = [np.linalg.inv(g.jr(z)) for z in zetas]
    A = np.zeros((m, m))
    b = np.zeros(m)
    for i in range(n):
        for j in range(n):
            Gij = G[i * m : (i + 1) * m, j * m : (j + 1) * m]
            A += jinv[j].T @ Gij.T @ jinv[i] + jinv[i].T @ Gij @ jinv[j]
            b += jinv[j].T @ Gij.T @ zetas[i] + jinv[i].T @ Gij @ zetas[j]
    A = 0.5 * (A + A.T)
    try:
        c = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFusion("normal matrix is not positive definite") from exc
    return -cho_solve(c, b), cho_solve(c, np.eye(m))


def fuse(
    inp: FusionInput,
    reference="min-trace",
    normalization=2.0,
    iterate=False,
    max_iter=20,
    tol=1e-10,
) -> FusedEstimate:
    """Fuse correlated members.

    ``normalization`` scales the inverse normal matrix into the fused
    tangent covariance. The normal matrix counts every cross term twice, so
    2 gives the classical result (a single member fuses to itself); 1
    reproduces the unscaled expression. The fused mean does not depend on it.

    With ``iterate`` the reference is moved to the fused mean and the step
    repeated until the correction drops below ``tol``.
    """
    G = _information(inp.joint_cov)
    k = _reference(inp, reference)
    g = group_of(inp.means[k])
    ref = inp.means[k]
    delta, A_inv = _closed_form_step(ref, inp, G)
    iters = 1
    while iterate and np.linalg.norm(delta) >= tol and iters < max_iter:
        ref = g.retract(ref, delta)
        delta, A_inv = _closed_form_step(ref, inp, G)
        iters += 1
    mean = g.retract(ref, delta)
    Jr = g.jr(delta)
    cov = Jr @ (normalization * A_inv) @ Jr.T
    return FusedEstimate(mean, 0.5 * (cov + cov.T), k, delta, iters)


class OracleInconclusive(RuntimeError):
    pass


def _numeric_error_jacobian(x, inp, h=1e-6):
    g = group_of(x)
    cols = []
    for k in range(g.dim):
        d = np.zeros(g.dim)
        d[k] = h
        plus = _stacked_errors(g.retract(x, d), inp)
        minus = _stacked_errors(g.retract(x, -d), inp)
        cols.append((plus - minus) / (2 * h))
    return np.column_stack(cols)


def minimize_cost_oracle(inp: FusionInput, tol=1e-10, max_iter=200):
    """Brute-force minimizer of :func:`fusion_cost`.

    Gauss-Newton on the manifold with finite-difference Jacobians of the
    stacked errors, started from every member; the lowest-cost end point is
    returned.
    """
    G = _information(inp.joint_cov)
    best, best_cost = None, np.inf
    for start in inp.means:
        g = group_of(start)
        x = start
        converged = False
        last = np.inf
        for _ in range(max_iter):
            e = _stacked_errors(x, inp)
            J = _numeric_error_jacobian(x, inp)
            step = -np.linalg.solve(J.T @ G @ J, J.T @ G @ e)
            size = np.linalg.norm(step)
            # finite-difference noise puts a floor near 1e-11 on the step
            if size < tol or (size < 1e-8 and size >= last):
                converged = True
                break
            x = g.retract(x, step)
            last = size
        if not converged:
            continue
        c = fusion_cost(x, inp, G)
        if c < best_cost:
            best, best_cost = x, c
    if best is None:
        raise OracleInconclusive("Gauss-Newton did not converge from any start")
    return best


def tangent_distance(a, b):
    g = group_of(a)
    return float(np.linalg.norm(g.between(a, b)))
