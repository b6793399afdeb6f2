"""Random fusion instances and the closed-form vs brute-force cross-check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import FusionInput, fuse, minimize_cost_oracle, tangent_distance
from .liegroup import se3_exp
from .sim import sample_gaussian


def random_spd(n, rng, scale=1.0, min_eig=0.05):
    A = rng.standard_normal((n, n))
    w = rng.uniform(min_eig, 1.0, n)
    Q, _ = np.linalg.qr(A)
    return scale * (Q * w) @ Q.T


def random_two_member_instance(rng: np.random.Generator, sigma=0.05, correlation=0.5):
    """Two correlated SE(3) estimates of a random pose.

    The 12x12 joint covariance has blocks of size ``sigma**2`` and cross
    blocks scaled by ``correlation``; the members are drawn from it so the
    stacked errors are consistent with the covariance.
    """
    center = se3_exp(np.concatenate([rng.uniform(-np.pi, np.pi, 3) * 0.9, rng.uniform(-1, 1, 3)]))
    P1 = random_spd(6, rng, sigma**2)
    P2 = random_spd(6, rng, sigma**2)
    L1, L2 = np.linalg.cholesky(P1), np.linalg.cholesky(P2)
    C = correlation * L1 @ L2.T
    joint = np.block([[P1, C], [C.T, P2]])
    e = sample_gaussian(joint, rng)
    means = [center @ se3_exp(-e[:6]), center @ se3_exp(-e[6:])]
    return FusionInput(means, joint)


@dataclass
class OracleRow:
    index: int
    single_step: float
    iterated: float
    iterations: int


def oracle_suite(n=100, sigma=0.05, seed=0, correlation=0.5):
    """Distances from the closed form (single step and iterated) to the
    numerical minimizer on ``n`` random instances."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    rows = []
    for i in range(n):
        inp = random_two_member_instance(rng, sigma, correlation)
        best = minimize_cost_oracle(inp)
        one = fuse(inp)
        it = fuse(inp, iterate=True)
        rows.append(
            OracleRow(i, tangent_distance(one.mean, best), tangent_distance(it.mean, best), it.iterations)
        )
    return rows
