"""Cross-covariance between the base and hand filters.

Both filters track the same target, so they share its process noise and
their estimation errors are correlated even though their measurements are
independent. The recursion starts from zero and is driven by the per-step
records of the two filters.
"""

from __future__ import annotations

import numpy as np

from .aekf import H_MATRIX, UpdateRecord
from .state import DIM, state_right_jacobian


def initial_cross_covariance():
    return np.zeros((DIM, DIM))


def _i_minus_kh(rec: UpdateRecord):
    if not rec.measured:
        return np.eye(DIM)
    return np.eye(DIM) - rec.gain @ H_MATRIX


def _psd_sqrt(Q):
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def shared_process_noise(rec_b: UpdateRecord, rec_h: UpdateRecord):
    """Cross-covariance of the two filters' modeled process noise.

    With a common Q this is Q itself. Once adaptation makes the filters' Q
    differ, ``sqrt(Q_b) @ sqrt(Q_h)`` is used: it reduces to Q when they agree
    and keeps ``[[Q_b, C], [C^T, Q_h]]`` positive semi-definite, which the
    plain average does not.
    """
    if rec_b.q_d is rec_h.q_d or np.array_equal(rec_b.q_d, rec_h.q_d):
        return rec_b.q_d
    return _psd_sqrt(rec_b.q_d) @ _psd_sqrt(rec_h.q_d)


def propagate_and_update(xcov, rec_b: UpdateRecord, rec_h: UpdateRecord, q_d=None):
    """One step of the P_bh recursion.

    ``P_bh <- (I - K_b H)(F_b P_bh F_h^T + J_b Q_d J_h^T)(I - K_h H)^T`` with
    ``J_x = J_r(f_bar_x)``. A filter that skipped its update contributes an
    identity factor.
    """
    xcov = np.asarray(xcov, dtype=float)
    if xcov.shape != (DIM, DIM):
        raise ValueError(f"cross-covariance must be {DIM}x{DIM}, got {xcov.shape}")
    for rec in (rec_b, rec_h):
        if rec.f_matrix.shape != (DIM, DIM):
            raise ValueError("record F matrix has the wrong shape")
    if q_d is None:
        q_d = shared_process_noise(rec_b, rec_h)
    J_b = state_right_jacobian(rec_b.f_bar)
    J_h = state_right_jacobian(rec_h.f_bar)
    prop = rec_b.f_matrix @ xcov @ rec_h.f_matrix.T + J_b @ q_d @ J_h.T
    return _i_minus_kh(rec_b) @ prop @ _i_minus_kh(rec_h).T


def joint_covariance(P_a, P_b, P_ab):
    return np.block([[P_a, P_ab], [P_ab.T, P_b]])
