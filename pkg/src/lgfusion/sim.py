"""Ground truth, pseudo-pose measurements and availability schedules.

Randomness comes from a Philox counter-based generator. The run seed is
expanded with :class:`numpy.random.SeedSequence` into one independent child
stream per noise source, in the fixed order of :data:`STREAMS`, so adding or
removing draws in one source never shifts another.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kinematics import (
    ExtrinsicSet,
    KinematicChain,
    base_pseudo_pose,
    base_tag_observation,
    hand_pseudo_pose,
    hand_tag_observation,
    poe_forward,
    synthetic_six_dof_chain,
)
from .liegroup import se3_exp
from .state import DIM, TargetState, state_exp

SOURCES = ("hand", "base")
STREAMS = ("truth", "hand", "base", "avail_hand", "avail_base", "init_hand", "init_base")


def make_streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(c)) for name, c in zip(STREAMS, children)}


def cov_sqrt(C):
    """Lower-triangular square root; falls back to a symmetric root when
    ``C`` is only semi-definite."""
    C = np.asarray(C, dtype=float)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (C + C.T))
        return V * np.sqrt(np.clip(w, 0.0, None))


def sample_gaussian(C, rng: np.random.Generator):
    C = np.asarray(C, dtype=float)
    return cov_sqrt(C) @ rng.standard_normal(C.shape[0])


@dataclass(frozen=True)
class Availability:
    """Which steps deliver a measurement.

    ``kind`` is ``"always"``, ``"bernoulli"`` (independent draw with
    probability ``rate`` per step) or ``"mask"`` (explicit replay, one entry
    per step starting at step 1).
    """

    kind: str = "always"
    rate: float = 1.0
    mask: Optional[Tuple[bool, ...]] = None

    def __post_init__(self):
        if self.kind not in ("always", "bernoulli", "mask"):
            raise ValueError(f"unknown availability kind {self.kind!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"availability rate must lie in [0, 1], got {self.rate}")
        if self.kind == "mask" and self.mask is None:
            raise ValueError("mask availability needs a mask")

    @classmethod
    def from_file(cls, path):
        """Read a mask from a text/CSV file of 0/1 values (one per line or
        comma separated)."""
        text = Path(path).read_text().replace(",", " ").split()
        return cls("mask", mask=tuple(bool(int(float(t))) for t in text))


def availability_schedule(model: Availability, steps: int, rng: np.random.Generator):
    """Boolean mask of length ``steps + 1``; index 0 (the initial time) is
    always False."""
    # one uniform per step is consumed whatever the model, keeping streams aligned
    u = rng.random(steps)
    if model.kind == "always":
        live = np.ones(steps, dtype=bool)
    elif model.kind == "bernoulli":
        live = u < model.rate
    else:
        m = np.asarray(model.mask, dtype=bool)
        if m.size < steps:
            raise ValueError(f"availability mask has {m.size} entries, need {steps}")
        live = m[:steps].copy()
    return np.concatenate([[False], live])


@dataclass(frozen=True)
class BurstNoise:
    """Measurement-noise inflation over step windows ``[start, stop)``.

    Stand-in for the detection disturbances caused by arm accelerations.
    """

    windows: Tuple[Tuple[int, int], ...] = ()
    factor: float = 10.0
    sources: Tuple[str, ...] = ("hand",)

    def scale(self, source: str, step: int) -> float:
        if source not in self.sources:
            return 1.0
        for a, b in self.windows:
            if a <= step < b:
                return self.factor
        return 1.0


@dataclass(frozen=True)
class ArmMotion:
    """Joint trajectory ``theta0 + amplitude * sin(2 pi t / period)``."""

    theta0: Tuple[float, ...] = (0.0, -0.3, -0.6, 0.0, 0.9, 0.0)
    amplitude: Tuple[float, ...] = (0.0,) * 6
    period: float = 20.0

    def angles(self, t: float):
        return np.asarray(self.theta0) + np.asarray(self.amplitude) * np.sin(2 * np.pi * t / self.period)


@dataclass(frozen=True)
class ScenarioConfig:
    dt: float
    steps: int
    initial_state: TargetState
    q_nw: np.ndarray
    q_nv: np.ndarray
    r_true_hand: np.ndarray
    r_true_base: np.ndarray
    avail_hand: Availability = Availability()
    avail_base: Availability = Availability()
    seed: int = 0
    burst: BurstNoise = BurstNoise()
    chain: KinematicChain = field(default_factory=synthetic_six_dof_chain)
    extrinsics: ExtrinsicSet = field(default_factory=ExtrinsicSet)
    arm: ArmMotion = ArmMotion()

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.steps) <= 0:
            raise ValueError("steps must be positive")
        for name in ("q_nw", "q_nv", "r_true_hand", "r_true_base"):
            M = np.array(getattr(self, name), dtype=float)
            if not np.allclose(M, M.T) or np.linalg.eigvalsh(0.5 * (M + M.T))[0] < -1e-12:
                raise ValueError(f"{name} must be symmetric positive semi-definite")
            object.__setattr__(self, name, M)

    @property
    def process_cov(self):
        """12x12 continuous process covariance (velocity block only)."""
        Q = np.zeros((DIM, DIM))
        Q[6:9, 6:9] = self.q_nw
        Q[9:12, 9:12] = self.q_nv
        return Q

    def r_true(self, source):
        return self.r_true_hand if source == "hand" else self.r_true_base

    def availability(self, source):
        return self.avail_hand if source == "hand" else self.avail_base


@dataclass(frozen=True)
class MeasurementEvent:
    step: int
    source: str
    pose: np.ndarray


def simulate_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> List[TargetState]:
    """Noisy constant-velocity trajectory, ``steps + 1`` states."""
    Q = cfg.process_cov
    L = cov_sqrt(Q[6:, 6:])
    X = cfg.initial_state
    out = [X]
    sq = np.sqrt(cfg.dt)
    for _ in range(cfg.steps):
        xi = np.zeros(DIM)
        xi[:3] = cfg.dt * X.omega
        xi[3:6] = cfg.dt * X.vel
        xi[6:] = sq * (L @ rng.standard_normal(6))
        X = X @ state_exp(xi)
        out.append(X)
    return out


def synthesize_measurement(truth_pose, r_true, rng: np.random.Generator):
    """``truth_pose @ exp(m)`` with ``m ~ N(0, r_true)``."""
    return truth_pose @ se3_exp(sample_gaussian(r_true, rng))


@dataclass
class ScenarioData:
    cfg: ScenarioConfig
    truth: List[TargetState]
    events: List[MeasurementEvent]
    masks: Dict[str, np.ndarray]
    init_errors: Dict[str, np.ndarray]
    joint_angles: np.ndarray

    @property
    def times(self):
        return self.cfg.dt * np.arange(self.cfg.steps + 1)

    def measurements(self, source) -> Dict[int, np.ndarray]:
        return {e.step: e.pose for e in self.events if e.source == source}


def simulate(cfg: ScenarioConfig, p0=None) -> ScenarioData:
    """Full scenario: truth, per-source pseudo-pose events and the initial
    estimation errors of the two filters (drawn from ``p0`` when given)."""
    streams = make_streams(cfg.seed)
    truth = simulate_truth(cfg, streams["truth"])
    masks = {s: availability_schedule(cfg.availability(s), cfg.steps, streams["avail_" + s]) for s in SOURCES}
    angles = np.array([cfg.arm.angles(k * cfg.dt) for k in range(cfg.steps + 1)])
    events = []
    for k in range(1, cfg.steps + 1):
        t_bg = truth[k].pose
        for source in SOURCES:
            # noise is drawn at every step so the streams do not depend on the masks
            R = cfg.r_true(source) * cfg.burst.scale(source, k)
            noisy = synthesize_measurement(t_bg, R, streams[source])
            if not masks[source][k]:
                continue
            if source == "hand":
                t_be = poe_forward(cfg.chain, angles[k])
                tag = hand_tag_observation(t_be, cfg.extrinsics, noisy)
                z = hand_pseudo_pose(t_be, cfg.extrinsics, tag)
            else:
                tag = base_tag_observation(cfg.extrinsics, noisy)
                z = base_pseudo_pose(cfg.extrinsics, tag)
            events.append(MeasurementEvent(k, source, z))
    init = {}
    for source in SOURCES:
        rng = streams["init_" + source]
        init[source] = np.zeros(DIM) if p0 is None else sample_gaussian(p0, rng)
    return ScenarioData(cfg, truth, events, masks, init, angles)


LOG_HEADER = ["step", "time", "source"] + [f"T{i}{j}" for i in range(3) for j in range(4)]


def _fmt(x):
    return format(float(x), ".17g")


def write_measurement_log(path, events: Sequence[MeasurementEvent], dt: float):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for e in events:
            w.writerow([e.step, _fmt(e.step * dt), e.source] + [_fmt(v) for v in e.pose[:3, :].ravel()])


def read_measurement_log(path) -> List[MeasurementEvent]:
    events = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["source"] not in SOURCES:
                raise ValueError(f"unknown measurement source {row['source']!r}")
            T = np.eye(4)
            T[:3, :] = np.array([float(row[h]) for h in LOG_HEADER[3:]]).reshape(3, 4)
            events.append(MeasurementEvent(int(row["step"]), row["source"], T))
    return events
