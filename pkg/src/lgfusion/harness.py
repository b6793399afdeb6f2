"""Decentralized dual-camera estimation runs.

Each tick both filters predict and, when their camera delivered a
pseudo-pose, update and adapt. The cross-covariance recursion then consumes
both step records and the two estimates are fused with the full joint
covariance. A switching baseline (one filter fed by whichever camera is
available) and a forgetting-factor study are run on the same simulated data.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .aekf import NoiseConfig, NumericalFailure, StateEstimate, step
from .crosscov import initial_cross_covariance, joint_covariance, propagate_and_update
from .fusion import DegenerateFusion, FusionInput, fuse
from .liegroup import pose_inverse, se3_log, so3_log
from .sim import SOURCES, ScenarioConfig, ScenarioData, simulate
from .state import TargetState, state_exp

log = logging.getLogger(__name__)


class RunAborted(NumericalFailure):
    """A numerical failure inside a run, tagged with the step it happened at."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class FusionOptions:
    normalization: float = 2.0
    reference: object = "min-trace"
    iterate: bool = False


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig
    filter_noise_hand: NoiseConfig
    filter_noise_base: NoiseConfig
    p0: np.ndarray
    fusion: FusionOptions = FusionOptions()
    baseline: str = "fusion"
    switch_preference: str = "base-first"
    gate: Optional[float] = None
    output_dir: Optional[str] = None
    name: str = "run"

    def __post_init__(self):
        if self.baseline not in ("fusion", "switching"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.switch_preference not in ("base-first", "hand-first"):
            raise ValueError(f"unknown switch preference {self.switch_preference!r}")

    def with_seed(self, seed):
        return replace(self, scenario=replace(self.scenario, seed=int(seed)))

    def with_forgetting(self, f_q, f_r):
        return replace(
            self,
            filter_noise_hand=replace(self.filter_noise_hand, f_q=f_q, f_r=f_r),
            filter_noise_base=replace(self.filter_noise_base, f_q=f_q, f_r=f_r),
        )


@dataclass
class Track:
    means: List[TargetState] = field(default_factory=list)
    covs: List[Optional[np.ndarray]] = field(default_factory=list)

    def append(self, mean, cov=None):
        self.means.append(mean)
        self.covs.append(cov)

    def velocities(self):
        return np.array([m.vel for m in self.means])

    def positions(self):
        return np.array([m.pose[:3, 3] for m in self.means])


@dataclass
class RunMetrics:
    rmse_pos: float
    rmse_rot: float
    rmse_vel: float
    rmse_angvel: float
    nees_pose: np.ndarray
    nees_mean: float
    nees_skipped: int
    update_rates: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d.pop("nees_pose")
        return d


def compute_metrics(means, truths, covs=None, update_rates=None) -> RunMetrics:
    """RMSEs and pose NEES of ``means`` against ``truths``.

    The NEES error is the pose block of ``log(mean^-1 truth)`` weighted by the
    pose block of the covariance; steps with a missing or singular covariance
    are skipped and counted.
    """
    if len(means) != len(truths):
        raise ValueError(f"{len(means)} estimates vs {len(truths)} truth states")
    n = len(means)
    dp = np.array([m.pose[:3, 3] - t.pose[:3, 3] for m, t in zip(means, truths)])
    drot = np.array([np.linalg.norm(so3_log(m.pose[:3, :3].T @ t.pose[:3, :3])) for m, t in zip(means, truths)])
    dv = np.array([m.vel - t.vel for m, t in zip(means, truths)])
    dw = np.array([m.omega - t.omega for m, t in zip(means, truths)])
    nees = np.full(n, np.nan)
    skipped = 0
    if covs is not None:
        for k, (m, t, P) in enumerate(zip(means, truths, covs)):
            if P is None:
                skipped += 1
                continue
            e = se3_log(pose_inverse(m.pose) @ t.pose)
            try:
                nees[k] = e @ np.linalg.solve(P[:6, :6], e)
            except np.linalg.LinAlgError:
                skipped += 1
    else:
        skipped = n
    finite = nees[np.isfinite(nees)]
    return RunMetrics(
        rmse_pos=float(np.sqrt(np.mean(np.sum(dp**2, axis=1)))),
        rmse_rot=float(np.sqrt(np.mean(drot**2))),
        rmse_vel=float(np.sqrt(np.mean(np.sum(dv**2, axis=1)))),
        rmse_angvel=float(np.sqrt(np.mean(np.sum(dw**2, axis=1)))),
        nees_pose=nees,
        nees_mean=float(np.mean(finite)) if finite.size else float("nan"),
        nees_skipped=skipped,
        update_rates=dict(update_rates or {}),
    )


@dataclass
class RunResult:
    tracks: Dict[str, Track]
    metrics: Dict[str, RunMetrics]
    counts: Dict[str, Dict[str, int]]
    data: ScenarioData
    cross_covs: List[np.ndarray] = field(default_factory=list)
    noise: Dict[str, NoiseConfig] = field(default_factory=dict)

    def summary(self):
        return {
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
            "counts": self.counts,
        }


def _initial_estimate(data: ScenarioData, source, p0):
    # replayed logs carry no truth; the filters then start at the configured state
    x0 = data.truth[0] if data.truth else data.cfg.initial_state
    return StateEstimate(x0 @ state_exp(-data.init_errors[source]), np.array(p0, dtype=float))


def _check_counts(counts):
    for source, c in counts.items():
        if c["generated"] != c["consumed"] + c["skipped"]:
            raise AssertionError(f"event count mismatch for {source}: {c}")


def _truth_track(data):
    if not data.truth:
        return None
    t = Track()
    for X in data.truth:
        t.append(X)
    return t


def _metrics(track: Track, data: ScenarioData, rates=None):
    if not data.truth:
        return None
    # step 0 is the prior before any data arrives
    return compute_metrics(track.means[1:], data.truth[1:], track.covs[1:], rates)


def _rates(counts, steps):
    return {s: counts[s]["consumed"] / steps for s in counts}


def run_fusion_pipeline(cfg: RunConfig, data: Optional[ScenarioData] = None, adapt=True) -> RunResult:
    """Two filters, cross-covariance and fusion, logged every step."""
    if data is None:
        data = simulate(cfg.scenario, cfg.p0)
    sc = data.cfg
    est = {s: _initial_estimate(data, s, cfg.p0) for s in SOURCES}
    noise = {"hand": cfg.filter_noise_hand, "base": cfg.filter_noise_base}
    meas = {s: data.measurements(s) for s in SOURCES}
    counts = {s: {"generated": len(meas[s]), "consumed": 0, "skipped": 0} for s in SOURCES}
    opts = cfg.fusion
    xcov = initial_cross_covariance()
    tracks = {s: Track() for s in ("hand", "base", "fused")}

    def log_tick(P_bh):
        for s in SOURCES:
            tracks[s].append(est[s].mean, est[s].cov)
        joint = joint_covariance(est["hand"].cov, est["base"].cov, P_bh.T)
        f = fuse(
            FusionInput([est["hand"].mean, est["base"].mean], joint),
            reference=opts.reference,
            normalization=opts.normalization,
            iterate=opts.iterate,
        )
        tracks["fused"].append(f.mean, f.cov)

    k = 0
    try:
        log_tick(xcov)
        xcovs = [xcov]
        for k in range(1, sc.steps + 1):
            recs = {}
            for s in SOURCES:
                z = meas[s].get(k)
                est[s], noise[s], recs[s] = step(est[s], noise[s], sc.dt, z, adapt=adapt, gate=cfg.gate)
                if z is not None:
                    counts[s]["consumed" if recs[s].measured else "skipped"] += 1
            xcov = propagate_and_update(xcov, recs["base"], recs["hand"])
            xcovs.append(xcov)
            log_tick(xcov)
    except (NumericalFailure, DegenerateFusion, np.linalg.LinAlgError) as exc:
        raise RunAborted(k, exc) from exc
    _check_counts(counts)
    rates = _rates(counts, sc.steps)
    truth = _truth_track(data)
    if truth is not None:
        tracks["truth"] = truth
    metrics = {s: _metrics(tracks[s], data, rates if s == "fused" else {s: rates[s]}) for s in ("hand", "base", "fused")}
    metrics = {s: m for s, m in metrics.items() if m is not None}
    return RunResult(tracks, metrics, counts, data, xcovs, noise)


def run_switching_baseline(cfg: RunConfig, data: Optional[ScenarioData] = None, adapt=True) -> RunResult:
    """One filter updated by whichever camera is available.

    When both are, ``cfg.switch_preference`` decides and the other
    measurement is skipped. The filter uses the base filter's noise model and
    initial estimate.
    """
    if data is None:
        data = simulate(cfg.scenario, cfg.p0)
    sc = data.cfg
    est = _initial_estimate(data, "base", cfg.p0)
    noise = cfg.filter_noise_base
    meas = {s: data.measurements(s) for s in SOURCES}
    counts = {s: {"generated": len(meas[s]), "consumed": 0, "skipped": 0} for s in SOURCES}
    order = ("base", "hand") if cfg.switch_preference == "base-first" else ("hand", "base")
    track = Track()
    track.append(est.mean, est.cov)
    k = 0
    try:
        for k in range(1, sc.steps + 1):
            chosen = next((s for s in order if k in meas[s]), None)
            z = meas[chosen][k] if chosen else None
            est, noise, rec = step(est, noise, sc.dt, z, adapt=adapt, gate=cfg.gate)
            for s in order:
                if k in meas[s]:
                    used = s == chosen and rec.measured
                    counts[s]["consumed" if used else "skipped"] += 1
            track.append(est.mean, est.cov)
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        raise RunAborted(k, exc) from exc
    _check_counts(counts)
    tracks = {"switching": track}
    truth = _truth_track(data)
    if truth is not None:
        tracks["truth"] = truth
    m = _metrics(track, data, _rates(counts, sc.steps))
    metrics = {"switching": m} if m is not None else {}
    return RunResult(tracks, metrics, counts, data, noise={"switching": noise})


def velocity_variance(track: Track, skip=1):
    """Summed per-axis sample variance of the estimated velocity series."""
    v = track.velocities()[skip:]
    return float(np.sum(np.var(v, axis=0, ddof=1)))


ADAPTATION_CASES = ("tuned", "no-adaptation", "low-0.8")


def run_adaptation_study(cfg: RunConfig, data: Optional[ScenarioData] = None):
    """Tuned forgetting factors vs no adaptation vs 0.8, on identical data."""
    if data is None:
        data = simulate(cfg.scenario, cfg.p0)
    cases = {
        "tuned": cfg,
        "no-adaptation": cfg.with_forgetting(1.0, 1.0),
        "low-0.8": cfg.with_forgetting(0.8, 0.8),
    }
    results = {}
    report = {"seed": cfg.scenario.seed, "cases": {}}
    for name, case_cfg in cases.items():
        res = run_fusion_pipeline(case_cfg, data)
        results[name] = res
        report["cases"][name] = {
            "f_q": case_cfg.filter_noise_hand.f_q,
            "f_r": case_cfg.filter_noise_hand.f_r,
            "seed": case_cfg.scenario.seed,
            "fused": res.metrics["fused"].to_dict(),
            "velocity_variance": velocity_variance(res.tracks["fused"]),
        }
    return report, results



def run_comparison(cfg: RunConfig, data: Optional[ScenarioData] = None):
    """Fusion pipeline and switching baseline on the same simulated data."""
    if data is None:
        data = simulate(cfg.scenario, cfg.p0)
    fused = run_fusion_pipeline(cfg, data)
    switching = run_switching_baseline(cfg, data)
    row = {
        "seed": cfg.scenario.seed,
        "fused_rmse_pos": fused.metrics["fused"].rmse_pos,
        "switching_rmse_pos": switching.metrics["switching"].rmse_pos,
        "fused_rmse_vel": fused.metrics["fused"].rmse_vel,
        "switching_rmse_vel": switching.metrics["switching"].rmse_vel,
    }
    return row, fused, switching
