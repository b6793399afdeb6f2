"""Figures written next to the CSV outputs (PNG, non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "truth": dict(color="k", lw=1.2, ls="--"),
    "hand": dict(color="tab:orange", lw=0.8, alpha=0.7),
    "base": dict(color="tab:blue", lw=0.8, alpha=0.7),
    "fused": dict(color="tab:green", lw=1.4),
    "switching": dict(color="tab:red", lw=1.0),
}


def _save(fig, path):
    fig.tight_layout()
    # no timestamp in the metadata, so reruns give identical files
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def _times(track, dt):
    return dt * np.arange(len(track.means))


def plot_run(tracks, dt, out_dir, stem="run"):
    """Trajectory (x-y), velocity and pose-covariance figures for one run."""
    out_dir = Path(out_dir)
    paths = []
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, tr in tracks.items():
        p = tr.positions()
        ax.plot(p[:, 0], p[:, 1], label=name, **STYLE.get(name, {}))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("target position")
    ax.legend()
    paths.append(_save(fig, out_dir / f"{stem}_trajectory.png"))

    fig, axes = plt.subplots(3, 1, figsize=(7, 6.5), sharex=True)
    for name, tr in tracks.items():
        v = tr.velocities()
        t = _times(tr, dt)
        for i, ax in enumerate(axes):
            ax.plot(t, v[:, i], label=name, **STYLE.get(name, {}))
    for ax, c in zip(axes, "xyz"):
        ax.set_ylabel(f"v{c} [m/s]")
    axes[-1].set_xlabel("t [s]")
    axes[0].legend(ncol=len(tracks), fontsize="small")
    paths.append(_save(fig, out_dir / f"{stem}_velocity.png"))

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for name, tr in tracks.items():
        if tr.covs and tr.covs[0] is not None:
            tr_pos = [np.trace(P[3:6, 3:6]) for P in tr.covs]
            ax.semilogy(_times(tr, dt), tr_pos, label=name, **STYLE.get(name, {}))
    ax.set_xlabel("t [s]")
    ax.set_ylabel("trace of position covariance [m^2]")
    ax.legend()
    paths.append(_save(fig, out_dir / f"{stem}_covariance.png"))
    return paths


def plot_comparison(series, dt, out_dir, stem="compare"):
    """Four panels (px, py, vx, vy) for a dict ``label -> Track``."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    panels = [("px [m]", "pos", 0), ("py [m]", "pos", 1), ("vx [m/s]", "vel", 0), ("vy [m/s]", "vel", 1)]
    for ax, (label, kind, i) in zip(axes.ravel(), panels):
        for name, tr in series.items():
            y = tr.positions()[:, i] if kind == "pos" else tr.velocities()[:, i]
            ax.plot(_times(tr, dt), y, label=name, **STYLE.get(name, {"lw": 1.0}))
        ax.set_ylabel(label)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]")
    axes[0, 0].legend(fontsize="small")
    return [_save(fig, Path(out_dir) / f"{stem}.png")]


def plot_paired(values_a, values_b, label_a, label_b, what, out_path):
    """Per-seed paired scatter with the diagonal, for sweep summaries."""
    a, b = np.asarray(values_a), np.asarray(values_b)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(b, a, s=16)
    lo, hi = float(min(a.min(), b.min())), float(max(a.max(), b.max()))
    ax.plot([lo, hi], [lo, hi], "k:", lw=0.8)
    ax.set_xlabel(f"{label_b} {what}")
    ax.set_ylabel(f"{label_a} {what}")
    return [_save(fig, out_path)]
