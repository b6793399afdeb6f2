"""Command-line harness.

Verbs: ``run``, ``sweep``, ``compare``, ``adapt-study``, ``replay`` and
``oracle``. Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import outputs
from .aekf import NumericalFailure
from .config import ConfigError, load_config
from .fusion import DegenerateFusion, OracleInconclusive
from .harness import (
    RunAborted,
    run_adaptation_study,
    run_comparison,
    run_fusion_pipeline,
    run_switching_baseline,
    velocity_variance,
)
from .sim import SOURCES, ScenarioData, read_measurement_log, simulate, write_measurement_log

log = logging.getLogger("lgfusion")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
ORACLE_TOL = 1e-6


def _common(p, seeds=False):
    p.add_argument("--config", default="scenario1", help="preset name (scenario1, scenario2) or JSON path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed (first seed for sweeps)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--baseline", choices=("fusion", "switching"), default=None)
    p.add_argument("--paper-exact-fusion", action="store_true", help="fused covariance without the factor 2")
    p.add_argument("--convention", choices=("minimal", "padded"), default=None)
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    if seeds:
        p.add_argument("--seeds", type=int, default=20, help="number of consecutive seeds")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser():
    ap = argparse.ArgumentParser(prog="lgfusion", description="Dual-camera Lie-group filtering and fusion harness.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    _common(sub.add_parser("run", help="one scenario run"))
    _common(sub.add_parser("sweep", help="fusion pipeline over several seeds"), seeds=True)
    _common(sub.add_parser("compare", help="fusion vs switching over paired seeds"), seeds=True)
    _common(sub.add_parser("adapt-study", help="tuned vs no adaptation vs 0.8 forgetting"), seeds=True)
    rp = sub.add_parser("replay", help="run the filters on a recorded measurement log")
    _common(rp)
    rp.add_argument("--log", required=True, help="measurement log CSV")
    op = sub.add_parser("oracle", help="closed-form fusion vs brute-force minimizer")
    op.add_argument("--instances", type=int, default=100)
    op.add_argument("--sigma", type=float, default=0.05)
    op.add_argument("--seed", type=int, default=0)
    op.add_argument("--out", default=None)
    return ap


def _load(args):
    return load_config(
        args.config,
        seed=args.seed,
        convention=args.convention,
        baseline=args.baseline,
        paper_exact_fusion=args.paper_exact_fusion,
        output_dir=args.out,
    )


def _out_dir(args, cfg, suffix):
    d = Path(args.out) if args.out else Path("out") / f"{cfg.name}-{suffix}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_run(out, res, cfg, extra_tracks=None, extra_metrics=None, plots=True):
    tracks = dict(res.tracks)
    tracks.update(extra_tracks or {})
    dt = cfg.scenario.dt
    outputs.write_tracks(out, tracks, dt)
    summary = res.summary()
    summary["metrics"].update(extra_metrics or {})
    summary["seed"] = cfg.scenario.seed
    summary["name"] = cfg.name
    outputs.write_json(out / "metrics.json", summary)
    if plots:
        from .plots import plot_run

        plot_run(tracks, dt, out)


def cmd_run(args):
    cfg = _load(args)
    out = _out_dir(args, cfg, f"seed{cfg.scenario.seed}")
    data = simulate(cfg.scenario, cfg.p0)
    write_measurement_log(out / "measurements.csv", data.events, cfg.scenario.dt)
    res = run_fusion_pipeline(cfg, data)
    extra, extra_m = {}, {}
    if cfg.baseline == "switching":
        sw = run_switching_baseline(cfg, data)
        extra["switching"] = sw.tracks["switching"]
        extra_m = {k: v.to_dict() for k, v in sw.metrics.items()}
    _write_run(out, res, cfg, extra, extra_m, plots=not args.no_plots)
    fm = res.metrics["fused"]
    print(f"{cfg.name} seed {cfg.scenario.seed}: fused rmse_pos={fm.rmse_pos:.5f} rmse_vel={fm.rmse_vel:.5f} nees={fm.nees_mean:.3f} -> {out}")
    return EXIT_OK


def _seed_list(args, cfg):
    first = cfg.scenario.seed if args.seed is None else args.seed
    return [first + i for i in range(args.seeds)]


def _map(fn, items, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _sweep_one(cfg):
    res = run_fusion_pipeline(cfg)
    return [
        {"seed": cfg.scenario.seed, "track": name, **{k: v for k, v in m.to_dict().items() if k != "update_rates"}}
        for name, m in res.metrics.items()
    ]


def cmd_sweep(args):
    cfg = _load(args)
    seeds = _seed_list(args, cfg)
    out = _out_dir(args, cfg, "sweep")
    rows = [r for chunk in _map(_sweep_one, [cfg.with_seed(s) for s in seeds], args.jobs) for r in chunk]
    header = ["seed", "track", "rmse_pos", "rmse_rot", "rmse_vel", "rmse_angvel", "nees_mean", "nees_skipped"]
    outputs.write_csv(out / "sweep.csv", header, ([str(r["seed"]), r["track"]] + [outputs.fmt(r[h]) for h in header[2:]] for r in rows))
    summary = {}
    for track in ("hand", "base", "fused"):
        sel = [r for r in rows if r["track"] == track]
        summary[track] = {k: float(np.mean([r[k] for r in sel])) for k in header[2:7]}
    outputs.write_json(out / "summary.json", {"seeds": seeds, "mean": summary})
    if not args.no_plots:
        from .plots import plot_paired

        fused = [r["rmse_pos"] for r in rows if r["track"] == "fused"]
        base = [r["rmse_pos"] for r in rows if r["track"] == "base"]
        plot_paired(fused, base, "fused", "base", "RMSE pos [m]", out / "sweep_rmse_pos.png")
    print(f"{cfg.name}: {len(seeds)} seeds, mean fused nees={summary['fused']['nees_mean']:.3f} -> {out}")
    return EXIT_OK


def _compare_one(cfg):
    row, _, _ = run_comparison(cfg)
    return row


def cmd_compare(args):
    cfg = _load(args)
    seeds = _seed_list(args, cfg)
    out = _out_dir(args, cfg, "compare")
    rows = _map(_compare_one, [cfg.with_seed(s) for s in seeds], args.jobs)
    header = ["seed", "fused_rmse_pos", "switching_rmse_pos", "fused_rmse_vel", "switching_rmse_vel"]
    outputs.write_csv(out / "compare.csv", header, ([str(r["seed"])] + [outputs.fmt(r[h]) for h in header[1:]] for r in rows))
    wins_pos = sum(r["fused_rmse_pos"] < r["switching_rmse_pos"] for r in rows)
    wins_vel = sum(r["fused_rmse_vel"] < r["switching_rmse_vel"] for r in rows)
    outputs.write_json(out / "summary.json", {"seeds": seeds, "fusion_wins_pos": wins_pos, "fusion_wins_vel": wins_vel})
    if not args.no_plots:
        from .plots import plot_comparison, plot_paired

        _, fused, sw = run_comparison(cfg.with_seed(seeds[0]))
        series = {"truth": fused.tracks["truth"], "fused": fused.tracks["fused"], "switching": sw.tracks["switching"]}
        plot_comparison(series, cfg.scenario.dt, out, stem=f"compare_seed{seeds[0]}")
        plot_paired([r["fused_rmse_pos"] for r in rows], [r["switching_rmse_pos"] for r in rows], "fused", "switching", "RMSE pos [m]", out / "compare_rmse_pos.png")
    print(f"{cfg.name}: fusion better on position in {wins_pos}/{len(rows)} seeds, velocity in {wins_vel}/{len(rows)} -> {out}")
    return EXIT_OK


def _adapt_one(cfg):
    report, _ = run_adaptation_study(cfg)
    return report


def cmd_adapt(args):
    cfg = _load(args)
    seeds = _seed_list(args, cfg)
    out = _out_dir(args, cfg, "adapt")
    reports = _map(_adapt_one, [cfg.with_seed(s) for s in seeds], args.jobs)
    header = ["seed", "case", "f_q", "f_r", "rmse_pos", "rmse_vel", "velocity_variance"]
    rows = []
    for rep in reports:
        for case, c in rep["cases"].items():
            rows.append([str(rep["seed"]), case, outputs.fmt(c["f_q"]), outputs.fmt(c["f_r"]), outputs.fmt(c["fused"]["rmse_pos"]), outputs.fmt(c["fused"]["rmse_vel"]), outputs.fmt(c["velocity_variance"])])
    outputs.write_csv(out / "adapt.csv", header, rows)
    noisier = sum(r["cases"]["low-0.8"]["velocity_variance"] > r["cases"]["tuned"]["velocity_variance"] for r in reports)
    outputs.write_json(out / "summary.json", {"seeds": seeds, "low_0.8_noisier_than_tuned": noisier, "reports": reports})
    if not args.no_plots:
        from .plots import plot_comparison

        _, results = run_adaptation_study(cfg.with_seed(seeds[0]))
        series = {"truth": results["tuned"].tracks["truth"]}
        series.update({name: r.tracks["fused"] for name, r in results.items()})
        plot_comparison(series, cfg.scenario.dt, out, stem=f"adapt_seed{seeds[0]}")
    print(f"{cfg.name}: f=0.8 velocity series noisier than tuned in {noisier}/{len(reports)} seeds -> {out}")
    return EXIT_OK


def cmd_replay(args):
    cfg = _load(args)
    try:
        events = read_measurement_log(args.log)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read measurement log {args.log}: {exc}") from exc
    sc = cfg.scenario
    if events and max(e.step for e in events) > sc.steps:
        sc = replace(sc, steps=max(e.step for e in events))
        cfg = replace(cfg, scenario=sc)
    masks = {s: np.zeros(sc.steps + 1, dtype=bool) for s in SOURCES}
    for e in events:
        if e.step < 1:
            raise ConfigError(f"measurement log has an event at step {e.step}")
        masks[e.source][e.step] = True
    zero = np.zeros(12)
    data = ScenarioData(sc, [], events, masks, {s: zero for s in SOURCES}, np.zeros((0, 6)))
    out = _out_dir(args, cfg, "replay")
    res = run_fusion_pipeline(cfg, data)
    extra = {}
    if cfg.baseline == "switching":
        extra["switching"] = run_switching_baseline(cfg, data).tracks["switching"]
    _write_run(out, res, cfg, extra, plots=not args.no_plots)
    print(f"replayed {len(events)} measurements over {sc.steps} steps -> {out}")
    return EXIT_OK


def cmd_oracle(args):
    from .checks import oracle_suite

    rows = oracle_suite(args.instances, args.sigma, args.seed)
    worst_one = max(r.single_step for r in rows)
    worst_it = max(r.iterated for r in rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs.write_csv(
            out / "oracle.csv",
            ["instance", "single_step_distance", "iterated_distance", "iterations"],
            ([str(r.index), outputs.fmt(r.single_step), outputs.fmt(r.iterated), str(r.iterations)] for r in rows),
        )
    print(f"{len(rows)} instances, sigma={args.sigma}: max distance single step {worst_one:.3e}, iterated {worst_it:.3e}")
    ok = worst_it < ORACLE_TOL
    print("PASS" if ok else "FAIL", f"(iterated closed form vs minimizer, tol {ORACLE_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "adapt-study": cmd_adapt,
    "replay": cmd_replay,
    "oracle": cmd_oracle,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as exc:
        print(f"numerical failure at step {exc.step}: {exc.cause}", file=sys.stderr)
        if getattr(args, "out", None):
            outputs.write_json(Path(args.out) / "failure.json", {"step": exc.step, "error": str(exc.cause)})
        return EXIT_NUMERIC
    except (NumericalFailure, DegenerateFusion, OracleInconclusive) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
