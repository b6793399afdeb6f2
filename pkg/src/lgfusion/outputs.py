"""CSV and JSON writers for run results.

Tracks are written one file per track with 17 significant digits, ``.``
decimals and LF line endings, so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, Iterable, List

import numpy as np

from .liegroup import so3_log

TRACK_HEADER = [
    "step", "t",
    "px", "py", "pz",
    "rx", "ry", "rz",
    "wx", "wy", "wz",
    "vx", "vy", "vz",
    "trace_rot", "trace_trans", "trace_vel",
]


def fmt(x):
    return format(float(x), ".17g")


def track_rows(track, dt) -> Iterable[List[str]]:
    for k, (m, P) in enumerate(zip(track.means, track.covs)):
        row = [str(k), fmt(k * dt)]
        row += [fmt(v) for v in m.pose[:3, 3]]
        row += [fmt(v) for v in so3_log(m.pose[:3, :3])]
        row += [fmt(v) for v in m.omega]
        row += [fmt(v) for v in m.vel]
        if P is None:
            row += ["", "", ""]
        else:
            d = np.diag(P)
            row += [fmt(d[:3].sum()), fmt(d[3:6].sum()), fmt(d[9:12].sum())]
        yield row


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_track_csv(path, track, dt):
    write_csv(path, TRACK_HEADER, track_rows(track, dt))


def write_tracks(out_dir, tracks: Dict[str, object], dt) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in sorted(tracks):
        p = out_dir / f"track_{name}.csv"
        write_track_csv(p, tracks[name], dt)
        paths.append(p)
    return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
