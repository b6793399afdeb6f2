"""JSON run configuration.

A config file is validated against ``presets/config.schema.json`` and turned
into a :class:`~lgfusion.harness.RunConfig`. Matrices may be written as a
scalar (multiple of the identity), a list (diagonal) or a list of rows; pose
covariances may instead give their ``rot`` and ``trans`` 3x3 blocks.

With the ``padded`` convention the initial covariance is 15x15 in the padded
tangent layout and is converted to the 12-dimensional one on load.
"""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from scipy.linalg import block_diag

from .aekf import NoiseConfig
from .harness import FusionOptions, RunConfig
from .kinematics import ExtrinsicSet, JointScrew, KinematicChain, synthetic_six_dof_chain
from .liegroup import make_pose, so3_exp
from .sim import Availability, ArmMotion, BurstNoise, ScenarioConfig
from .state import DIM, PADDED_DIM, TargetState, unpad_covariance

PRESETS = ("scenario1", "scenario2")
CONVENTIONS = ("minimal", "padded")


class ConfigError(ValueError):
    pass


def _resource(name):
    return resources.files("lgfusion").joinpath("presets", name)


def load_schema():
    return json.loads(_resource("config.schema.json").read_text())


def matrix_from_spec(spec, n, what="matrix"):
    """Scalar -> s*I, flat list -> diagonal, list of rows -> full matrix."""
    if isinstance(spec, (int, float)):
        return float(spec) * np.eye(n)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1:
        if arr.size != n:
            raise ConfigError(f"{what}: diagonal needs {n} entries, got {arr.size}")
        return np.diag(arr)
    if arr.shape != (n, n):
        raise ConfigError(f"{what}: expected {n}x{n}, got {arr.shape}")
    if not np.allclose(arr, arr.T):
        raise ConfigError(f"{what} is not symmetric")
    return arr


def pose_noise_from_spec(spec, what="pose covariance"):
    if isinstance(spec, dict):
        return block_diag(
            matrix_from_spec(spec["rot"], 3, what + ".rot"),
            matrix_from_spec(spec["trans"], 3, what + ".trans"),
        )
    return matrix_from_spec(spec, 6, what)


def transform_from_spec(spec):
    if isinstance(spec, dict):
        return make_pose(so3_exp(spec.get("rotation_vector", [0.0, 0.0, 0.0])), spec.get("translation"))
    T = np.asarray(spec, dtype=float)
    if not np.allclose(T[3], [0, 0, 0, 1]):
        raise ConfigError("homogeneous transform must have last row [0, 0, 0, 1]")
    return T


def _availability(spec, base_dir):
    if spec is None:
        return Availability()
    kind = spec["kind"]
    if kind == "mask":
        if "mask_file" in spec:
            path = Path(spec["mask_file"])
            if not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"availability mask file not found: {path}")
            return Availability.from_file(path)
        if "mask" not in spec:
            raise ConfigError("mask availability needs 'mask' or 'mask_file'")
        return Availability("mask", mask=tuple(bool(v) for v in spec["mask"]))
    if kind == "bernoulli" and "rate" not in spec:
        raise ConfigError("bernoulli availability needs a 'rate'")
    return Availability(kind, float(spec.get("rate", 1.0)))


def _initial_state(spec):
    spec = spec or {}
    pose = make_pose(so3_exp(spec.get("rotation_vector", [0.0, 0.0, 0.0])), spec.get("position", [0.0, 0.0, 0.0]))
    return TargetState(pose, spec.get("omega", [0.0, 0.0, 0.0]), spec.get("velocity", [0.0, 0.0, 0.0]))


def _chain(spec):
    if spec is None:
        return synthetic_six_dof_chain()
    screws = [JointScrew(np.asarray(s["axis"], dtype=float), s.get("point", [0.0, 0.0, 0.0])) for s in spec["screws"]]
    home = transform_from_spec(spec["home"]) if "home" in spec else np.eye(4)
    return KinematicChain(screws, home)


def _scenario(spec, base_dir):
    truth = spec.get("truth_noise", {})
    meas = spec.get("measurement_noise", {})
    avail = spec.get("availability", {})
    burst = spec.get("burst", {})
    chain = _chain(spec.get("kinematics"))
    arm = spec.get("arm", {})
    theta0 = tuple(arm.get("theta0", ArmMotion().theta0 if chain.n_joints == 6 else (0.0,) * chain.n_joints))
    amplitude = tuple(arm.get("amplitude", (0.0,) * len(theta0)))
    if len(theta0) != chain.n_joints or len(amplitude) != chain.n_joints:
        raise ConfigError(f"arm motion needs {chain.n_joints} joint values")
    for a, b in burst.get("windows", []):
        if b <= a:
            raise ConfigError(f"burst window [{a}, {b}) is empty")
    ext = {k: transform_from_spec(v) for k, v in spec.get("extrinsics", {}).items()}
    r_default = np.diag([1e-6] * 3 + [1e-3] * 3)
    return ScenarioConfig(
        dt=float(spec["dt"]),
        steps=int(spec["steps"]),
        initial_state=_initial_state(spec.get("initial_state")),
        q_nw=matrix_from_spec(truth.get("q_nw", 0.0), 3, "truth_noise.q_nw"),
        q_nv=matrix_from_spec(truth.get("q_nv", 0.0), 3, "truth_noise.q_nv"),
        r_true_hand=pose_noise_from_spec(meas["hand"], "measurement_noise.hand") if "hand" in meas else r_default,
        r_true_base=pose_noise_from_spec(meas["base"], "measurement_noise.base") if "base" in meas else r_default,
        avail_hand=_availability(avail.get("hand"), base_dir),
        avail_base=_availability(avail.get("base"), base_dir),
        seed=int(spec.get("seed", 0)),
        burst=BurstNoise(
            tuple(tuple(w) for w in burst.get("windows", [])),
            float(burst.get("factor", 10.0)),
            tuple(burst.get("sources", ["hand"])),
        ),
        chain=chain,
        extrinsics=ExtrinsicSet(**ext),
        arm=ArmMotion(theta0, amplitude, float(arm.get("period", 20.0))),
    )


def _noise(filt, source):
    over = dict(filt)
    over.update(filt.get(source, {}))
    return NoiseConfig.from_blocks(
        matrix_from_spec(over["q_nw"], 3, f"filter.{source}.q_nw"),
        matrix_from_spec(over["q_nv"], 3, f"filter.{source}.q_nv"),
        pose_noise_from_spec(over["r0"], f"filter.{source}.r0"),
        float(over.get("f_q", 1.0)),
        float(over.get("f_r", 1.0)),
    )


def _p0(spec, convention):
    n = PADDED_DIM if convention == "padded" else DIM
    P = matrix_from_spec(spec, n, "filter.p0")
    if convention == "padded":
        # the padded components are unobservable placeholders; their variance is dropped
        P = unpad_covariance(P)
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise ConfigError("filter.p0 must be positive definite")
    return P


def read_config_dict(source):
    """Return ``(raw dict, directory for relative paths)``.

    ``source`` is a path, a preset name or an already-parsed dict.
    """
    if isinstance(source, dict):
        return copy.deepcopy(source), Path.cwd()
    if str(source) in PRESETS:
        return json.loads(_resource(f"{source}.json").read_text()), Path.cwd()
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text()), path.parent
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def validate(raw):
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def build_run_config(
    raw,
    base_dir: Optional[Path] = None,
    seed: Optional[int] = None,
    convention: Optional[str] = None,
    baseline: Optional[str] = None,
    paper_exact_fusion: bool = False,
    output_dir=None,
) -> RunConfig:
    validate(raw)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    convention = convention or raw.get("convention", "minimal")
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {convention!r}")
    try:
        scenario = _scenario(raw["scenario"], base_dir)
        filt = raw["filter"]
        fz = raw.get("fusion", {})
        fusion = FusionOptions(
            normalization=1.0 if paper_exact_fusion else float(fz.get("normalization", 2.0)),
            reference=fz.get("reference", "min-trace"),
            iterate=bool(fz.get("iterate", False)),
        )
        cfg = RunConfig(
            scenario=scenario,
            filter_noise_hand=_noise(filt, "hand"),
            filter_noise_base=_noise(filt, "base"),
            p0=_p0(filt["p0"], convention),
            fusion=fusion,
            baseline=baseline or raw.get("baseline", "fusion"),
            switch_preference=raw.get("switch_preference", "base-first"),
            gate=filt.get("gate"),
            output_dir=str(output_dir) if output_dir is not None else None,
            name=raw.get("name", "run"),
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg


def load_config(source, **overrides) -> RunConfig:
    raw, base_dir = read_config_dict(source)
    return build_run_config(raw, base_dir, **overrides)
