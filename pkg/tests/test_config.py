import copy
import json

import numpy as np
import pytest

from lgfusion.config import (
    ConfigError,
    build_run_config,
    load_config,
    matrix_from_spec,
    pose_noise_from_spec,
    read_config_dict,
)


@pytest.fixture
def raw():
    d, _ = read_config_dict("scenario1")
    return d


def test_presets_carry_reference_values():
    for name, dt, fq, fr in (("scenario1", 0.066, 0.999, 0.999), ("scenario2", 0.25, 0.990, 0.950)):
        cfg = load_config(name)
        assert cfg.scenario.dt == dt
        for n in (cfg.filter_noise_hand, cfg.filter_noise_base):
            assert (n.f_q, n.f_r) == (fq, fr)
            assert np.array_equal(n.q[6:9, 6:9], 1e-5 * np.eye(3))
            assert np.array_equal(n.q[9:, 9:], 1e-2 * np.eye(3))
            assert np.array_equal(n.r, np.diag([1e-6] * 3 + [1e-3] * 3))
        assert np.array_equal(cfg.p0, 1e-2 * np.eye(12))


def test_scenario2_availability():
    sc = load_config("scenario2").scenario
    assert sc.avail_hand.rate == 0.33 and sc.avail_base.rate == 0.70
    assert sc.burst.windows and sc.burst.sources == ("hand",)


def test_matrix_specs():
    assert np.array_equal(matrix_from_spec(2.0, 3), 2 * np.eye(3))
    assert np.array_equal(matrix_from_spec([1, 2, 3], 3), np.diag([1.0, 2, 3]))
    full = [[2, 1, 0], [1, 2, 0], [0, 0, 1]]
    assert np.array_equal(matrix_from_spec(full, 3), np.array(full, float))
    with pytest.raises(ConfigError):
        matrix_from_spec([1, 2], 3)
    with pytest.raises(ConfigError):
        matrix_from_spec([[1, 2, 0], [0, 1, 0], [0, 0, 1]], 3)
    R = pose_noise_from_spec({"rot": 1e-6, "trans": [1e-3, 2e-3, 3e-3]})
    assert np.array_equal(np.diag(R), [1e-6] * 3 + [1e-3, 2e-3, 3e-3])


def test_minimal_convention(raw):
    raw["convention"] = "minimal"
    raw["filter"]["p0"] = [1e-2] * 12
    assert np.array_equal(build_run_config(raw).p0, 1e-2 * np.eye(12))
    with pytest.raises(ConfigError):
        build_run_config(raw, convention="padded")


def test_padded_full_matrix(raw):
    P = np.diag(np.arange(1, 16) * 1e-3)
    raw["filter"]["p0"] = P.tolist()
    cfg = build_run_config(raw)
    assert np.array_equal(np.diag(cfg.p0), np.r_[np.arange(1, 7), np.arange(10, 16)] * 1e-3)


def test_overrides(raw):
    cfg = build_run_config(raw, seed=42, baseline="switching", paper_exact_fusion=True)
    assert cfg.scenario.seed == 42 and cfg.baseline == "switching"
    assert cfg.fusion.normalization == 1.0


def test_per_filter_override(raw):
    raw["filter"]["hand"] = {"r0": {"rot": 1e-5, "trans": 1e-2}, "f_r": 0.9}
    cfg = build_run_config(raw)
    assert cfg.filter_noise_hand.r[0, 0] == 1e-5 and cfg.filter_noise_hand.f_r == 0.9
    assert cfg.filter_noise_base.r[0, 0] == 1e-6 and cfg.filter_noise_base.f_r == 0.999


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(schema_version=2),
        lambda d: d.pop("filter"),
        lambda d: d["filter"].update(f_q=1.5),
        lambda d: d["scenario"].update(dt=-1),
        lambda d: d["scenario"].update(unknown=1),
        lambda d: d.update(baseline="kalman"),
        lambda d: d["scenario"]["availability"].update(hand={"kind": "bernoulli"}),
        lambda d: d["scenario"]["burst"].update(windows=[[5, 5]]),
        lambda d: d["filter"].update(p0=-1.0),
        lambda d: d["scenario"]["arm"].update(theta0=[0.0, 0.0]),
    ],
)
def test_invalid_configs(raw, mutate):
    bad = copy.deepcopy(raw)
    mutate(bad)
    with pytest.raises(ConfigError):
        build_run_config(bad)


def test_mask_file_relative_to_config(tmp_path, raw):
    (tmp_path / "mask.txt").write_text("\n".join(["1", "0"] * 250))
    raw["scenario"]["availability"]["hand"] = {"kind": "mask", "mask_file": "mask.txt"}
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(raw))
    cfg = load_config(p)
    assert cfg.scenario.avail_hand.mask[:4] == (True, False, True, False)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.json")


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
