import csv
import json

import numpy as np
import pytest

from bbsimplex.cli import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main
from bbsimplex.config import ConfigurationError, bundled_scenarios, load_config, parse_config
from bbsimplex.plot import render_svg
from bbsimplex.runner import bench_decision_module


def test_bundled_scenarios_parse():
    names = bundled_scenarios()
    assert {"mas7", "mas12", "mas7_recovery", "mas2_lanes", "aircraft3", "aircraft3_raw"} <= set(names)
    for name, path in names.items():
        cfg = load_config(path)
        assert cfg.name == name


@pytest.mark.parametrize("text", [
    "[scenario]\ncase_study = mas\nbogus = 1\n",
    "[scenario]\ncase_study = mas\n[nowhere]\nx = 1\n",
    "[scenario]\ncase_study = mas\n[aircraft]\naircraft = 3\n",
    "[scenario]\ncase_study = boat\n",
    "[scenario]\nn_steps = many\n",
    "[scenario]\n[kernel]\nmode = chaos\n",
    "[scenario]\n[faults]\nac = 3:hang\n",
    "[scenario]\ncase_study = aircraft\n[aircraft]\nsafety_distance = 100\n",
    "no sections at all",
])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_config_values():
    cfg = parse_config("[scenario]\ncase_study = aircraft\nseed = 4\n[aircraft]\naircraft = 7\n"
                       "rotation_deg = 90\n[advisory]\nalert_time = 20\n[faults]\nlbc = 3:corrupt, 5:garbage\n")
    assert cfg.aircraft.n == 7 and np.isclose(cfg.aircraft.rotation, np.pi / 2)
    assert cfg.aircraft.advisory.alert_time == 20 and cfg.seed == 4
    assert sorted(cfg.faults.lbc) == [3, 5]
    assert cfg.with_overrides(seed=9, n_steps=2).seed == 9


def test_unknown_key_exits_2_without_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\ncase_study = mas\n[mas]\nagents = 3\nwarp = 9\n")
    out = tmp_path / "out"
    assert main(["run", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "warp" in capsys.readouterr().err


def test_validate_and_list(capsys):
    assert main(["validate", "aircraft7"]) == EXIT_OK
    assert main(["list"]) == EXIT_OK
    assert "mas7_recovery" in capsys.readouterr().out


def test_raw_baseline_exits_3(tmp_path):
    assert main(["run", "aircraft3_raw", "--out", str(tmp_path / "raw")]) == EXIT_VIOLATION
    s = json.loads((tmp_path / "raw" / "summary.json").read_text())
    assert s["safety_violations"] > 0 and s["min_separation"] < 1500


def _read(path):
    return (path).read_bytes()


def test_replay_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "mas7", "--steps", "6", "--seed", "3", "--svg", "--out", str(tmp_path / d)]) == EXIT_OK
    for f in ("trajectory.csv", "decisions.csv", "summary.json", "plot.svg"):
        assert _read(tmp_path / "a" / f) == _read(tmp_path / "b" / f)


def test_summary_min_matches_trajectory(tmp_path):
    main(["run", "mas7", "--steps", "8", "--out", str(tmp_path)])
    s = json.loads((tmp_path / "summary.json").read_text())
    rows = list(csv.DictReader((tmp_path / "trajectory.csv").open()))
    steps = sorted({int(r["step"]) for r in rows})
    best = np.inf
    for k in steps:
        p = np.array([[float(r["px"]), float(r["py"])] for r in rows if int(r["step"]) == k])
        d = np.linalg.norm(p[:, None] - p[None], axis=2)
        best = min(best, d[np.triu_indices(len(p), 1)].min())
    assert s["min_separation"] == best
    dec = list(csv.DictReader((tmp_path / "decisions.csv").open()))
    assert len(dec) == 8 and all(r["dm_micros"] == "" for r in dec)


def test_aircraft_summary_uses_substeps(tmp_path):
    main(["run", "aircraft3", "--steps", "10", "--out", str(tmp_path)])
    s = json.loads((tmp_path / "summary.json").read_text())
    rows = list(csv.DictReader((tmp_path / "substeps.csv").open()))
    P = np.array([[float(r["px"]), float(r["py"])] for r in rows]).reshape(-1, 3, 2)
    assert P.shape[0] == 1 + 10 * 20
    d = np.linalg.norm(P[:, :, None] - P[:, None], axis=3)[:, [0, 0, 1], [1, 2, 2]]
    assert np.isclose(s["min_separation"], d.min(), rtol=0, atol=1e-9)


def test_svg_deterministic_and_empty_input():
    P = np.cumsum(np.ones((5, 3, 2)), axis=0) * [[1, 2], [2, 1], [0.5, 0.5]]
    a = render_svg(P, P[-1] - P[-2], closest=(0, 0, 1, 1.0), title="t")
    assert a == render_svg(P, P[-1] - P[-2], closest=(0, 0, 1, 1.0), title="t")
    assert a.startswith("<svg") and a.count("<polyline") == 3 + 3
    with pytest.raises(ValueError):
        render_svg(np.zeros((0, 3, 2)))


def test_bench_single_rep():
    r = bench_decision_module(load_config(bundled_scenarios()["mas7_disturbance"]), 1)
    assert r["reps"] == 1 and r["p95_ms"] == r["median_ms"] == r["min_ms"]
    assert r["final_generators"] == 364
