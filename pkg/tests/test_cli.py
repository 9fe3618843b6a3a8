import csv
import json

import numpy as np
import pytest

from requant.cli import dumps, main, resolve_config, ConfigError


def run(tmp_path, cfg, name="run", threads=1):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main(["run", str(path), "--out", str(out), "--threads", str(threads)])
    return code, json.loads((out / "report.json").read_text()), out


def test_quantize_oscillator(tmp_path):
    cfg = {"model": {"name": "oscillator"}, "pipeline": "quantize",
           "options": {"n": [0, 1, 2, 3, 4, 5], "n_scan": 7}}
    code, rep, _ = run(tmp_path, cfg)
    assert code == 0
    orbits = rep["results"]["orbits"]
    assert len(orbits) == 6
    for n, o in enumerate(orbits):
        assert o["abs_z0_sq"] == pytest.approx(n, abs=1e-6)
    # the resolved config carries every default
    assert rep["config"]["options"]["closure_tol"] == 1e-6
    assert rep["config"]["options"]["t_max"] == pytest.approx(1.5 * 2 * np.pi)
    assert rep["config"]["model"]["params"]["truncation"] == 40


def test_spectrum_and_rpa_agree(tmp_path):
    model = {"name": "lipkin", "params": {"j": 10, "epsilon": 1, "V": 0.01}}
    code, spec, out = run(tmp_path, {"model": model, "pipeline": "spectrum"}, "spec")
    assert code == 0
    rows = list(csv.reader(open(out / "spectrum.csv")))
    assert rows[0] == ["index", "eigenvalue"] and len(rows) == 22
    ev = spec["results"]["eigenvalues"]
    code, rpa, _ = run(tmp_path, {"model": model, "pipeline": "rpa"}, "rpa")
    assert code == 0
    assert abs(rpa["results"]["omega"] - (ev[1] - ev[0])) / (ev[1] - ev[0]) <= 0.02
    assert rpa["results"]["normalization"] == pytest.approx(1.0, abs=1e-8)


def test_crank_and_project_rotor(tmp_path):
    code, rep, out = run(tmp_path, {"model": {"name": "rotor"}, "pipeline": "crank"}, "crank")
    assert code == 0
    sols = rep["results"]["solutions"]
    assert [s["targets"][0] for s in sols] == [-2.0, -1.0, 0.0, 1.0, 2.0]
    assert all(s["constraint_residual"] <= 1e-8 and s["multiplier_residual"] <= 1e-8 for s in sols)
    assert (out / "cranking.csv").exists()
    code, rep, _ = run(tmp_path, {"model": {"name": "rotor"}, "pipeline": "project"}, "project")
    assert code == 0
    for p in rep["results"]["projections"]:
        assert p["eigen_residual"] <= 1e-10 and p["projector_mismatch"] <= 1e-10
        if p["m"] != 0:
            assert p["time_average_overlap"] >= 1 - 1e-9


def test_evolve_minimize_and_cylinder(tmp_path):
    code, rep, out = run(tmp_path, {"model": {"name": "oscillator"}, "pipeline": "evolve",
                                    "options": {"t_end": 3.0, "n_samples": 11}}, "ev")
    assert code == 0 and rep["results"]["max_energy_drift"] <= 1e-8
    assert len(list(csv.reader(open(out / "trajectory.csv")))) == 12
    code, rep, _ = run(tmp_path, {"model": {"name": "lipkin"}, "pipeline": "minimize"}, "min")
    assert code == 0 and rep["results"]["gradient_norm"] <= 1e-10
    cyl = {"name": "cylinder", "params": {"eigenvalues": [0, 1], "psi0": [[0, 0], 1]}}
    code, rep, _ = run(tmp_path, {"model": cyl, "pipeline": "requantize",
                                  "options": {"n_samples": 33}}, "cyl")
    # psi0 is an eigenstate, so there is no intrinsic period
    assert code == 3 and rep["error"]["type"] == "NoClosureFound"
    cyl["params"]["psi0"] = [1, 1]
    code, rep, _ = run(tmp_path, {"model": cyl, "pipeline": "quantize"}, "cyl2")
    assert code == 0 and rep["results"]["accepted"] is False


def test_config_errors_exit_2(tmp_path):
    bad = [
        {"model": {"name": "rotor"}, "pipeline": "crank", "options": {"bogus": 1}},
        {"model": {"name": "rotor"}, "pipeline": "dance"},
        {"model": {"name": "rotor", "params": {"spin": 2}}, "pipeline": "crank"},
        {"model": {"name": "oscillator"}, "pipeline": "quantize", "options": {"closure_tol": -1}},
        {"model": {"name": "oscillator"}, "pipeline": "quantize", "options": {"s_range": [2, 1]}},
        {"model": {"name": "cylinder", "params": {"eigenvalues": [0, 1]}}, "pipeline": "spectrum"},
        {"model": {"name": "rotor"}, "pipeline": "crank", "extra": True},
    ]
    for k, cfg in enumerate(bad):
        code, rep, _ = run(tmp_path, cfg, f"bad{k}")
        assert code == 2, cfg
        assert rep["error"]["type"] == "ConfigError"
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["run", str(tmp_path / "broken.json"), "--out", str(tmp_path / "broken")]) == 2


def test_numerical_errors_exit_3(tmp_path):
    code, rep, _ = run(tmp_path, {"model": {"name": "rotor"}, "pipeline": "crank",
                                  "options": {"targets": [3.5]}})
    assert code == 3
    assert rep["error"]["type"] == "TargetUnreachable"


def test_reports_are_deterministic(tmp_path):
    cfg = {"model": {"name": "oscillator"}, "pipeline": "quantize", "options": {"n": [1, 2], "n_scan": 5}}
    _, _, a = run(tmp_path, cfg, "a", threads=1)
    _, _, b = run(tmp_path, cfg, "b", threads=3)
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_float_serialization_round_trips():
    values = [0.1, 1 / 3, 2.0, 1e-300, -123456.789e10]
    text = dumps({"v": values})
    assert json.loads(text)["v"] == values
    assert "0.10000000000000001" in text
    assert json.loads(dumps({"x": float("nan")}))["x"] is None


def test_resolve_fills_defaults():
    cfg = resolve_config({"model": {"name": "lipkin"}, "pipeline": "rpa"})
    assert cfg["model"]["params"] == {"j": 10.0, "epsilon": 1.0, "V": 0.01}
    assert cfg["hbar"] == 1.0
    with pytest.raises(ConfigError):
        resolve_config({"model": {"name": "lipkin"}, "pipeline": "rpa", "hbar": 0})
