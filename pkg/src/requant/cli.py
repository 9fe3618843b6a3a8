"""Batch front end: ``requant run <config.json> [--out DIR] [--threads K]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import models as M
from .errors import RequantError
from .flow import IntegratorOptions, integrate_flow
from .hilbert import spectral_projector
from .manifold import hamilton_function, hamilton_gradient, hessian
from .orbits import QuantizedOrbit, cylinder_quantization, detect_closed_orbit, quantize_family
from .requantizer import angular_project, requantize
from .rpa import find_minimum, linearize, rpa_state
from .variational import (build_action_angle_chart, multiplier_residual, solve_family,
                          write_cranking_csv)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

PIPELINES = ("minimize", "evolve", "quantize", "requantize", "rpa", "crank", "project", "spectrum")

CSV_HELP = """CSV outputs (written to --out):
  evolve     trajectory.csv  t, x_1..x_2N, energy, theta
  crank      cranking.csv    I_target, lambda, energy, achieved
  spectrum   spectrum.csv    index, eigenvalue
"""

MODEL_DEFAULTS = {
    "oscillator": {"omega": 1.0, "mass": 1.0, "truncation": 40, "z_max": 3.0},
    "lipkin": {"j": 10.0, "epsilon": 1.0, "V": 0.01},
    "rotor": {"j": 3.0, "epsilon": 1.0},
    "cylinder": {"eigenvalues": None, "psi0": None},
}

INTEGRATOR = {"rtol": 1e-10, "atol": 1e-12}
FAMILY = {"n": [0, 1, 2], "s_range": [0.0, 2.5], "origin": None, "direction": None, "n_scan": 9,
          "t_max": None, "closure_tol": 1e-6, "quantization_tol": 1e-8, "n_samples": 257}

OPTION_DEFAULTS = {
    "minimize": {"x_init": None, "grad_tol": 1e-10},
    "evolve": {"x0": None, "t_end": 20.0, "n_samples": 201, "csv": "trajectory.csv", **INTEGRATOR},
    "quantize": {**FAMILY, **INTEGRATOR},
    "requantize": {**FAMILY, **INTEGRATOR, "samples": 256, "top": 5},
    "rpa": {"x_init": None, "mode": 0, "samples": 256, **INTEGRATOR},
    "crank": {"targets": None, "x_init": None, "constraint_tol": 1e-8, "csv": "cranking.csv"},
    "project": {"m": None, "nodes": None, "x_init": None, "samples": 256, "constraint_tol": 1e-8,
                **INTEGRATOR},
    "spectrum": {"csv": "spectrum.csv"},
}

POSITIVE = {"grad_tol", "rtol", "atol", "closure_tol", "quantization_tol", "constraint_tol", "t_end",
            "t_max", "omega", "mass", "z_max", "epsilon", "truncation", "n_samples", "samples", "n_scan"}


class ConfigError(Exception):
    pass


def _merge(section: str, given, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"{section} must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")
    out = {**defaults, **given}
    for k, v in out.items():
        if k in POSITIVE and v is not None:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"{section}.{k} must be a positive number")
    return out


def resolve_config(raw: dict) -> dict:
    """Validate a raw config and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - {"model", "pipeline", "options", "hbar"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    model = raw.get("model")
    if not isinstance(model, dict) or set(model) - {"name", "params"} or "name" not in model:
        raise ConfigError("model must be {\"name\": ..., \"params\": {...}}")
    name = model["name"]
    if name not in MODEL_DEFAULTS:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODEL_DEFAULTS)}")
    params = _merge("model.params", model.get("params"), MODEL_DEFAULTS[name])
    if name == "cylinder" and (params["eigenvalues"] is None or params["psi0"] is None):
        raise ConfigError("cylinder needs eigenvalues and psi0")
    pipeline = raw.get("pipeline")
    if pipeline not in PIPELINES:
        raise ConfigError(f"pipeline must be one of {', '.join(PIPELINES)}")
    options = _merge("options", raw.get("options"), OPTION_DEFAULTS[pipeline])
    if "s_range" in options:
        lo, hi = options["s_range"]
        if not hi > lo:
            raise ConfigError("options.s_range is empty")
    hbar = raw.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or not hbar > 0:
        raise ConfigError("hbar must be positive")
    return {"model": {"name": name, "params": params}, "pipeline": pipeline, "options": options,
            "hbar": float(hbar)}


# ---------------------------------------------------------------------------
# output

def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = format(v, ".17g")
    return s if any(c in s for c in ".en") else s + ".0"


def dumps(obj, indent: int = 2, level: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{dumps(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


# ---------------------------------------------------------------------------
# model and chart construction

def _complex_list(values):
    out = []
    for v in values:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(v[0], v[1]))
        elif isinstance(v, (int, float)):
            out.append(complex(v))
        else:
            raise ConfigError("psi0 entries must be numbers or [re, im] pairs")
    return np.array(out)


def build_model(cfg: dict):
    name, p, hbar = cfg["model"]["name"], cfg["model"]["params"], cfg["hbar"]
    if name == "oscillator":
        model = M.OscillatorModel(omega=p["omega"], mass=p["mass"], truncation=int(p["truncation"]),
                                  hbar=hbar)
        return model, M.glauber_chart(model, p["z_max"])
    if name == "lipkin":
        model = M.LipkinModel(j=p["j"], epsilon=p["epsilon"], V=p["V"], hbar=hbar)
        return model, M.spin_coherent_chart(model)
    if name == "rotor":
        model = M.RotorModel(j=p["j"], epsilon=p["epsilon"], hbar=hbar)
        return model, M.spin_coherent_chart(model)
    ev = [float(v) for v in p["eigenvalues"]]
    psi0 = _complex_list(p["psi0"])
    if len(psi0) != len(ev):
        raise ConfigError("psi0 length differs from the number of eigenvalues")
    model = M.CylinderModel.from_eigenvalues(ev, psi0, hbar)
    return model, model.chart()


def _generator(cfg, model):
    if cfg["model"]["name"] == "rotor":
        return model.J
    if cfg["model"]["name"] == "lipkin":
        return M.HermitianOperator(model.operators[0])
    raise ConfigError(f"pipeline {cfg['pipeline']} needs a spin model (rotor or lipkin)")


def _vec(v, n, default):
    if v is None:
        return np.asarray(default, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ConfigError(f"expected a point with {n} coordinates")
    return v


def _default_point(cfg, model, chart):
    if cfg["model"]["name"] == "cylinder":
        return chart.coordinates(model.psi0)
    return np.zeros(chart.n_params)


def _opts(o) -> IntegratorOptions:
    return IntegratorOptions(rtol=o["rtol"], atol=o["atol"])


# ---------------------------------------------------------------------------
# pipelines

def run_spectrum(cfg, model, chart, out, threads):
    spec = model.H.spectrum
    path = out / cfg["options"]["csv"]
    with open(path, "w") as fh:
        fh.write("index,eigenvalue\n")
        for k, e in enumerate(spec.eigenvalues):
            fh.write(f"{k},{format(float(e), '.17g')}\n")
    return {"eigenvalues": list(spec.eigenvalues), "csv": path.name}


def run_minimize(cfg, model, chart, out, threads):
    o = cfg["options"]
    x0 = _vec(o["x_init"], chart.n_params, _default_point(cfg, model, chart))
    x = find_minimum(chart, model.H, x0, grad_tol=o["grad_tol"])
    return {"x_star": list(x), "energy": hamilton_function(chart, model.H, x),
            "gradient_norm": float(np.linalg.norm(hamilton_gradient(chart, model.H, x))),
            "hessian_eigenvalues": list(np.linalg.eigvalsh(hessian(chart, model.H, x)))}


def run_evolve(cfg, model, chart, out, threads):
    o = cfg["options"]
    default = {"oscillator": [1.0, 0.0], "lipkin": [0.3, 0.0], "rotor": [0.3, 0.0]}.get(
        cfg["model"]["name"], _default_point(cfg, model, chart))
    x0 = _vec(o["x0"], chart.n_params, default)
    traj = integrate_flow(chart, model.H, x0, o["t_end"], _opts(o),
                          t_eval=np.linspace(0, o["t_end"], int(o["n_samples"])))
    path = out / o["csv"]
    traj.to_csv(path)
    return {"x0": list(x0), "final_point": list(traj.points[-1]), "energy": traj.energy,
            "max_energy_drift": traj.max_energy_drift, "final_theta": float(traj.theta[-1]),
            "csv": path.name}


def _quantize(cfg, model, chart, threads):
    o = cfg["options"]
    if cfg["model"]["name"] == "cylinder":
        q = cylinder_quantization(M.cylinder_orbit(model, int(o["n_samples"])), model.H, model.hbar)
        return [q], {"accepted": q.residual <= o["quantization_tol"]}
    origin = _vec(o["origin"], chart.n_params, np.zeros(chart.n_params))
    direction = _vec(o["direction"], chart.n_params, np.eye(chart.n_params)[0])
    t_max = o["t_max"]
    if t_max is None:
        x_star = find_minimum(chart, model.H, origin)
        t_max = 1.5 * 2 * np.pi / linearize(chart, model.H, x_star)[0].omega
        o["t_max"] = float(t_max)
    qs = quantize_family(chart, model.H, lambda s: origin + s * direction, o["s_range"], o["n"], t_max,
                         closure_tol=o["closure_tol"], quantization_tol=o["quantization_tol"],
                         n_scan=int(o["n_scan"]), threads=threads, opts=_opts(o),
                         n_samples=int(o["n_samples"]))
    return qs, {}


def run_quantize(cfg, model, chart, out, threads):
    qs, extra = _quantize(cfg, model, chart, threads)
    orbits = []
    for q in qs:
        doc = q.to_json()
        if q.parameter is not None:
            doc["family_parameter"] = q.parameter
        if cfg["model"]["name"] == "oscillator":
            z = q.orbit.initial_point
            doc["abs_z0_sq"] = float(z[0] ** 2 + z[1] ** 2)
        orbits.append(doc)
    return {"orbits": orbits, **extra}


def run_requantize(cfg, model, chart, out, threads):
    o = cfg["options"]
    qs, extra = _quantize(cfg, model, chart, threads)
    spec = model.H.spectrum
    states = []
    for q in qs:
        r = requantize(q, int(o["samples"]), model.H)
        states.append({"orbit": q.to_json(), **r.to_json(spec, int(o["top"]))})
    return {"states": states, **extra}


def run_rpa(cfg, model, chart, out, threads):
    o = cfg["options"]
    x0 = _vec(o["x_init"], chart.n_params, _default_point(cfg, model, chart))
    x = find_minimum(chart, model.H, x0)
    if np.linalg.norm(x) > 1e-12 and hasattr(chart, "recentered"):
        chart, x = chart.recentered(x), np.zeros(chart.n_params)
    modes = linearize(chart, model.H, x)
    if not 0 <= o["mode"] < len(modes):
        raise ConfigError(f"mode index {o['mode']} out of range ({len(modes)} modes)")
    spec = model.H.spectrum
    sol = rpa_state(modes[o["mode"]], chart, x, model.H, int(o["samples"]), _opts(o), spec.vector(1))
    gap = float(spec.eigenvalues[1] - spec.eigenvalues[0])
    return {"x_star": list(x), "ground_energy": hamilton_function(chart, model.H, x),
            "modes": [m.omega for m in modes], **sol.to_json(), "exact_gap": gap,
            "relative_error": abs(sol.excitation_energy - gap) / gap}


def _spin_init(cfg, chart, given):
    return _vec(given, chart.n_params, chart.coordinates(np.pi / 2))


def run_crank(cfg, model, chart, out, threads):
    o = cfg["options"]
    J = _generator(cfg, model)
    ev = J.spectrum.eigenvalues
    targets = o["targets"]
    if targets is None:
        targets = [m * model.hbar for m in np.arange(np.ceil(ev[0] / model.hbar + 1e-9),
                                                    ev[-1] / model.hbar - 1e-9)]
        o["targets"] = [float(t) for t in targets]
    sols = solve_family(chart, model.H, [J], targets, _spin_init(cfg, chart, o["x_init"]), threads,
                        o["constraint_tol"])
    path = out / o["csv"]
    write_cranking_csv(sols, path)
    rows = []
    for s in sols:
        rows.append({**s.to_json(), "multiplier_residual": multiplier_residual(chart, model.H, s, [J])})
    return {"solutions": rows, "csv": path.name}


def run_project(cfg, model, chart, out, threads):
    o = cfg["options"]
    J = _generator(cfg, model)
    hbar, j = model.hbar, model.j
    nodes = o["nodes"]
    if nodes is None:
        nodes = list(hbar * np.linspace(-(j - 0.5), j - 0.5, int(round(4 * j - 1))))
        o["nodes"] = [float(v) for v in nodes]
    ms = o["m"]
    if ms is None:
        ms = [float(m) for m in np.arange(-j + 1, j)]
        o["m"] = ms
    fam = solve_family(chart, model.H, [J], nodes, _spin_init(cfg, chart, o["x_init"]), threads,
                       o["constraint_tol"])
    aa = build_action_angle_chart(chart, fam, [J])
    spec = J.spectrum
    results = []
    for m in ms:
        I = m * hbar
        leaf = aa.embed([0.0, I])
        proj = angular_project(J, leaf, m, hbar, samples=int(o["samples"]))
        exact = spectral_projector(spec, I).matrix @ leaf
        pn = np.linalg.norm(proj)
        doc = {"m": m, "projected_norm": float(pn),
               "eigen_residual": float(np.linalg.norm(J.matrix @ proj - I * proj) / pn),
               "projector_mismatch": float(np.linalg.norm(proj - exact))}
        lam = aa.frequencies(model.H, I)[0]
        doc["frequency"] = float(lam)
        if abs(lam) > 1e-12:
            T = 2 * np.pi / abs(lam)
            orbit = detect_closed_orbit(aa, model.H, [0.0, I], 1.5 * T, opts=_opts(o))
            n = int(round(orbit.winding))
            r = requantize(QuantizedOrbit(orbit, n, abs(orbit.winding - n)), int(o["samples"]), model.H)
            doc.update({"period": orbit.period, "winding": orbit.winding,
                        "time_average_overlap": float(abs(np.vdot(proj / pn, r.normalized))),
                        "time_average_norm": r.norm})
        results.append(doc)
    return {"nodes": list(nodes), "projections": results}


RUNNERS = {"minimize": run_minimize, "evolve": run_evolve, "quantize": run_quantize,
           "requantize": run_requantize, "rpa": run_rpa, "crank": run_crank, "project": run_project,
           "spectrum": run_spectrum}


def run(config_path, out_dir, threads: int = 1) -> int:
    """Execute one pipeline; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"status": "ok"}
    cfg = None
    try:
        try:
            raw = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = resolve_config(raw)
        model, chart = build_model(cfg)
        results = RUNNERS[cfg["pipeline"]](cfg, model, chart, out, threads)
        report.update({"config": cfg, "results": results})
        code = 0
    except ConfigError as exc:
        report = {"status": "error", "error": {"type": "ConfigError", "message": str(exc)}, "config": cfg}
        code = EXIT_CONFIG
    except (RequantError, ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        report = {"status": "error", "error": {"type": type(exc).__name__, "message": str(exc)},
                  "config": cfg}
        code = EXIT_NUMERICAL
    (out / "report.json").write_text(dumps(report) + "\n")
    if code:
        print(f"requant: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="requant", epilog=CSV_HELP,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="execute a pipeline from a JSON config", epilog=CSV_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config")
    p.add_argument("--out", default="requant-out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    return run(args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
