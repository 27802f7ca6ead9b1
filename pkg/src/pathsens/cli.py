"""Command-line front end.

Commands::

    pathsens schlogl   [options]   bistable reaction network (SSA, H1/H2, exact oracle)
    pathsens langevin  [options]   Morse-chain Langevin dynamics (BBK, H2/F2)
    pathsens zgb       [options]   ZGB lattice CO oxidation (SSA, H1)
    pathsens exact     [options]   exact oracles on finite or birth-death chains

Settings come from built-in defaults, then an optional YAML/JSON file
(``--config``; a previous report is accepted and its embedded config
replayed), then command-line flags. Reports are JSON; traces, vector
fields and histograms are CSV. Output goes to ``--out``, else
``$PATHSENS_OUT``, else ``./pathsens_out``.

Exit codes: 0 success, 2 configuration error, 3 numerical error (absolute
continuity, absorbing state), 4 partial results.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import analysis, estimators, exact
from .core import (AbsoluteContinuityError, AbsorbingStateError, ConfigError, ParameterVector, PathSensError,
                   Perturbation, RngStream)
from .models import langevin as lang
from .models import schlogl as sch
from .models import zgb
from .simulate import BbkDriver, SsaDriver, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4
OUT_ENV = "PATHSENS_OUT"

COMMON_DEFAULTS = {
    "directions": "axes",
    "both_signs": True,
    "seed": 12345,
    "replicas": 1,
    "log_scale": False,
    "trace_every": None,
    "workers": 1,
    "n_batches": 32,
}

DEFAULTS = {
    "schlogl": {
        "model": "schlogl", "params": list(sch.DEFAULT_THETA), "epsilon0": 0.05, "estimator": "h1",
        "horizon": 1e6, "horizon_unit": "jumps", "burn_in": 0.0,
        "settings": {"omega": sch.DEFAULT_OMEGA, "x0": sch.DEFAULT_X0, "x_max": 200},
    },
    "langevin": {
        "model": "langevin", "params": list(lang.DEFAULT_THETA), "epsilon0": 0.05, "estimator": "h2",
        "horizon": 1e4, "horizon_unit": "time", "burn_in": 100.0,
        "settings": {"n_particles": 3, "dim": 1, "mass": 1.0, "gamma": 1.0, "sigma": 0.1, "dt": 0.01,
                     "alpha": 0.0, "level_sets": True},
    },
    "zgb": {
        "model": "zgb", "params": list(zgb.DEFAULT_THETA), "epsilon0": 0.02, "estimator": "h1",
        "horizon": 100.0, "horizon_unit": "time", "burn_in": 10.0,
        "settings": {"size": zgb.DEFAULT_SIZE, "snapshots": False, "phase_diagram": None},
    },
    "exact": {
        "model": "schlogl", "params": None, "epsilon0": 0.05, "estimator": "h1",
        "horizon": None, "horizon_unit": None, "burn_in": 0.0,
        "settings": {"omega": sch.DEFAULT_OMEGA, "x_max": 200, "matrix": None, "matrix_eps": None,
                     "kind": "probability", "verify": None, "n_states": 3},
    },
}


# --------------------------------------------------------------------------
# configuration


def _parse_vector(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _parse_params(text: str, names: tuple) -> list[float] | dict:
    if "=" in text:
        out = {}
        for item in text.split(","):
            key, _, val = item.partition("=")
            out[key.strip()] = float(val)
        return out
    return _parse_vector(text)


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(val)
    return out


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # replaying a report
    return data


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(COMMON_DEFAULTS)
    cfg.update(copy.deepcopy(DEFAULTS[command]))
    if args.config:
        loaded = _load_config_file(args.config)
        settings = loaded.pop("settings", None) or {}
        unknown = set(loaded) - set(cfg) - {"command", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
        cfg["settings"].update(settings)
    flag_map = {"model": args.model, "epsilon0": args.epsilon0, "estimator": args.estimator,
                "horizon": args.horizon, "burn_in": args.burn_in, "seed": args.seed, "replicas": args.replicas,
                "trace_every": args.trace_every, "workers": args.workers, "out": args.out,
                "horizon_unit": args.horizon_unit}
    for key, val in flag_map.items():
        if val is not None:
            cfg[key] = val
    if args.params is not None:
        cfg["params"] = _parse_params(args.params, ())
    if args.directions is not None:
        d = args.directions.strip()
        cfg["directions"] = d if d in ("axes", "none", "positive") else [_parse_vector(v) for v in d.split(";")]
    if args.log_scale:
        cfg["log_scale"] = True
    cfg["settings"].update(_parse_set(args.set))
    cfg.setdefault("out", None)
    cfg["out"] = cfg["out"] or os.environ.get(OUT_ENV) or "pathsens_out"
    validate_config(command, cfg)
    return cfg


def validate_config(command: str, cfg: dict) -> None:
    if command != "exact" and cfg["model"] != command:
        raise ConfigError(f"command {command!r} cannot run model {cfg['model']!r}")
    if cfg["estimator"] not in ("h1", "h2"):
        raise ConfigError("estimator must be h1 or h2")
    if command == "langevin" and cfg["estimator"] == "h1":
        raise ConfigError("the Langevin chain has no enumerable target set; use --estimator h2")
    if cfg["horizon"] is not None and not float(cfg["horizon"]) > 0:
        raise ConfigError("horizon must be positive")
    if cfg["horizon_unit"] not in (None, "time", "jumps"):
        raise ConfigError("horizon_unit must be 'time' or 'jumps'")
    if command == "langevin" and cfg["horizon_unit"] != "time":
        raise ConfigError("the Langevin horizon is given in time units")
    if not float(cfg["burn_in"]) >= 0:
        raise ConfigError("burn-in must be non-negative")
    if int(cfg["replicas"]) < 1 or int(cfg["workers"]) < 1:
        raise ConfigError("replicas and workers must be at least 1")
    if cfg["trace_every"] is not None and int(cfg["trace_every"]) < 1:
        raise ConfigError("trace-every must be a positive integer")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")


def build_theta(cfg: dict, names: tuple) -> ParameterVector:
    p = cfg["params"]
    if isinstance(p, dict):
        missing = set(names) - set(p)
        extra = set(p) - set(names)
        if missing or extra:
            raise ConfigError(f"parameters must be exactly {names}; missing {sorted(missing)}, unknown {sorted(extra)}")
        vals = [float(p[n]) for n in names]
    else:
        vals = [float(v) for v in p]
    if len(vals) != len(names):
        raise ConfigError(f"expected {len(names)} parameters {names}, got {len(vals)}")
    return ParameterVector(vals, names)


def build_directions(cfg: dict, theta: ParameterVector) -> list[Perturbation]:
    d = cfg["directions"]
    eps0 = float(cfg["epsilon0"])
    if d == "none" or d is None:
        dirs = []
    elif d in ("axes", "positive"):
        dirs = []
        for i in range(theta.k):
            dirs.append(Perturbation.axis(theta.k, i, eps0, theta.names))
            if d == "axes" and cfg.get("both_signs", True):
                dirs.append(Perturbation.axis(theta.k, i, -eps0, theta.names))
    else:
        dirs = []
        for v in d:
            vec = np.asarray(v, dtype=float)
            if vec.size != theta.k:
                raise ConfigError(f"direction {list(v)} has {vec.size} components, expected {theta.k}")
            dirs.append(Perturbation(vec))
    if cfg["log_scale"]:
        dirs = [Perturbation(estimators.log_scale_perturbation(p, theta), "log:" + p.label) for p in dirs]
    return dirs


# --------------------------------------------------------------------------
# replicas


def _hook_classes(kind: str, estimator: str):
    if kind == "jump":
        return (estimators.CtmcRerH1, estimators.CtmcFimH1) if estimator == "h1" else (
            estimators.CtmcRerH2, estimators.CtmcFimH2)
    return estimators.ChainRerH2, estimators.ChainFimH2


def _run_replica(job: dict):
    """One independent replica; module-level so worker processes can run it."""
    model, theta, dirs = job["model"], job["theta"], job["directions"]
    rer_cls, fim_cls = _hook_classes(job["kind"], job["estimator"])
    kw = {"n_batches": job["n_batches"], "trace_every": job["trace_every"], "trace": True}
    if job["kind"] == "chain":
        kw["per_unit_time"] = True
    hooks = [fim_cls(model, theta, **kw)]
    if dirs:
        hooks.append(rer_cls(model, theta, dirs, **kw))
    rng = RngStream(job["seed"], job["replica"])
    if job["kind"] == "jump":
        h = job["horizon"]
        driver = SsaDriver(model, theta, job["state"], rng, burn_in=job["burn_in"],
                           horizon_time=h if job["horizon_unit"] == "time" else None,
                           horizon_jumps=int(h) if job["horizon_unit"] == "jumps" else None)
    else:
        driver = BbkDriver(model, theta, job.get("state"), rng, horizon_time=job["horizon"],
                           burn_in_time=job["burn_in"])
    res = run(driver, hooks)
    return {"hooks": hooks, "partial": res.partial, "error": res.error, "n": res.n_transitions,
            "horizon": res.horizon, "final_state": res.final_state}


def run_replicas(jobs: list[dict], workers: int) -> list[dict]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_run_replica, jobs))
    return [_run_replica(j) for j in jobs]


def merge_replicas(results: list[dict]):
    """Merge accumulators in replica-id order; returns (fim hook, rer hook or None)."""
    fim = copy.deepcopy(results[0]["hooks"][0])
    rer = copy.deepcopy(results[0]["hooks"][1]) if len(results[0]["hooks"]) > 1 else None
    for r in results[1:]:
        fim.accs = [a.merge(b) for a, b in zip(fim.accs, r["hooks"][0].accs)]
        if rer is not None:
            rer.accs = [a.merge(b) for a, b in zip(rer.accs, r["hooks"][1].accs)]
    return fim, rer


def _replica_spread(results: list[dict], idx: int, getter) -> dict:
    vals = np.array([getter(r["hooks"][idx]) for r in results])
    n = vals.shape[0]
    se = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(vals.shape[1:], math.nan)
    return {"values": vals.tolist(), "mean": vals.mean(axis=0).tolist(), "std_error": np.asarray(se).tolist()}


# --------------------------------------------------------------------------
# output


def _out_dir(cfg: dict, command: str) -> Path:
    path = Path(cfg["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2)
        fh.write("\n")


def write_traces(path: Path, hook, labels: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["clock"] + labels)
        for t, vals in hook.trace_points():
            flat = []
            for v in vals:
                flat.extend(np.ravel(v).tolist())
            w.writerow([repr(float(t))] + [repr(float(x)) for x in flat])


def _fim_section(F: np.ndarray, se, theta: ParameterVector, log_scale: bool) -> dict:
    rep = analysis.jacobi_eigh(F)
    out = {"k": theta.k, "names": list(theta.names), "matrix": F.ravel().tolist(),
           "eigen": rep.to_json(), "design": analysis.design_criteria(F)}
    if se is not None:
        out["std_error"] = np.asarray(se).ravel().tolist()
    if log_scale:
        Fl = estimators.log_scale_fim(F, theta)
        out["log_scale"] = {"matrix": Fl.ravel().tolist(), "eigen": analysis.jacobi_eigh(Fl).to_json()}
    return out


def _common_report(command: str, cfg: dict, theta: ParameterVector, results: list[dict], dirs) -> dict:
    fim, rer = merge_replicas(results)
    report = {"command": command, "config": cfg, "theta": theta.as_dict(),
              "replicas": len(results), "transitions": sum(r["n"] for r in results),
              "horizon_per_replica": [r["horizon"] for r in results]}
    F = fim.estimate()
    report["fim"] = _fim_section(F, fim.std_error(), theta, cfg["log_scale"])
    report["fim"]["samples"] = fim.samples
    if len(results) > 1:
        report["fim"]["replicas"] = _replica_spread(results, 0, lambda h: h.estimate())
    report["rer"] = []
    if rer is not None:
        for i, e in enumerate(rer.estimates()):
            rec = e.to_json()
            rec["quadratic_from_estimated_fim"] = estimators.rer_quadratic(dirs[i], F)
            report["rer"].append(rec)
        if len(results) > 1:
            report["rer_replicas"] = _replica_spread(results, 1, lambda h: h.replica_values())
    return report, fim, rer


def _partial(results) -> tuple[bool, BaseException | None]:
    for r in results:
        if r["partial"]:
            return True, r["error"]
    return False, None


# --------------------------------------------------------------------------
# commands


def cmd_schlogl(cfg: dict) -> tuple[dict, int]:
    s = cfg["settings"]
    model = sch.SchloglModel(float(s["omega"]))
    theta = build_theta(cfg, sch.PARAM_NAMES)
    model.check_admissible(theta.values)
    dirs = build_directions(cfg, theta)
    jobs = [dict(kind="jump", model=model, theta=theta.values, directions=dirs, estimator=cfg["estimator"],
                 n_batches=cfg["n_batches"], trace_every=cfg["trace_every"], seed=cfg["seed"], replica=r,
                 state=int(s["x0"]), burn_in=float(cfg["burn_in"]), horizon=float(cfg["horizon"]),
                 horizon_unit=cfg["horizon_unit"]) for r in range(int(cfg["replicas"]))]
    # validate every direction before any simulation starts
    _hook_classes("jump", cfg["estimator"])[0](model, theta.values, dirs) if dirs else None
    results = run_replicas(jobs, int(cfg["workers"]))
    report, fim, rer = _common_report("schlogl", cfg, theta, results, dirs)
    out = _out_dir(cfg, "schlogl")
    mu = exact.schlogl_stationary(theta.values, float(s["omega"]), int(s["x_max"]))
    F_exact = exact.schlogl_exact(theta.values, None, float(s["omega"]), mu.size - 1)
    report["exact"] = {"fim": _fim_section(F_exact, None, theta, cfg["log_scale"]), "x_max": mu.size - 1}
    for i, rec in enumerate(report["rer"]):
        rec["exact"] = exact.schlogl_exact(theta.values, dirs[i].vector, float(s["omega"]), mu.size - 1)
        rec["quadratic_from_exact_fim"] = estimators.rer_quadratic(dirs[i], F_exact)
    report["ordering"] = [r["direction"] for r in sorted(report["rer"], key=lambda r: -r["estimate"])]
    _emit_traces(out, "schlogl", results, theta, dirs)
    with open(out / "schlogl_stationary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "mu"])
        for x, m in enumerate(mu):
            w.writerow([x, repr(float(m))])
    partial, err = _partial(results)
    return _finish(report, out / "schlogl_report.json", partial, err)


def _emit_traces(out: Path, name: str, results, theta: ParameterVector, dirs) -> None:
    hooks = results[0]["hooks"]
    labels = [f"F[{a},{b}]" for a in theta.names for b in theta.names]
    write_traces(out / f"{name}_fim_trace.csv", hooks[0], labels)
    if len(hooks) > 1:
        write_traces(out / f"{name}_rer_trace.csv", hooks[1], [d.label for d in dirs])


def _finish(report: dict, path: Path, partial: bool, err) -> tuple[dict, int]:
    report["partial"] = partial
    if err is not None:
        report["error"] = f"{type(err).__name__}: {err}"
    write_json(path, report)
    if partial:
        return report, EXIT_NUMERICAL if isinstance(err, AbsoluteContinuityError) else EXIT_PARTIAL
    return report, EXIT_OK


def cmd_langevin(cfg: dict) -> tuple[dict, int]:
    s = cfg["settings"]
    settings = lang.LangevinSettings(int(s["n_particles"]), int(s["dim"]), float(s["mass"]), float(s["gamma"]),
                                     float(s["sigma"]), float(s["dt"]), float(s["alpha"]))
    model = lang.LangevinModel(settings)
    theta = build_theta(cfg, lang.PARAM_NAMES)
    model.check_admissible(theta.values)
    dirs = build_directions(cfg, theta)
    if dirs:
        estimators.ChainRerH2(model, theta.values, dirs)
    jobs = [dict(kind="chain", model=model, theta=theta.values, directions=dirs, estimator="h2",
                 n_batches=cfg["n_batches"], trace_every=cfg["trace_every"], seed=cfg["seed"], replica=r,
                 burn_in=float(cfg["burn_in"]), horizon=float(cfg["horizon"]))
            for r in range(int(cfg["replicas"]))]
    results = run_replicas(jobs, int(cfg["workers"]))
    report, fim, rer = _common_report("langevin", cfg, theta, results, dirs)
    report["units"] = "per unit time (per-step values divided by dt)"
    report["ordering"] = [r["direction"] for r in sorted(report["rer"], key=lambda r: -r["estimate"])]
    if s.get("level_sets", True):
        report["level_sets"] = analysis.level_set_records(fim.estimate(), theta.names)
    out = _out_dir(cfg, "langevin")
    _emit_traces(out, "langevin", results, theta, dirs)
    partial, err = _partial(results)
    return _finish(report, out / "langevin_report.json", partial, err)


def _zgb_lattice(size: int, seed: int, theta, burn_in: float, horizon: float):
    model = zgb.ZgbModel()
    driver = SsaDriver(model, theta, zgb.ZgbLattice.empty(size), RngStream(seed, 0), burn_in=burn_in,
                       horizon_time=horizon)
    res = run(driver)
    return res.final_state


def cmd_zgb(cfg: dict) -> tuple[dict, int]:
    s = cfg["settings"]
    size = int(s["size"])
    model = zgb.ZgbModel()
    theta = build_theta(cfg, zgb.PARAM_NAMES)
    model.check_admissible(theta.values)
    dirs = build_directions(cfg, theta)
    rer_cls = estimators.CtmcRerH1 if cfg["estimator"] == "h1" else estimators.CtmcRerH2
    if dirs:
        rer_cls(model, theta.values, dirs)
    jobs = [dict(kind="jump", model=model, theta=theta.values, directions=dirs, estimator=cfg["estimator"],
                 n_batches=cfg["n_batches"], trace_every=cfg["trace_every"], seed=cfg["seed"], replica=r,
                 state=zgb.ZgbLattice.empty(size), burn_in=float(cfg["burn_in"]), horizon=float(cfg["horizon"]),
                 horizon_unit="time") for r in range(int(cfg["replicas"]))]
    results = run_replicas(jobs, int(cfg["workers"]))
    report, fim, rer = _common_report("zgb", cfg, theta, results, dirs)
    report["coverages"] = [r["final_state"].coverages() for r in results]
    F = fim.estimate()
    report["fim"]["offdiagonal_max_abs"] = float(np.max(np.abs(F - np.diag(np.diag(F)))))
    report["ordering"] = [r["direction"] for r in sorted(report["rer"], key=lambda r: -r["estimate"])]
    out = _out_dir(cfg, "zgb")
    _emit_traces(out, "zgb", results, theta, dirs)
    if s.get("snapshots"):
        eps0 = float(cfg["epsilon0"])
        variants = {"unperturbed": theta.values,
                    "k1_perturbed": theta.values + np.array([eps0, 0.0]),
                    "k2_perturbed": theta.values + np.array([0.0, eps0])}
        report["snapshots"] = {}
        for name, th in variants.items():
            lat = _zgb_lattice(size, cfg["seed"], th, float(cfg["burn_in"]), float(cfg["horizon"]))
            path = out / f"zgb_snapshot_{name}.txt"
            np.savetxt(path, lat.spins, fmt="%d")
            report["snapshots"][name] = {"file": path.name, "theta": th.tolist(), "coverages": lat.coverages()}
    pd_grid = s.get("phase_diagram")
    if pd_grid:
        report["phase_diagram"] = _zgb_phase_diagram(pd_grid, cfg, out)
    partial, err = _partial(results)
    return _finish(report, out / "zgb_report.json", partial, err)


def zgb_fim_at(theta, size: int, seed: int, burn_in: float, horizon: float) -> np.ndarray:
    """FIM estimate of the ZGB model at one parameter point (one SSA run)."""
    model = zgb.ZgbModel()
    hook = estimators.CtmcFimH1(model, theta)
    run(SsaDriver(model, theta, zgb.ZgbLattice.empty(size), RngStream(seed, 0), burn_in=burn_in,
                  horizon_time=horizon), [hook])
    if hook.samples == 0:
        raise PathSensError("no transitions recorded")
    return hook.estimate()


def _zgb_phase_diagram(grid: dict, cfg: dict, out: Path) -> dict:
    try:
        k1 = np.linspace(*[float(v) for v in grid["k1"][:2]], int(grid["k1"][2]))
        k2 = np.linspace(*[float(v) for v in grid["k2"][:2]], int(grid["k2"][2]))
    except (KeyError, TypeError, ValueError, IndexError):
        raise ConfigError("phase_diagram needs k1: [lo, hi, n] and k2: [lo, hi, n]") from None
    size = int(grid.get("size", cfg["settings"]["size"]))
    horizon = float(grid.get("horizon", cfg["horizon"]))
    burn = float(grid.get("burn_in", cfg["burn_in"]))
    pts = analysis.grid_points([k1, k2])
    for p in pts:
        zgb.ZgbModel().check_admissible(p)
    diagram = analysis.phase_diagram(lambda th: zgb_fim_at(th, size, cfg["seed"], burn, horizon), pts,
                                     zgb.PARAM_NAMES)
    diagram.write_csv(out / "zgb_phase_diagram.csv")
    return {"file": "zgb_phase_diagram.csv", "points": len(pts),
            "valid": sum(p.valid for p in diagram.points),
            "errors": [p.error for p in diagram.points if not p.valid]}


def cmd_exact(cfg: dict) -> tuple[dict, int]:
    s = cfg["settings"]
    out = _out_dir(cfg, "exact")
    report = {"command": "exact", "config": cfg}
    model_name = cfg["model"]
    if s.get("verify") is not None:
        M = int(s["verify"])
        rng = RngStream(cfg["seed"], 0).generator()
        n = int(s.get("n_states", 3))
        P = rng.random((n, n)) + 0.05
        P /= P.sum(axis=1, keepdims=True)
        Pe = rng.random((n, n)) + 0.05
        Pe /= Pe.sum(axis=1, keepdims=True)
        if s.get("matrix"):
            P = exact.load_matrix(s["matrix"])
            Pe = exact.load_matrix(s["matrix_eps"]) if s.get("matrix_eps") else P
        brute = exact.brute_force_path_re(P, Pe, M)
        rer = exact.exact_rer_chain(P, Pe)
        r0 = exact.stationary_relative_entropy(exact.finite_stationary(P), exact.finite_stationary(Pe))
        report["verify"] = {"M": M, "brute_force": brute, "rer": rer, "stationary_re": r0,
                            "residual": abs(brute - (M * rer + r0))}
    if model_name == "schlogl":
        theta = build_theta({"params": cfg["params"] or list(sch.DEFAULT_THETA)}, sch.PARAM_NAMES)
        cfg["params"] = theta.values.tolist()
        omega = float(s["omega"])
        mu = exact.schlogl_stationary(theta.values, omega, int(s["x_max"]))
        xm = mu.size - 1
        F = exact.schlogl_exact(theta.values, None, omega, xm)
        report["fim"] = _fim_section(F, None, theta, cfg["log_scale"])
        dirs = build_directions(cfg, theta)
        sch.SchloglModel(omega)
        for d in dirs:
            sch.SchloglModel(omega).check_admissible(theta.values + d.vector)
        report["rer"] = [{"direction": d.label, "vector": d.vector.tolist(),
                          "exact": exact.schlogl_exact(theta.values, d.vector, omega, xm),
                          "quadratic": estimators.rer_quadratic(d, F)} for d in dirs]
        modes = [x for x in range(1, xm) if mu[x] > mu[x - 1] and mu[x] >= mu[x + 1]]
        report["stationary"] = {"file": "exact_stationary.csv", "x_max": xm, "modes": modes}
        with open(out / "exact_stationary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "mu"])
            for x, m in enumerate(mu):
                w.writerow([x, repr(float(m))])
    elif model_name == "finite":
        if not s.get("matrix"):
            raise ConfigError("model 'finite' needs settings.matrix (a whitespace-separated matrix file)")
        kind = s.get("kind", "probability")
        P = exact.load_matrix(s["matrix"])
        Pe = exact.load_matrix(s["matrix_eps"]) if s.get("matrix_eps") else P
        mu = exact.finite_stationary(P, kind)
        report["stationary"] = mu.tolist()
        report["rer"] = exact.exact_rer_chain(P, Pe, mu) if kind == "probability" else exact.exact_rer_ctmc(P, Pe, mu)
        if kind == "probability":
            mue = exact.finite_stationary(Pe, kind)
            report["stationary_re"] = exact.stationary_relative_entropy(mu, mue)
    elif model_name != "none":
        raise ConfigError(f"exact oracles are available for 'schlogl', 'finite' or 'none', not {model_name!r}")
    return _finish(report, out / "exact_report.json", False, None)


COMMANDS = {"schlogl": cmd_schlogl, "langevin": cmd_langevin, "zgb": cmd_zgb, "exact": cmd_exact}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pathsens", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("schlogl", "Schloegl model sensitivity run"),
                            ("langevin", "Langevin / Morse chain sensitivity run"),
                            ("zgb", "ZGB lattice sensitivity run"),
                            ("exact", "exact oracles")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML or JSON settings file (or a previous report to replay)")
        p.add_argument("--model", help="model selector (exact: schlogl | finite | none)")
        p.add_argument("--params", help="parameters, '3,1,2,3.5' or 'k1A=3,k2=1,...'")
        p.add_argument("--directions", help="'axes' (+-eps0 e_k), 'positive', 'none', or vectors 'a,b;c,d'")
        p.add_argument("--epsilon0", type=float, help="perturbation size for axis directions")
        p.add_argument("--estimator", choices=("h1", "h2"))
        p.add_argument("--horizon", type=float, help="simulated time, or jumps with --horizon-unit jumps")
        p.add_argument("--horizon-unit", choices=("time", "jumps"))
        p.add_argument("--burn-in", type=float, help="equilibration time discarded before estimation")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--log-scale", action="store_true", help="directions and FIM in log-parameters")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./pathsens_out)")
        p.add_argument("--trace-every", type=int, help="convergence checkpoint every n transitions "
                                                       "(default: geometric spacing)")
        p.add_argument("--workers", type=int, help="worker processes for replicas")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="model setting, repeatable")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args.command, args)
        report, code = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AbsoluteContinuityError, AbsorbingStateError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PathSensError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = {"command": args.command, "out": cfg["out"], "seconds": round(time.perf_counter() - t0, 2)}
    if report.get("ordering"):
        summary["ordering"] = report["ordering"]
    if "fim" in report and "eigen" in report["fim"]:
        summary["fim_eigenvalues"] = report["fim"]["eigen"]["eigenvalues"]
    print(json.dumps(_jsonable(summary)))
    return code


if __name__ == "__main__":
    sys.exit(main())
