"""Scenario runner.

Reads a flat TOML scenario (system id, parameters, initial state, partition,
diagnostics), executes the run, and writes ``trajectory.csv`` plus
``report.json``.  Every number in a report comes from a diagnostic operation;
the runner itself only assembles tables.

Verbs:
    run <file> [--out DIR]
    sweep <file> --param {tau,epsilon,grid_n} --values v1,v2,...
    list-systems
    self-test [--fast]

Exit codes: 0 pass, 1 diagnostic-tolerance failure, 2 configuration error,
3 solver failure.  GFL_THREADS caps sweep concurrency.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys as _sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import diagnostics as dg
from . import evi as evi_mod
from . import model_zoo as zoo
from . import rate_independent as ri
from .energies import eval_energy
from .errors import GradFlowError, InnerSolveFailed, ParseError, ValidationError
from .mms import GradientSystem, Trajectory, run_mms, run_mms_partition

EXIT_OK, EXIT_DIAG, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

CSV_HEADER_FIXED = ["t"]
CSV_TAIL = ["energy", "slope", "speed", "step_increment", "edi_cum_residual"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def load_scenario(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ParseError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"scenario file {path}: {exc}") from exc
    return data


def validate_scenario(sc: dict) -> dict:
    if "system" not in sc:
        raise ValidationError("scenario missing 'system'")
    if sc["system"] not in zoo.REGISTRY:
        raise ValidationError(f"unknown system id {sc['system']!r}")
    out = dict(sc)
    out.setdefault("params", {})
    out.setdefault("t0", 0.0)
    out.setdefault("T", 1.0)
    out.setdefault("seed", 0)
    out.setdefault("diagnostics", [])
    if "times" not in sc:
        out.setdefault("N", 40)
        if int(out["N"]) < 1:
            raise ValidationError("partition N must be a positive integer")
    if float(out["T"]) <= float(out["t0"]) and zoo.REGISTRY[sc["system"]].kind != "check":
        raise ValidationError("need T > t0")
    return out


def _initial_state(sc: dict, system, extra) -> np.ndarray:
    u0 = sc.get("u0")
    if isinstance(u0, list):
        return np.asarray(u0, dtype=float)
    dim = system.dim
    if u0 == "uniform" and sc["system"] == "fp_jko":
        grid = extra
        return np.full(dim, 1.0 / (grid.x_max - grid.x_min))
    if u0 == "random":
        rng = np.random.default_rng(int(sc["seed"]))
        return rng.uniform(-1.0, 1.0, dim)
    if u0 is None:
        return np.ones(dim)
    raise ValidationError(f"unsupported initial state {u0!r}")


def _build_system(sc: dict):
    built = zoo.build(sc["system"], **sc.get("params", {}))
    oracle = None
    extra = None
    if isinstance(built, tuple):
        system, second = built
        if callable(second) or hasattr(second, "__call__"):
            oracle = second
        extra = second
    else:
        system = built
    return system, oracle, extra


def _run_trajectory(sc: dict, system) -> Trajectory:
    u0 = _current_u0(sc)
    if "times" in sc:
        return run_mms_partition(system, u0, np.asarray(sc["times"], dtype=float),
                                 seed=int(sc["seed"]))
    return run_mms(system, u0, float(sc["t0"]), float(sc["T"]), int(sc["N"]),
                   seed=int(sc["seed"]))


def _current_u0(sc: dict) -> np.ndarray:
    return sc["_u0"]


def _trajectory_csv(path: Path, system: GradientSystem, traj: Trajectory,
                    edi_cum: Optional[np.ndarray]) -> None:
    n = traj.states.shape[1]
    header = CSV_HEADER_FIXED + [f"u_{i}" for i in range(n)] + CSV_TAIL
    try:
        series = dg.speed_and_slope_series(system, traj)
        speed, slope = series.speed, series.slope
    except GradFlowError:
        speed = slope = None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, t in enumerate(traj.times):
            row = [_fmt(t)] + [_fmt(x) for x in traj.states[k]]
            row.append(_fmt(eval_energy(system.energy, float(t), traj.states[k])))
            row.append(_fmt(slope[k]) if slope is not None else "")
            row.append(_fmt(speed[k]) if speed is not None else "")
            if k > 0 and traj.step_records:
                row.append(_fmt(traj.step_records[k - 1].increment_norm))
            else:
                row.append("")
            row.append(_fmt(edi_cum[k]) if edi_cum is not None else "")
            writer.writerow(row)


def _mms_diagnostics(sc: dict, system: GradientSystem, traj: Trajectory,
                     report: dict) -> tuple[bool, Optional[np.ndarray]]:
    all_ok = True
    edi_cum = None
    t0, T = traj.span
    for diag in sc["diagnostics"]:
        name = diag if isinstance(diag, str) else diag.get("name")
        opts = {} if isinstance(diag, str) else diag
        entry: dict = {"name": name}
        try:
            if name == "edb":
                rep = dg.edb_report(system, traj, t0, T,
                                    quad_nodes=int(opts.get("quad_nodes", 4 * len(traj.times))))
                entry.update(residual=rep.residual, rate_integral=rep.rate_integral,
                             slope_integral=rep.slope_integral,
                             work_integral=rep.work_integral, rule=rep.rule)
                entry["pass"] = rep.residual >= -float(opts.get("tol", 1e-6)) * (
                    1.0 + abs(rep.rate_integral) + abs(rep.slope_integral))
            elif name == "edi":
                res = dg.discrete_edi_check(system, traj)
                edi_cum = np.concatenate(([0.0], np.cumsum(res)))
                entry.update(min_residual=float(res.min()))
                entry["pass"] = bool(res.min() >= -float(opts.get("tol", 1e-9)))
            elif name == "chain_rule":
                t_mid = 0.5 * (t0 + T)
                val = dg.chain_rule_residual(system, traj, t_mid,
                                             h=float(opts.get("h", 1e-4)))
                entry.update(residual=val)
                entry["pass"] = val <= float(opts.get("tol", 1e-2))
            elif name == "cms":
                val = dg.cms_residual(system, traj, t0, T,
                                      slope_mode=opts.get("slope_mode", "auto"))
                entry.update(residual=val)
                entry["pass"] = val >= -float(opts.get("tol", 1e-6))
            elif name == "evi":
                lam = float(opts.get("lam", system.energy.lam))
                probes = evi_mod.default_probe_points(
                    traj, radius=float(opts.get("radius", 1.0)),
                    n_lattice=int(opts.get("probes", 20)), seed=int(sc["seed"]))
                rep = evi_mod.evi_probe_report(system, traj, lam, probes,
                                               max_pairs=int(opts.get("max_pairs", 400)))
                entry.update(worst_violation=rep.worst_violation, lam=lam,
                             n_probes=rep.n_probes)
                entry["pass"] = rep.worst_violation >= -float(opts.get("tol", 1e-8))
            elif name == "de_giorgi":
                tau = float(opts.get("tau", (T - t0) / max(len(traj.times) - 1, 1)))
                val = dg.de_giorgi_identity_residual(system, traj.states[0], tau,
                                                     t_base=t0)
                entry.update(residual=val)
                entry["pass"] = abs(val) <= float(opts.get("tol", 1e-3))
            elif name == "slope_estimate":
                margins = dg.slope_estimate_check(system, traj)
                entry.update(min_margin=float(margins.min()))
                entry["pass"] = bool(margins.min() >= -float(opts.get("tol", 1e-9)))
            elif name == "modulus":
                pairs = [(float(a), float(b))
                         for a, b in zip(traj.times[:-1:4], traj.times[1::4])]
                worst = dg.equicontinuity_check(system, traj, pairs)
                entry.update(worst=worst)
                entry["pass"] = worst <= float(opts.get("tol", 1e-9))
            elif name == "contractivity":
                lam = float(opts.get("lam", system.energy.lam))
                rng = np.random.default_rng(int(sc["seed"]) + 1)
                v0 = _current_u0(sc) + float(opts.get("offset", 0.1)) * rng.standard_normal(system.dim)
                partner = run_mms_partition(system, v0, traj.times, seed=int(sc["seed"]) + 1)
                ratio = evi_mod.contractivity_check(traj, partner, lam, sys=system,
                                                    sample_times=traj.times[::max(len(traj.times) // 20, 1)])
                entry.update(worst_ratio=ratio, lam=lam)
                entry["pass"] = ratio <= 1.0 + float(opts.get("tol", 1e-6))
            else:
                entry.update(skipped=f"unknown or inapplicable diagnostic {name!r}")
                entry["pass"] = True
            report["diagnostics"].append(entry)
            all_ok = all_ok and bool(entry.get("pass", True))
        except GradFlowError as exc:
            report["diagnostics"].append({"name": name, "skipped": str(exc), "pass": False})
            all_ok = False
    return all_ok, edi_cum


def _eris_run(sc: dict, system, oracle, report: dict) -> tuple[bool, ri.ErisTrajectory]:
    times = (np.asarray(sc["times"], dtype=float) if "times" in sc
             else np.linspace(float(sc["t0"]), float(sc["T"]), int(sc["N"]) + 1))
    u0 = sc.get("u0", [0.0])
    traj = ri.run_tims(system, np.asarray(u0, dtype=float), times,
                       warn_unstable_start=False)
    all_ok = True
    for diag in sc["diagnostics"]:
        name = diag if isinstance(diag, str) else diag.get("name")
        opts = {} if isinstance(diag, str) else diag
        entry: dict = {"name": name}
        if name == "stability":
            worst = float(np.min(traj.stability_residuals))
            entry.update(worst_residual=worst)
            entry["pass"] = worst >= -float(opts.get("tol", 1e-9))
        elif name == "energetic":
            s_res, e_res = ri.energetic_solution_residuals(system, traj)
            entry.update(stability_worst=s_res, energy_residual=e_res)
            entry["pass"] = (s_res >= -float(opts.get("tol", 1e-9))
                             and abs(e_res) <= float(opts.get("tol_e", 1e-6)))
        elif name == "rate_independence":
            disc = ri.rate_independence_check(system, np.asarray(u0, dtype=float),
                                              times, lambda s: 2.0 * s,
                                              rescale_inverse=lambda t: 0.5 * t)
            entry.update(discrepancy=disc)
            entry["pass"] = disc <= float(opts.get("tol", 1e-12))
        elif name == "apriori":
            margins = ri.apriori_bound_margins(system, traj)
            entry.update(min_margin=float(margins.min()))
            entry["pass"] = bool(margins.min() >= -float(opts.get("tol", 1e-9)))
        else:
            entry.update(skipped=f"diagnostic {name!r} not defined for this system kind")
            entry["pass"] = True
        report["diagnostics"].append(entry)
        all_ok = all_ok and bool(entry["pass"])
    if oracle is not None:
        errs = [abs(float(traj.states[k][0]) - oracle(float(t)))
                for k, t in enumerate(times)]
        report["oracle_error"] = max(errs)
    report["trajectory"] = {"nodes": len(times),
                            "final_state": [float(x) for x in traj.states[-1]],
                            "final_energy": eval_energy(system.energy, float(times[-1]),
                                                        traj.states[-1])}
    return all_ok, traj


def run_scenario(path: str | Path, out_dir: Optional[str | Path] = None) -> int:
    """Execute one scenario file; returns the process exit code."""
    t_start = time.time()
    try:
        sc = validate_scenario(load_scenario(path))
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir if out_dir is not None else sc.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"scenario": {k: v for k, v in sc.items() if not k.startswith("_")},
                    "diagnostics": []}
    entry_kind = zoo.REGISTRY[sc["system"]].kind
    try:
        if entry_kind == "check":
            ok = _run_check(sc, report)
            traj = None
        elif entry_kind == "eris":
            system, oracle, _ = _build_system(sc)
            ok, traj_e = _eris_run(sc, system, oracle, report)
            _eris_csv(out / "trajectory.csv", system, traj_e)
            traj = None
        else:
            system, oracle, extra = _build_system(sc)
            sc["_u0"] = _initial_state(sc, system, extra)
            traj = _run_trajectory(sc, system)
            ok, edi_cum = _mms_diagnostics(sc, system, traj, report)
            report["trajectory"] = {
                "nodes": len(traj.times),
                "final_state": [float(x) for x in traj.states[-1]],
                "final_energy": eval_energy(system.energy, float(traj.times[-1]),
                                            traj.states[-1]),
            }
            _trajectory_csv(out / "trajectory.csv", system, traj, edi_cum)
    except InnerSolveFailed as exc:
        print(f"solver failure: {exc}", file=_sys.stderr)
        report["error"] = str(exc)
        _write_report(out / "report.json", report, t_start)
        return EXIT_SOLVER
    except GradFlowError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    _write_report(out / "report.json", report, t_start)
    return EXIT_OK if ok else EXIT_DIAG


def _eris_csv(path: Path, system, traj: ri.ErisTrajectory) -> None:
    n = traj.states.shape[1]
    header = CSV_HEADER_FIXED + [f"u_{i}" for i in range(n)] + CSV_TAIL
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, t in enumerate(traj.times):
            row = [_fmt(t)] + [_fmt(x) for x in traj.states[k]]
            row.append(_fmt(eval_energy(system.energy, float(t), traj.states[k])))
            row += ["", ""]
            row.append(_fmt(traj.var_cumulative[k] - traj.var_cumulative[k - 1]) if k else "")
            row.append("")
            writer.writerow(row)


def _run_check(sc: dict, report: dict) -> bool:
    name = sc["system"]
    if name == "polar_check":
        samples = np.asarray(sc.get("samples", [[1.0, math.pi / 2], [0.7, 0.3], [2.0, 1.0]]),
                             dtype=float)
        worst = zoo.polar_gradient_check(samples, a=float(sc["params"].get("a", 1.0)))
        entry = {"name": "polar_check", "worst": worst, "pass": worst <= 1e-8}
    else:
        grid = zoo.Grid1D(int(sc["params"].get("n", 512)), 1.0, "neumann")
        eps = float(sc["params"].get("epsilon", 1.0 / 16.0))
        w_hat = 1.0 + 0.5 * grid.nodes
        F_eps, F_harm = zoo.mean_limits_check(
            lambda y: 2.0 + math.sin(2.0 * math.pi * y), eps, w_hat, grid)
        entry = {"name": "mean_limits", "F_eps": F_eps, "F_harm": F_harm,
                 "gap": abs(F_eps - F_harm), "pass": True}
    report["diagnostics"].append(entry)
    return bool(entry["pass"])


def _write_report(path: Path, report: dict, t_start: float) -> None:
    report["wall_time_s"] = time.time() - t_start

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, (np.floating, float)):
            x = float(obj)
            return x if math.isfinite(x) else repr(x)
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, np.ndarray):
            return [clean(v) for v in obj.tolist()]
        return obj

    with open(path, "w", newline="") as fh:
        json.dump(clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sweep(path: str | Path, param: str, values: list[float],
          out_dir: Optional[str | Path] = None) -> int:
    """Run the scenario per parameter value and fit a convergence order."""
    try:
        sc = validate_scenario(load_scenario(path))
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    if param not in ("tau", "epsilon", "grid_n"):
        print(f"error: unsupported sweep parameter {param!r}", file=_sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir if out_dir is not None else sc.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)

    def one(value: float) -> dict:
        sub = json.loads(json.dumps({k: v for k, v in sc.items() if not k.startswith("_")}))
        if param == "tau":
            span = float(sub["T"]) - float(sub["t0"])
            sub["N"] = max(int(round(span / value)), 1)
        elif param == "epsilon":
            sub.setdefault("params", {})["epsilon"] = value
        else:
            sub.setdefault("params", {})["n"] = int(value)
        row: dict = {"value": value}
        try:
            system, oracle, extra = _build_system(sub)
            sub["_u0"] = _initial_state(sub, system, extra)
            traj = _run_trajectory(sub, system)
            row["final_energy"] = eval_energy(system.energy, float(traj.times[-1]),
                                              traj.states[-1])
            err = _oracle_error(sub, system, oracle, traj)
            if err is not None:
                row["error"] = err
        except GradFlowError as exc:
            row["failed"] = str(exc)
        return row

    max_workers = max(int(os.environ.get("GFL_THREADS", "4")), 1)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = list(pool.map(one, values))

    errs = [(r["value"], r["error"]) for r in rows if "error" in r]
    order = None
    if len(errs) >= 2 and all(e > 0 for _, e in errs):
        xs = np.log([v for v, _ in errs])
        ys = np.log([e for _, e in errs])
        order = float(np.polyfit(xs, ys, 1)[0])
    table = {"parameter": param, "rows": rows, "fitted_order": order}
    _write_report(out / "sweep.json", {"scenario": {k: v for k, v in sc.items()
                                                    if not k.startswith("_")},
                                       "sweep": table, "diagnostics": []}, time.time())
    for r in rows:
        print(r)
    if order is not None:
        print(f"fitted order: {order:.3f}")
    return EXIT_OK if all("failed" not in r for r in rows) else EXIT_DIAG


def _oracle_error(sc: dict, system, oracle, traj: Trajectory) -> Optional[float]:
    name = sc["system"]
    if name == "quadratic":
        u0 = _current_u0(sc)
        exact = np.array([u0 * math.exp(-(t - traj.times[0])) for t in traj.times])
        return float(np.max(np.abs(exact[:, 0] - traj.states[:, 0])))
    if name == "nonsmooth_r2":
        orc = oracle(float(sc["params"].get("a", 2.0)), float(sc["params"].get("b", 1.0)),
                     _current_u0(sc))
        fine = np.linspace(traj.times[0], traj.times[-1], 10 * len(traj.times))
        from .mms import interpolate
        return max(float(np.max(np.abs(interpolate(traj, "affine", float(t)) - orc(float(t)))))
                   for t in fine)
    if name == "wiggly":
        al = float(sc["params"].get("alpha_exponent", 0.5))
        u0 = _current_u0(sc)
        if al > 1.0:
            exact = u0[0] * np.exp(-(traj.times - traj.times[0]))
            return float(np.max(np.abs(exact - traj.states[:, 0])))
        return float(np.max(np.abs(traj.states[:, 0] - u0[0])))
    return None


def list_systems() -> int:
    width = max(len(k) for k in zoo.REGISTRY)
    for key in sorted(zoo.REGISTRY):
        entry = zoo.REGISTRY[key]
        print(f"{key:<{width}}  [{entry.kind}]  {entry.description}")
    return EXIT_OK


def self_test(fast: bool = False) -> int:
    from .acceptance import run_acceptance
    results = run_acceptance(fast=fast)
    failed = [r for r in results if not r.passed]
    return EXIT_OK if not failed else EXIT_DIAG


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="gradflowlab",
                                     description="gradient-system scenario runner")
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("file")
    p_run.add_argument("--out", default=None)
    p_sweep = sub.add_parser("sweep", help="run a scenario over a parameter list")
    p_sweep.add_argument("file")
    p_sweep.add_argument("--param", required=True, choices=["tau", "epsilon", "grid_n"])
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    p_sweep.add_argument("--out", default=None)
    sub.add_parser("list-systems", help="print the system registry")
    p_selftest = sub.add_parser("self-test", help="run the acceptance suite")
    p_selftest.add_argument("--fast", action="store_true",
                            help="skip the long-running criteria")
    args = parser.parse_args(argv)
    if args.verb == "run":
        return run_scenario(args.file, args.out)
    if args.verb == "sweep":
        try:
            values = [float(v) for v in args.values.split(",") if v]
        except ValueError:
            print("error: --values must be a comma-separated number list", file=_sys.stderr)
            return EXIT_CONFIG
        return sweep(args.file, args.param, values, args.out)
    if args.verb == "list-systems":
        return list_systems()
    return self_test(fast=args.fast)


if __name__ == "__main__":
    raise SystemExit(main())
