"""Command-line front end.

    openulam solve      --config system.yaml --out results/
    openulam converge   --config study.yaml
    openulam scan       --config lorenz.yaml --workers 4
    openulam admissible --config system.yaml
    openulam enlarge    --config system.yaml
    openulam oracle     --config system.yaml

The output directory defaults to ``$OPENULAM_OUT`` (or ``./openulam-out``).
Exit status is 0 when every solve converged without a multiplicity flag,
1 when a solve failed or was flagged, and 2 for bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import config as cfgmod
from . import oracle as mc
from . import spectral
from .errors import NonConvergenceError, OpenUlamError, ValidationError
from .holes import (OpenSystem, admissibility_report, classify_branches, lorenz_admissibility,
                    lorenz_system)
from .ulam import Partition

OUT_ENV = "OPENULAM_OUT"
DEFAULT_OUT = "openulam-out"


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_solution_csv(sol: spectral.SpectralSolution, path) -> None:
    """One row per cell: edges, h_k, psi, mu_k cdf at the right edge, lambda_k cell mass."""
    part = sol.partition
    h = spectral.density_from_left(sol)
    mu = spectral.measure_from_right(sol)
    lam = spectral.survivor_measure(sol)
    cdf = mu.cdf_at_edges()[1:]
    e = part.edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_left", "x_right", "h_value", "psi_value", "mu_cdf_at_right", "lambda_weight"])
        for i in range(part.k):
            w.writerow([_fmt(e[i]), _fmt(e[i + 1]), _fmt(h.values[i]), _fmt(sol.right[i]),
                        _fmt(cdf[i]), _fmt(lam.masses[i])])


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


class Run:
    """Per-invocation state: parsed config, output directory, flags."""

    def __init__(self, args):
        self.args = args
        self.cfg = cfgmod.load(args.config)
        self.out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        self.out.mkdir(parents=True, exist_ok=True)
        self.reproducible = bool(args.reproducible)
        self.backend = args.backend
        self.t0 = time.perf_counter()
        s = self.cfg.solver
        self.tol, self.max_iter, self.seed = s["tol"], s["max_iter"], s["seed"]

    def runtime(self) -> Optional[float]:
        return None if self.reproducible else time.perf_counter() - self.t0

    def path(self, name: str) -> Path:
        return self.out / name


def _solve(run: Run, sysm: OpenSystem, part: Partition):
    return spectral.solve(sysm, part, run.tol, run.max_iter, run.seed, backend=run.backend)


def _status(flags) -> int:
    return 1 if "multiplicity_suspected" in flags else 0


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(run: Run) -> int:
    cfg = run.cfg
    sysm = cfg.build_system()
    P, sol = _solve(run, sysm, cfg.build_partition(sysm.domain))
    write_solution_csv(sol, run.path("solution.csv"))
    if run.args.matrix:
        P.write_coo(run.path("matrix.coo"))
        P.write_row_sums(run.path("row_sums.csv"))
    summary = sol.summary()
    summary.update({
        "command": "solve",
        "k": P.partition.k,
        "mesh": P.partition.mesh,
        "hole": sysm.hole.to_list(),
        "quasi_conformal_residual": spectral.verify_quasi_conformal(P, sol),
        "converged": True,
        "runtime": run.runtime(),
    })
    write_json(run.path("summary.json"), summary)
    return _status(sol.flags)


def exact_reference(sysm: OpenSystem) -> Optional[float]:
    """1 - Leb(H_0) (relative to |I|) when every live branch is full and linear, else None."""
    classes = classify_branches(sysm)
    if classes.partial or not classes.full:
        return None
    if not all(sysm.map.branches[i].is_linear for i in classes.full):
        return None
    lo, hi = sysm.domain
    return sysm.x0.measure() / (hi - lo)


def fit_eta(tau, err) -> Optional[float]:
    """Least-squares slope of log err against log tau over entries with err > 0."""
    tau, err = np.asarray(tau, float), np.asarray(err, float)
    ok = err > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(tau[ok]), np.log(err[ok]), 1)[0])


def _solve_cell(task):
    family, params, hole, k, tol, max_iter, seed, backend = task
    cfg = cfgmod.ExperimentConfig(family, params, hole)
    sysm = cfg.build_system()
    try:
        _, sol = spectral.solve(sysm, Partition.uniform(sysm.domain, k), tol, max_iter, seed, backend)
    except OpenUlamError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}
    return {"sol": sol}


def _pmap(func, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, tasks))


def cmd_converge(run: Run) -> int:
    cfg = run.cfg
    ks = sorted(set(cfg.converge.get("k_list", [500, 1000, 2000, 4000, 8000])))
    sysm = cfg.build_system()
    tasks = [(cfg.family, cfg.params, cfg.hole, k, run.tol, run.max_iter, run.seed, run.backend) for k in ks]
    results = _pmap(_solve_cell, tasks, run.args.workers)
    failed = [r["error"] for r in results if "error" in r]
    if failed:
        write_json(run.path("converge.json"), {"command": "converge", "errors": failed,
                                               "runtime": run.runtime()})
        return 1
    sols = [r["sol"] for r in results]
    if "reference" in cfg.converge:
        ref, kind = cfg.converge["reference"], "supplied"
    else:
        ref = exact_reference(sysm)
        kind = "exact" if ref is not None else "largest_k"
        if ref is None:
            ref = sols[-1].rho
    finest = sols[-1]
    h_ref = spectral.density_from_left(finest)
    mu_ref = spectral.measure_from_right(finest)
    rows, tau, err = [], [], []
    for k, s in zip(ks, sols):
        t = s.partition.mesh
        e = abs(s.rho - ref)
        h_d = spectral.step_l1_distance(spectral.density_from_left(s), h_ref)
        mu_d = spectral.cdf_sup_distance(spectral.measure_from_right(s), mu_ref)
        rows.append([k, t, s.rho, e, h_d, mu_d, ";".join(s.flags)])
        if not (kind == "largest_k" and s is finest):
            tau.append(t)
            err.append(e)
    _write_rows(run.path("converge.csv"),
                ["k", "tau", "rho_k", "abs_error", "h_l1_to_finest", "mu_cdf_sup_to_finest", "flags"], rows)
    flags = sorted({f for s in sols for f in s.flags})
    write_json(run.path("converge.json"), {
        "command": "converge",
        "k_list": ks,
        "reference": ref,
        "reference_kind": kind,
        "eta_hat": fit_eta(tau, err),
        "errors": err,
        "flags": flags,
        "runtime": run.runtime(),
    })
    return _status(flags)


def _scan_cell(task):
    i_a, i_c, alpha, c, k, tol, max_iter, seed, backend = task
    row = {"i_alpha": i_a, "i_c": i_c, "alpha": alpha, "c": c}
    try:
        sysm = lorenz_system(c, alpha)
        _, sol = spectral.solve(sysm, Partition.uniform(sysm.domain, k), tol, max_iter, seed, backend)
    except OpenUlamError as exc:
        row.update(rho=math.nan, iterations=0, converged=False, flags="", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(rho=sol.rho, iterations=sol.iterations, converged=True, flags=";".join(sol.flags), error="")
    return row


def scan_grid(c_range, alpha_range, grid):
    cs = np.linspace(c_range[0], c_range[1], grid[0])
    alphas = np.linspace(alpha_range[0], alpha_range[1], grid[1])
    return cs, alphas


def cmd_scan(run: Run) -> int:
    cfg = run.cfg
    if cfg.family != "lorenz":
        raise ValidationError("scan: map.family must be lorenz")
    if not cfg.scan:
        raise ValidationError("scan: section required (c_range, alpha_range, grid, k)")
    sc = cfg.scan
    cs, alphas = scan_grid(sc["c_range"], sc["alpha_range"], sc["grid"])
    tasks = [(i_a, i_c, float(a), float(c), sc["k"], run.tol, run.max_iter, run.seed, run.backend)
             for i_a, a in enumerate(alphas) for i_c, c in enumerate(cs)]
    rows = _pmap(_scan_cell, tasks, run.args.workers)
    keys = ["i_alpha", "i_c", "alpha", "c", "rho", "iterations", "converged", "flags", "error"]
    _write_rows(run.path("scan.csv"), keys, [[r[key] for key in keys] for r in rows])
    rho = np.array([r["rho"] for r in rows]).reshape(len(alphas), len(cs))
    decreasing = [bool(np.all(np.diff(row) < 0)) for row in rho]
    bad = [r for r in rows if not r["converged"] or "multiplicity_suspected" in r["flags"]]
    write_json(run.path("scan.json"), {
        "command": "scan",
        "k": sc["k"],
        "c": cs.tolist(),
        "alpha": alphas.tolist(),
        "rho_decreasing_in_c": decreasing,
        "failed_cells": len([r for r in rows if not r["converged"]]),
        "flagged_cells": len([r for r in rows if "multiplicity_suspected" in r["flags"]]),
        "runtime": run.runtime(),
    })
    return 1 if bad else 0


def cmd_admissible(run: Run) -> int:
    cfg = run.cfg
    a = cfg.admissible or {"epsilon": 0.1, "power": 1}
    if cfg.family == "lorenz":
        rep = lorenz_admissibility(cfg.params["c"], cfg.params["alpha"], a["epsilon"])
    else:
        rep = admissibility_report(cfg.build_system(), a["epsilon"], a["power"])
    out = rep.to_dict()
    out.update({"command": "admissible", "runtime": run.runtime()})
    write_json(run.path("admissible.json"), out)
    return 0


def cmd_enlarge(run: Run) -> int:
    cfg = run.cfg
    sysm = cfg.build_system()
    m = cfg.enlarge.get("m", 1)
    rep = spectral.enlargement_consistency(sysm, cfg.build_partition(sysm.domain), m, run.tol, run.max_iter,
                                           backend=run.backend)
    rep.update({"command": "enlarge", "runtime": run.runtime()})
    write_json(run.path("enlarge.json"), rep)
    return _status(rep["flags"])


def cmd_oracle(run: Run) -> int:
    cfg = run.cfg
    o = cfg.oracle or {"N": 1_000_000, "n_max": 200, "seed": 0, "window": None, "accim_n": None}
    sysm = cfg.build_system()
    curve = mc.simulate(sysm, o["N"], o["n_max"], o["seed"], backend=run.backend)
    curve.write_csv(run.path("survival.csv"))
    window = tuple(o["window"]) if o.get("window") else mc.default_window(curve)
    rho_hat, ci95 = mc.escape_rate_fit(curve, window)
    P, sol = _solve(run, sysm, cfg.build_partition(sysm.domain))
    diff = abs(rho_hat - sol.rho)
    report = {
        "command": "oracle",
        "N": o["N"],
        "n_max": o["n_max"],
        "seed": o["seed"],
        "window": list(window),
        "rho_hat": rho_hat,
        "ci95": ci95,
        "rho_k": sol.rho,
        "k": P.partition.k,
        "abs_difference": diff,
        "agree_within_3ci95": bool(diff <= 3 * ci95),
        "flags": sol.flags,
        "runtime": run.runtime(),
    }
    if o.get("accim_n") is not None:
        hist = mc.empirical_accim(sysm, o["N"], o["accim_n"], P.partition, o["seed"], backend=run.backend)
        mc.write_histogram_csv(hist, run.path("histogram.csv"))
        report["accim_n"] = o["accim_n"]
        report["histogram_l1_to_h_k"] = spectral.step_l1_distance(hist, spectral.density_from_left(sol))
    write_json(run.path("oracle.json"), report)
    return _status(sol.flags)


COMMANDS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "scan": cmd_scan,
    "admissible": cmd_admissible,
    "enlarge": cmd_enlarge,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="YAML or JSON experiment config")
    common.add_argument("--out", metavar="DIR", default=None,
                        help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="worker processes for scan/converge")
    common.add_argument("--reproducible", action="store_true",
                        help="omit wall-clock fields so outputs are byte-identical across runs")
    common.add_argument("--backend", choices=["numba", "numpy"], default=None,
                        help="kernel backend (default: numba unless OPENULAM_DISABLE_JIT is set)")
    p = argparse.ArgumentParser(prog="openulam", description="Open Ulam method for interval maps with holes.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=fn.__doc__ or name)
        if name == "solve":
            sp.add_argument("--matrix", action="store_true", help="also write the COO matrix and row sums")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        run = Run(args)
    except (OSError, OpenUlamError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](run)
    except ValidationError as exc:
        code = 2
        err = exc
    except NonConvergenceError as exc:
        code = 1
        err = exc
    except OpenUlamError as exc:
        code = 1
        err = exc
    report = {"command": args.command, "error": type(err).__name__, "message": str(err)}
    if isinstance(err, NonConvergenceError):
        report.update(left_residual=err.left_residual, right_residual=err.right_residual,
                      iterations=err.iterations)
    write_json(run.path("error.json"), report)
    print(f"error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
