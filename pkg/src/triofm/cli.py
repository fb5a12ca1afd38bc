"""Command-line interface: ``triofm {gen,solve,bench,rate-fit}``.

Exit codes: 0 converged / success, 1 solve finished without converging,
2 configuration error, 3 divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Method, load_config, problem_spec, solver_config
from .exceptions import ConfigError, DivergenceError, RateFitError, TriOFMError
from .linalg import random_unit_columns
from .metrics import ReferenceEigen, e_val, e_vec, fit_rate, nnz_thresholded
from .mmio import read_eigenvalues, read_operator, write_block, write_eigenvalues, write_operator
from .problems import SpectrumSpec, build_problem
from .solver import ConvergenceTrace, reference_rate, solve

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
DENSE_REFERENCE_LIMIT = 4000


def _stamp(cfg):
    return {"version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "seed": cfg["seed"], "init_seed": cfg["init_seed"]}


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if not math.isfinite(v) else v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _write_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def load_problem(cfg, seed=None, matrix=None):
    """``(operator, reference or None)`` for a config, optionally reseeded."""
    if matrix is not None or cfg["problem"] == "matrix":
        path = matrix or cfg.get("matrix")
        if not path:
            raise ConfigError("problem = matrix needs a matrix path")
        op, ref = read_operator(path), None
    else:
        spec = problem_spec(cfg)
        if seed is not None and isinstance(spec, SpectrumSpec):
            spec = SpectrumSpec(spec.family, spec.n, seed, spec.values)
        op, ref = build_problem(spec)
    mode = cfg["reference"]
    if mode not in ("auto", "none", "dense"):
        raise ConfigError(f"unknown reference mode {mode!r}")
    if mode == "none":
        ref = None
    elif ref is None and (mode == "dense" or op.n <= DENSE_REFERENCE_LIMIT):
        ref = ReferenceEigen.from_matrix(op, min(op.n, cfg["p"]))
    return op, ref


def run_one(op, ref, scfg, p, init_seed):
    """Solve once and collect the per-run metrics."""
    x0 = random_unit_columns(op.n, p, init_seed)
    row = {"init_seed": init_seed}
    try:
        res = solve(op, x0, scfg, reference=ref)
    except DivergenceError as exc:
        row.update(converged=False, diverged=True, error=str(exc))
        return row, None
    row.update(converged=res.converged, diverged=False, iterations=res.iterations,
               column_accesses=res.column_accesses, residual=res.residual,
               stop_reason=res.stop_reason, nnz=nnz_thresholded(res.x),
               ritz_values=res.ritz_values)
    if ref is not None:
        ev = e_vec(res.x, ref, scfg.objective, scfg.triangularized)
        row["e_vec"] = ev
        try:
            row["e_val"] = e_val(op, res.x, ref)
        except TriOFMError:
            row["e_val"] = None
    else:
        row["e_vec"] = row["e_val"] = None
    return row, res


def aggregate(rows, keys=("iterations", "column_accesses", "nnz", "e_vec", "e_val")):
    """Mean / max / min of each key over runs where it is available."""
    out = {"runs": len(rows), "converged": sum(bool(r.get("converged")) for r in rows),
           "diverged": sum(bool(r.get("diverged")) for r in rows)}
    for k in keys:
        vals = [r[k] for r in rows if r.get(k) is not None]
        if vals:
            out[k] = {"mean": float(np.mean(vals)), "max": float(np.max(vals)),
                      "min": float(np.min(vals))}
        else:
            out[k] = None
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args):
    cfg = load_config(args.spec)
    op, ref = load_problem(cfg)
    out = Path(args.out)
    write_operator(out, op)
    files = [str(out)]
    if ref is not None and cfg["problem"] in ("uniform", "logarithm", "ushape", "explicit"):
        stem = out.with_suffix("")
        write_eigenvalues(f"{stem}.eigvals.txt", ref.values)
        files.append(f"{stem}.eigvals.txt")
        if args.vectors:
            write_block(f"{stem}.eigvecs.mtx", ref.vectors)
            files.append(f"{stem}.eigvecs.mtx")
    for f in files:
        print(f)
    return EXIT_OK


def cmd_solve(args):
    cfg = load_config(args.config)
    if args.max_iterations is not None:
        cfg["max_iterations"] = args.max_iterations
    op, ref = load_problem(cfg, matrix=args.matrix)
    scfg = solver_config(cfg)
    x0 = random_unit_columns(op.n, cfg["p"], cfg["init_seed"])
    try:
        res = solve(op, x0, scfg, reference=ref)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_json(args.report, {"config": cfg, "converged": False, "diverged": True,
                                  "error": str(exc), "environment": _stamp(cfg)})
        return EXIT_DIVERGED
    if args.trace:
        res.trace.to_csv(args.trace)
    report = {"config": cfg, "environment": _stamp(cfg), "converged": res.converged,
              "diverged": False, "iterations": res.iterations,
              "column_accesses": res.column_accesses, "residual": res.residual,
              "stop_reason": res.stop_reason, "ritz_values": res.ritz_values,
              "nnz": nnz_thresholded(res.x)}
    if ref is not None:
        report["e_vec"] = e_vec(res.x, ref, scfg.objective, scfg.triangularized)
        report["e_vec_available"] = scfg.triangularized
        report["e_val"] = e_val(op, res.x, ref)
    if args.x_out:
        write_block(args.x_out, res.x.data)
    _write_json(args.report, report)
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def run_bench(cfg):
    """Run the configured method grid; returns the report dict."""
    methods = [Method.parse(m) for m in cfg["methods"]]
    if cfg["runs"] < 1:
        raise ConfigError("runs must be at least 1")
    scfgs = [solver_config(cfg, m) for m in methods]
    rows = {m.label: [] for m in methods}
    for r in range(cfg["runs"]):
        op, ref = load_problem(cfg, seed=cfg["seed"] + r)
        for m, scfg in zip(methods, scfgs):
            row, _ = run_one(op, ref, scfg, cfg["p"], cfg["init_seed"] + r)
            row["run"] = r
            rows[m.label].append(row)
    return {"config": cfg, "environment": _stamp(cfg),
            "methods": {k: {"runs": v, "aggregate": aggregate(v)} for k, v in rows.items()}}


def format_table(report):
    lines = [f"{'Method':<22}{'Iter mean':>11}{'max':>8}{'min':>8}"
             f"{'ColAcc mean':>13}{'max':>9}{'min':>9}"]
    for label, body in report["methods"].items():
        a = body["aggregate"]
        it, ca = a["iterations"], a["column_accesses"]
        if it is None:
            lines.append(f"{label:<22}{'(all runs diverged)':>58}")
            continue
        lines.append(f"{label:<22}{it['mean']:>11.1f}{it['max']:>8.0f}{it['min']:>8.0f}"
                     f"{ca['mean']:>13.1f}{ca['max']:>9.0f}{ca['min']:>9.0f}")
    return "\n".join(lines)


def cmd_bench(args):
    cfg = load_config(args.config)
    if args.runs is not None:
        cfg["runs"] = args.runs
    report = run_bench(cfg)
    print(format_table(report), file=sys.stderr if args.report in (None, "-") else sys.stdout)
    _write_json(args.report, report)
    return EXIT_OK


def cmd_rate_fit(args):
    trace = ConvergenceTrace.from_csv(args.trace)
    p = len(trace[0].g_norm)
    cols = [args.column - 1] if args.column else range(p)
    lam = read_eigenvalues(args.eigenvalues) if args.eigenvalues else None
    for c in cols:
        try:
            rate = f"{fit_rate(trace, c, tol=args.tol):.6f}"
        except RateFitError as exc:
            rate = f"n/a ({exc})"
        line = f"column {c + 1}: fitted {rate}"
        if lam is not None and args.alpha is not None:
            line += f"  reference {reference_rate(lam, args.alpha, c + 1):.6f}"
        print(line)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="triofm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="build a test matrix and write it as Matrix Market")
    g.add_argument("spec", help="problem config file")
    g.add_argument("-o", "--out", required=True, help="output .mtx path")
    g.add_argument("--vectors", action="store_true", help="also write reference eigenvectors")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run one solve")
    s.add_argument("config")
    s.add_argument("--matrix", help="Matrix Market file overriding the config problem")
    s.add_argument("--trace", help="trace CSV output")
    s.add_argument("--report", default="-", help="report JSON output ('-' for stdout)")
    s.add_argument("--x-out", help="write the final block as Matrix Market")
    s.add_argument("--max-iterations", type=int)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="seeded ensemble over a method grid")
    b.add_argument("config")
    b.add_argument("--report", default="-")
    b.add_argument("--runs", type=int)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("rate-fit", help="fit per-column convergence rates from a trace CSV")
    r.add_argument("trace")
    r.add_argument("--column", type=int, help="1-based column (default: all)")
    r.add_argument("--tol", type=float, default=0.0, help="solver tolerance (window floor 10*tol)")
    r.add_argument("--eigenvalues", help="eigenvalue file for reference rates")
    r.add_argument("--alpha", type=float, help="fixed stepsize used by the run")
    r.set_defaults(func=cmd_rate_fit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
