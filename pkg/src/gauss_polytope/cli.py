"""``gauss-polytope`` command-line front end.

Exit codes: 0 ok, 2 unreadable or malformed problem file, 3 resource or
I/O failure, 4 invalid parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from .dp import error_bound, parameters_for, solve
from .grid import DEFAULT_CELL_BUDGET, GridBudgetError
from .oracle import mc_estimate, quadrature_estimate
from .preprocess import (CovarianceError, GaussianSpec, PolytopeProblem,
                         standardize)

EXIT_PARSE = 2
EXIT_RESOURCE = 3
EXIT_PARAM = 4

CSV_COLUMNS = ["n", "lambda", "beta", "estimate", "bound_theta", "bound_alpha",
               "bound_beta", "bound_total", "mc_ref", "mc_sigma",
               "abs_err_vs_mc", "cells_total", "seconds"]

log = logging.getLogger("gauss_polytope")


class ProblemFormatError(ValueError):
    pass


class ParameterError(ValueError):
    pass


def _matrix(doc, key, rows=None, cols=None):
    value = doc[key]
    if not isinstance(value, list) or not value:
        raise ProblemFormatError(f"{key}: expected a nonempty list of rows")
    width = None
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise ProblemFormatError(f"{key}: row {i} is not a list")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ProblemFormatError(
                f"{key}: row {i} has {len(row)} entries, expected {width}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ProblemFormatError(f"{key}: entry [{i}][{j}] is not a number")
    out = np.array(value, dtype=float)
    if rows is not None and out.shape[0] != rows:
        raise ProblemFormatError(f"{key}: expected {rows} rows, got {out.shape[0]}")
    if cols is not None and out.shape[1] != cols:
        raise ProblemFormatError(f"{key}: expected {cols} columns, got {out.shape[1]}")
    if not np.all(np.isfinite(out)):
        raise ProblemFormatError(f"{key}: entries must be finite")
    return out


def _vector(doc, key, length):
    value = doc[key]
    if not isinstance(value, list):
        raise ProblemFormatError(f"{key}: expected a list")
    if len(value) != length:
        raise ProblemFormatError(f"{key}: expected {length} entries, got {len(value)}")
    for i, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise ProblemFormatError(f"{key}: entry {i} is not a number")
    out = np.array(value, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ProblemFormatError(f"{key}: entries must be finite")
    return out


def parse_problem(doc) -> tuple[PolytopeProblem, GaussianSpec | None]:
    """Validate a decoded problem document (see ``docs/problem.schema.json``)."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem file must hold a JSON object")
    unknown = set(doc) - {"A", "b", "mean", "covariance", "labels"}
    if unknown:
        raise ProblemFormatError(f"unknown keys: {', '.join(sorted(unknown))}")
    for key in ("A", "b"):
        if key not in doc:
            raise ProblemFormatError(f"missing required key {key!r}")
    A = _matrix(doc, "A")
    b = _vector(doc, "b", A.shape[0])
    n = A.shape[1]
    gauss = None
    if "mean" in doc or "covariance" in doc:
        mean = _vector(doc, "mean", n) if "mean" in doc else np.zeros(n)
        cov = _matrix(doc, "covariance", n, n) if "covariance" in doc else np.eye(n)
        gauss = GaussianSpec(mean, cov)
    return PolytopeProblem(A, b), gauss


def load_problem(path) -> tuple[PolytopeProblem, GaussianSpec | None]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFormatError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: invalid JSON ({exc})") from exc
    return parse_problem(doc)


def standard_problem(path) -> PolytopeProblem:
    p, gauss = load_problem(path)
    try:
        return standardize(p, gauss)
    except CovarianceError as exc:
        raise ProblemFormatError(f"covariance: {exc}") from exc


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _resolve_params(args) -> tuple[float, float]:
    if args.n is not None:
        if args.lam is not None or args.beta is not None:
            raise ParameterError("give either --n or --lambda/--beta, not both")
        try:
            return parameters_for(args.n)
        except ValueError as exc:
            raise ParameterError(str(exc)) from exc
    if args.lam is None or args.beta is None:
        raise ParameterError("give --n, or both --lambda and --beta")
    if not args.lam > 1:
        raise ParameterError("lambda must exceed 1")
    if not args.beta > 0:
        raise ParameterError("beta must be positive")
    return args.lam, args.beta


def _print_bound(bound, out):
    print(f"bound_theta  {_fmt(bound.theta_term)}", file=out)
    print(f"bound_alpha  {_fmt(bound.alpha_term)}", file=out)
    print(f"bound_beta   {_fmt(bound.beta_term)}", file=out)
    print(f"bound_total  {_fmt(bound.total)}", file=out)


def cmd_integrate(args, out=None) -> int:
    out = out or sys.stdout
    p = standard_problem(args.problem)
    lam, beta = _resolve_params(args)
    report = solve(p, lam, beta, cell_budget=args.cell_budget, workers=args.threads)
    print(f"estimate     {_fmt(report.estimate)}", file=out)
    _print_bound(report.bound, out)
    print(f"lambda       {_fmt(lam)}", file=out)
    print(f"beta         {_fmt(beta)}", file=out)
    shapes = " ".join(f"t={t}:{'x'.join(map(str, s))}"
                      for t, s in enumerate(report.grid_shapes))
    print(f"grids        {shapes}", file=out)
    print(f"cells_total  {report.cells_total}", file=out)
    print(f"escaped_max  {_fmt(report.escaped_mass_max)}", file=out)
    return 0


def cmd_bound(args, out=None) -> int:
    out = out or sys.stdout
    p = standard_problem(args.problem)
    lam, beta = _resolve_params(args)
    _print_bound(error_bound(p, lam, beta), out)
    return 0


def cmd_oracle(args, out=None) -> int:
    out = out or sys.stdout
    p = standard_problem(args.problem)
    if args.samples < 1:
        raise ParameterError("samples must be at least 1")
    mc = mc_estimate(p, args.samples, args.seed)
    print(f"mc_estimate  {_fmt(mc.estimate)}", file=out)
    print(f"mc_sigma     {_fmt(mc.std_error)}", file=out)
    print(f"mc_ci95      [{_fmt(mc.estimate - 1.96 * mc.std_error)}, "
          f"{_fmt(mc.estimate + 1.96 * mc.std_error)}]", file=out)
    print(f"samples      {mc.samples}", file=out)
    print(f"seed         {mc.seed}", file=out)
    if p.T > 3:
        print("quadrature   skipped (T>3)", file=out)
    else:
        q = quadrature_estimate(p)
        print(f"quadrature   {_fmt(q)}", file=out)
        print(f"discrepancy  {_fmt(abs(q - mc.estimate))}", file=out)
    return 0


def _number_list(text, kind, name):
    items = [s for s in text.split(",") if s.strip()] if text else []
    try:
        return [kind(s) for s in items]
    except ValueError as exc:
        raise ParameterError(f"{name}: {exc}") from exc


def sweep_rows(p: PolytopeProblem, ns, lams=None, betas=None, samples=10**6,
               seed=42, reference=None, cell_budget=DEFAULT_CELL_BUDGET,
               workers=None, timing=False):
    """One CSV row (as strings) per ``n``."""
    if reference is None:
        mc = mc_estimate(p, samples, seed)
        ref, sigma = mc.estimate, mc.std_error
    else:
        ref, sigma = float(reference), 0.0
    rows = []
    for i, n in enumerate(ns):
        if lams is None:
            lam, beta = parameters_for(n)
        else:
            lam, beta = lams[i], betas[i]
        tic = time.perf_counter()
        report = solve(p, lam, beta, cell_budget=cell_budget, workers=workers)
        elapsed = time.perf_counter() - tic
        b = report.bound
        rows.append([str(n), _fmt(lam), _fmt(beta), _fmt(report.estimate),
                     _fmt(b.theta_term), _fmt(b.alpha_term), _fmt(b.beta_term),
                     _fmt(b.total), _fmt(ref), _fmt(sigma),
                     _fmt(abs(report.estimate - ref)), str(report.cells_total),
                     _fmt(elapsed) if timing else ""])
    return rows


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    p = standard_problem(args.problem)
    ns = _number_list(args.sweep, int, "--sweep")
    if not ns:
        raise ParameterError("--sweep needs at least one n")
    if any(n <= 1 for n in ns):
        raise ParameterError("lambda must exceed 1 (every n must be > 1)")
    lams = betas = None
    if args.lambdas or args.betas:
        lams = _number_list(args.lambdas, float, "--lambdas")
        betas = _number_list(args.betas, float, "--betas")
        if len(lams) != len(ns) or len(betas) != len(ns):
            raise ParameterError("--lambdas and --betas need one value per n")
        if any(l <= 1 for l in lams):
            raise ParameterError("lambda must exceed 1")
        if any(b <= 0 for b in betas):
            raise ParameterError("beta must be positive")
    if args.samples < 1:
        raise ParameterError("samples must be at least 1")
    rows = sweep_rows(p, ns, lams, betas, args.samples, args.seed, args.reference,
                      args.cell_budget, args.threads, args.timing)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, rows)
    else:
        _write_csv(out, rows)
    return 0


def _write_csv(fh, rows):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gauss-polytope",
        description="Gaussian polytope probabilities by dynamic programming.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, help="problem file (JSON)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="FFT worker cap (default: available cores)")
    common.add_argument("--cell-budget", type=int, default=DEFAULT_CELL_BUDGET,
                        help="largest allowed grid, in cells")
    common.add_argument("-v", "--verbose", action="store_true")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--n", type=float, default=None,
                        help="use lambda = sqrt(n), beta = 1/n")
    params.add_argument("--lambda", dest="lam", type=float, default=None)
    params.add_argument("--beta", type=float, default=None)

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--samples", type=int, default=10**6)
    mc.add_argument("--seed", type=int, default=42)

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("integrate", parents=[common, params],
                       help="solve and print the estimate with its error bound")
    p.set_defaults(func=cmd_integrate)
    p = sub.add_parser("bound", parents=[common, params],
                       help="print the a-priori error bound only")
    p.set_defaults(func=cmd_bound)
    p = sub.add_parser("oracle", parents=[common, mc],
                       help="Monte Carlo (and quadrature for T <= 3) reference")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("sweep", parents=[common, mc],
                       help="solve over a list of n and write CSV")
    p.add_argument("--sweep", required=True, help="comma-separated n values")
    p.add_argument("--lambdas", default=None, help="per-n lambda override")
    p.add_argument("--betas", default=None, help="per-n beta override")
    p.add_argument("--reference", type=float, default=None,
                   help="exact reference value replacing Monte Carlo")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--timing", action="store_true",
                   help="record wall seconds (makes the CSV nondeterministic)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GridBudgetError, MemoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
