"""Command-line front end.

Exit codes: 0 success, 1 invalid model, 2 I/O or parse failure,
3 consistency-check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from . import analytics, checks, simulate, transform
from .inversion import InversionParams, SingularDistributionWarning, density_grid
from .model import (
    InvalidModelError,
    ModelStructureError,
    block_decompose,
    load_model,
    validate,
)
from .report import dumps, fmt, table

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_CHECK = 0, 1, 2, 3

GRID_HELP = "grid a:b:n (n equispaced points from a to b inclusive) or a comma list"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` -> ``n`` equispaced points from ``a`` to ``b`` inclusive;
    otherwise a comma-separated list of numbers."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError("point count must be >= 1")
            a, b = float(a), float(b)
            if n > 1 and not b > a:
                raise ValueError("grid end must exceed its start")
            return np.array([a]) if n == 1 else np.linspace(a, b, n)
        vals = np.array([float(v) for v in text.split(",")])
        if vals.size > 1 and not np.all(np.diff(vals) > 0):
            raise ValueError("grid must be ascending")
        return vals
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None


def parse_complex(text: str) -> complex:
    """``re`` or ``re,im``."""
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad complex argument {text!r}") from None
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise argparse.ArgumentTypeError(f"bad complex argument {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mphstar", description="Bivariate MPH* distributions: transforms, densities, moments, simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.add_argument("model", help="model JSON file")
        return sp

    def add_format(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = add("validate", "check the model invariants")
    add_format(sp)

    sp = add("transform", "evaluate the transform density and the atom transform")
    sp.add_argument("--s", type=parse_complex, required=True, metavar="RE[,IM]")
    sp.add_argument("--y", type=parse_grid, required=True, help=GRID_HELP + " (equispaced)")
    add_format(sp)

    sp = add("density", "tabulate the bivariate density f(y, x)")
    sp.add_argument("--ys", type=parse_grid, required=True, help=GRID_HELP + " (equispaced)")
    sp.add_argument("--xs", type=parse_grid, required=True, help=GRID_HELP)
    sp.add_argument("--A", type=float, default=InversionParams.A)
    sp.add_argument("--N", type=_positive_int, default=InversionParams.N)
    sp.add_argument("--M", type=_positive_int, default=InversionParams.M)
    sp.add_argument("--x-min", type=float, default=0.01, help="smallest admissible x (default 0.01)")
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("-o", "--output", help="output file (default stdout)")

    sp = add("marginal", "phase-type representation and CDF table of one marginal")
    sp.add_argument("--which", type=int, choices=(1, 2), default=1)
    sp.add_argument("--xs", type=parse_grid, default=parse_grid("0:5:11"), help=GRID_HELP)
    add_format(sp)

    sp = add("moments", "means, cross moment (two routes), covariance, correlation")
    add_format(sp)

    sp = add("simulate", "Monte Carlo estimates")
    sp.add_argument("--n", type=_positive_int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--dump-paths", metavar="FILE", help="also write sample paths as JSON lines")
    sp.add_argument("--dump-count", type=_positive_int, default=100)
    add_format(sp)

    sp = add("check", "run the consistency battery")
    sp.add_argument("--mc", type=int, default=0, metavar="N", help="also compare against N Monte Carlo samples")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--normalization-tol", type=float, default=checks.NORMALIZATION_TOL)
    sp.add_argument("--lt-tol", type=float, default=checks.LT_TOL)
    sp.add_argument("--moment-rtol", type=float, default=checks.MOMENT_RTOL)
    sp.add_argument("--marginal-tol", type=float, default=checks.MARGINAL_TOL)
    sp.add_argument("--mc-sigmas", type=float, default=checks.MC_SIGMAS)
    add_format(sp)
    return p


def _load(path):
    try:
        model = load_model(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"cannot parse {path}: {exc}", EXIT_IO) from None
    except ModelStructureError as exc:
        raise CliError(f"malformed model {path}: {exc}", EXIT_INVALID) from None
    return model


def _valid(path, need_pair=True):
    model = _load(path)
    report = validate(model)
    if not report.ok:
        raise CliError("invalid model:\n" + report.summary(), EXIT_INVALID)
    if need_pair and model.k != 2:
        raise CliError(f"command needs a bivariate model (k = 2), got k = {model.k}", EXIT_INVALID)
    return model


def cmd_validate(args, out):
    model = _load(args.model)
    report = validate(model)
    if args.format == "json":
        out.write(dumps({"ok": report.ok, "violations": [
            {"invariant": v.invariant, "detail": v.detail} for v in report.violations]}) + "\n")
    else:
        out.write("ok\n" if report.ok else "invalid\n" + report.summary() + "\n")
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_transform(args, out):
    model = _valid(args.model)
    bd = block_decompose(model)
    try:
        vals = transform.density_transform_grid(bd, args.s, args.y)
        atom = transform.atom_transform(bd, args.s)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    if args.format == "json":
        out.write(dumps({"s": args.s, "atom": atom, "alpha_abs": model.alpha_abs,
                         "y": args.y, "density": [complex(v) for v in vals]}) + "\n")
    else:
        out.write(f"s = {fmt(args.s)}\natom E[exp(-s Z2); Z1=0] = {fmt(atom)}\n")
        out.write(table([(fmt(y), fmt(complex(v))) for y, v in zip(args.y, vals)], header=("y", "density")) + "\n")
    return EXIT_OK


def cmd_density(args, out, err):
    model = _valid(args.model)
    bd = block_decompose(model)
    if args.xs[0] < args.x_min:
        raise CliError(f"x grid starts at {args.xs[0]:g}, below --x-min {args.x_min:g}", EXIT_IO)
    try:
        params = InversionParams(args.A, args.N, args.M)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            grid = density_grid(bd, args.ys, args.xs, params, workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    for w in caught:
        tag = "singular model" if issubclass(w.category, SingularDistributionWarning) else "warning"
        err.write(f"{tag}: {w.message}\n")
    text = grid.to_json() + "\n" if args.format == "json" else grid.to_csv()
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {args.output}: {exc}", EXIT_IO) from None
    else:
        out.write(text)
    return EXIT_OK


def cmd_marginal(args, out):
    model = _valid(args.model)
    ph = analytics.marginal_Z1(block_decompose(model)) if args.which == 1 else analytics.marginal_Z2(model)
    if np.any(args.xs < 0):
        raise CliError("CDF grid must be nonnegative", EXIT_IO)
    cdf = [analytics.ph_cdf(ph, x) for x in args.xs]
    if args.format == "json":
        out.write(dumps({"which": args.which, "beta": ph.beta, "T": ph.T, "defect": ph.defect,
                         "cdf": {"x": args.xs, "F": cdf}}) + "\n")
        return EXIT_OK
    out.write(f"Z{args.which} ~ PH of order {ph.order}, defect {fmt(ph.defect)}\n")
    out.write("beta = [" + ", ".join(fmt(v) for v in ph.beta) + "]\nT =\n")
    out.write(table([tuple(fmt(v) for v in row) for row in ph.T]) + "\n")
    out.write(table([(fmt(x), fmt(F)) for x, F in zip(args.xs, cdf)], header=("x", "CDF")) + "\n")
    return EXIT_OK


def cmd_moments(args, out):
    model = _valid(args.model)
    c = analytics.covariance(model)
    rows = [
        ("EZ1", c.EZ1),
        ("EZ2", c.EZ2),
        ("EZ1Z2 (derivative formula)", c.EZ1Z2),
        ("EZ1Z2 (oracle)", c.EZ1Z2_oracle),
        ("Var Z1", c.var1),
        ("Var Z2", c.var2),
        ("cov", c.cov),
        ("corr", c.corr),
    ]
    if args.format == "json":
        out.write(dumps({
            "EZ1": c.EZ1, "EZ2": c.EZ2, "EZ1Z2": c.EZ1Z2, "EZ1Z2_oracle": c.EZ1Z2_oracle,
            "var1": c.var1, "var2": c.var2, "cov": c.cov, "corr": c.corr,
        }) + "\n")
    else:
        out.write(table([(k, fmt(v)) for k, v in rows]) + "\n")
    return EXIT_OK


def cmd_simulate(args, out):
    model = _valid(args.model)
    if not 0 <= args.seed < 2**64:
        raise CliError("seed must lie in [0, 2**64)", EXIT_IO)
    report = simulate.estimate(model, args.n, args.seed, workers=args.workers)
    if args.dump_paths:
        try:
            with open(args.dump_paths, "w", encoding="utf-8") as fh:
                simulate.dump_paths(model, args.dump_count, args.seed, fh)
        except OSError as exc:
            raise CliError(f"cannot write {args.dump_paths}: {exc}", EXIT_IO) from None
    if args.format == "json":
        out.write(dumps(report.to_dict()) + "\n")
    else:
        out.write(f"seed {report.seed}, n = {report.n}\n")
        out.write(table([(k, fmt(e.value), fmt(e.stderr)) for k, e in report.estimates.items()],
                        header=("quantity", "estimate", "stderr")) + "\n")
    return EXIT_OK


def cmd_check(args, out):
    model = _valid(args.model)
    results = checks.run_battery(
        model,
        mc_samples=args.mc,
        seed=args.seed,
        workers=args.workers,
        normalization_tol=args.normalization_tol,
        lt_tol=args.lt_tol,
        moment_rtol=args.moment_rtol,
        marginal_tol=args.marginal_tol,
        mc_sigmas=args.mc_sigmas,
    )
    ok = all(r.passed for r in results)
    if args.format == "json":
        out.write(dumps({"ok": ok, "checks": [
            {"name": r.name, "delta": r.delta, "tol": r.tol, "passed": r.passed} for r in results]}) + "\n")
    else:
        out.write(table([("PASS" if r.passed else "FAIL", r.name, fmt(r.delta), fmt(r.tol)) for r in results],
                        header=("", "check", "delta", "tol")) + "\n")
    return EXIT_OK if ok else EXIT_CHECK


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_IO if exc.code else EXIT_OK
    try:
        if args.command == "density":
            return cmd_density(args, out, err)
        handler = {
            "validate": cmd_validate,
            "transform": cmd_transform,
            "marginal": cmd_marginal,
            "moments": cmd_moments,
            "simulate": cmd_simulate,
            "check": cmd_check,
        }[args.command]
        return handler(args, out)
    except CliError as exc:
        err.write(f"error: {exc}\n")
        return exc.code
    except InvalidModelError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
