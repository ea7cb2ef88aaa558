#!/usr/bin/env python3
"""
Command-line entry point.

    sphereval grid dump --grid icosphere:3 --out grid.csv
    sphereval field eval --field f.json --x 0,0,1
    sphereval field norms --field f.json --grid icosphere:5
    sphereval body measure --body cone.json --out measure.csv
    sphereval body pair --body cone.json --test x1^3
    sphereval valuation eval --spec rotinv.json --field const1.json --grid icosphere:5
    sphereval valuation check --suite invariance --spec theta2.json --out report.csv
    sphereval counterexample sweep --n 4 --delta auto --kmin 32 --kmax 1024 --out sweep.csv
    sphereval counterexample verify-estimate --n 4 --delta 0.917
    sphereval counterexample find-delta --n 4
    sphereval suite all --grid icosphere:5 --out report.csv [--quick]

Exit codes: 0 success, 1 a check failed, 2 bad usage or input.
"""

import argparse
import logging
import os
import sys

import numpy as np
from rich.console import Console
from rich.table import Table

from bin import __version__
from bin.config_reader import get_config
from bin.counterexample.construction import (
    admissible_p_interval,
    find_delta,
    sample_cap,
    verify_estimate,
)
from bin.counterexample.sweep import (
    SweepConfig,
    fit_exponent,
    powers_of_two,
    sweep,
    witness_tau_report,
    write_sweep_csv,
)
from bin.errors import InputSpecError, SpherevalError
from bin.geometry import bodies
from bin.geometry.fields import TauTolerances, evaluate, lip_est, sup_norm
from bin.geometry.quadrature import dump_grid, grid_summary, load_grid, parse_grid_spec
from bin.specs import load_json, parse_body, parse_field, parse_valuation
from bin.suite import SuiteSettings, run_suite
from bin.utils.common import configure_logging, write_csv
from bin.valuations.checks import (
    degree_battery,
    invariance_battery,
    pde_battery,
    valuation_property_battery,
)
from bin.valuations.functionals import AreaIntegral, Theta2

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["case", "residual", "tol", "pass"]
TEST_FUNCTIONS = {
    "one": lambda X: np.ones(X.shape[0]),
    "x1": lambda X: X[:, 0],
    "x1^3": lambda X: X[:, 0] ** 3,
}


def _banner(title):
    print("=" * 60)
    print(title)
    print("=" * 60)


def _format_value(value):
    value = complex(value)
    return repr(value.real) if value.imag == 0 else repr(value)


def _to_stdout(path):
    return path in (None, "-")


def _report_table(title, reports):
    table = Table(title=title)
    for column in REPORT_COLUMNS:
        table.add_column(column)
    for r in reports:
        table.add_row(r.case, f"{r.residual:.3e}", f"{r.tol:.1e}", "pass" if r.passed else "FAIL")
    return table


def _emit_reports(reports, out, metadata, title):
    write_csv(out, REPORT_COLUMNS, [r.as_row() for r in reports], metadata)
    failed = [r for r in reports if not r.passed]
    if not _to_stdout(out):
        console = Console()
        console.print(_report_table(title, failed or reports[-10:]))
        print(f"{len(reports) - len(failed)} of {len(reports)} case(s) passed; report in {out}")
    return 1 if failed else 0


def _grid(args, config, n):
    """A grid spec string, or the path of a file written by `grid dump`."""
    spec = args.grid or config.get("DEFAULT_GRID", "icosphere:5")
    if os.path.isfile(spec):
        grid = load_grid(spec)
        if grid.ambient_dim != n:
            raise InputSpecError(f"{spec} holds an S^{grid.ambient_dim - 1} grid, need n={n}")
        return grid.spec, grid
    return spec, parse_grid_spec(spec, n)


def cmd_grid_dump(args, config):
    _, grid = _grid(args, config, args.n)
    dump_grid(grid, args.out)
    spec, count, mass = grid_summary(grid)
    print(f"Wrote {count} nodes of {spec} (total mass {mass:.15g}) to {args.out}")
    return 0


def cmd_field_eval(args, config):
    f = parse_field(load_json(args.field))
    for text in args.x:
        x = np.array([float(v) for v in text.split(",")])
        x = x / np.linalg.norm(x)
        print(f"{text}\t{evaluate(f, x)!r}")
    return 0


def cmd_field_norms(args, config):
    f = parse_field(load_json(args.field))
    spec, grid = _grid(args, config, f.ambient_dim)
    lip, ties = lip_est(f, grid, with_ties=True)
    print(f"grid={spec}")
    print(f"sup_norm={sup_norm(f, grid)!r}")
    print(f"lip_est={lip!r}")
    print(f"ties={ties}")
    return 0


def cmd_body_measure(args, config):
    K = parse_body(load_json(args.body))
    S = bodies.area_measure(K)
    header = ["type", "dir_or_param", "mass_or_coeff"]
    write_csv(args.out, header, bodies.export_measure_rows(S), {"grid": "none", "seed": 0})
    if not _to_stdout(args.out):
        print(f"Wrote {len(S.atoms)} atom(s), {len(S.sheets)} sheet(s) to {args.out}")
    return 0


def cmd_body_pair(args, config):
    K = parse_body(load_json(args.body))
    S = bodies.area_measure(K)
    grid = None
    if S.smooth_parts:
        _, grid = _grid(args, config, S.ambient_dim)
    resolution = args.sheet_resolution or int(config.get("SHEET_RESOLUTION", 64))
    value = bodies.measure_pair(S, TEST_FUNCTIONS[args.test], resolution, grid)
    print(_format_value(value))
    return 0


def cmd_valuation_eval(args, config):
    mu = parse_valuation(load_json(args.spec))
    if isinstance(mu, AreaIntegral):
        if not args.body:
            raise InputSpecError("--body is required for area valuations")
        print(_format_value(mu.evaluate(parse_body(load_json(args.body)))))
        return 0
    if not args.field:
        raise InputSpecError("--field is required for field valuations")
    f = parse_field(load_json(args.field))
    _, grid = _grid(args, config, f.ambient_dim)
    print(_format_value(mu.evaluate(f, grid)))
    return 0


def cmd_valuation_check(args, config):
    mu = parse_valuation(load_json(args.spec))
    if isinstance(mu, AreaIntegral):
        raise InputSpecError("--spec: valuation check needs a field valuation, not an area one")
    spec, grid = _grid(args, config, args.n)
    seed = args.seed if args.seed is not None else int(config.get("RANDOM_SEED", 0))
    workers = int(config.get("MAX_WORKERS", 1))
    progress = not args.quiet and not _to_stdout(args.out)

    if args.suite == "valuation-property":
        tol = float(config.get("TOL_VALUATION", 1e-6))
        reports = valuation_property_battery(
            mu, grid, args.cases or 100, seed, tol, workers, progress
        )
    elif args.suite == "invariance":
        tol = float(config.get("TOL_INVARIANCE", 1e-5))
        reports = invariance_battery(mu, grid, args.cases or 50, seed, tol, workers, progress)
    elif args.suite == "degree":
        tol = float(config.get("TOL_DEGREE", 1e-8))
        reports = degree_battery(mu, grid, args.cases or 10, seed, tol, workers, progress)
    else:
        if not isinstance(mu, Theta2):
            raise InputSpecError("--suite pde needs a theta2 valuation spec")
        reports = pde_battery(
            mu.density,
            mu.density.ambient_dim,
            args.cases or 50,
            seed,
            float(config.get("FD_STEP", 1e-4)),
            float(config.get("TOL_PDE", 1e-4)),
        )
    return _emit_reports(reports, args.out, {"grid": spec, "seed": seed}, mu.describe())


def _sweep_config(args, config):
    n = args.n or int(config.get("SWEEP_N", 4))
    delta_text = str(args.delta or config.get("SWEEP_DELTA", "auto"))
    p_text = str(args.p or config.get("SWEEP_P", "auto"))
    kmin = args.kmin or int(config.get("SWEEP_KMIN", 32))
    kmax = args.kmax or int(config.get("SWEEP_KMAX", 1024))
    try:
        delta = None if delta_text == "auto" else float(delta_text)
        p = None if p_text == "auto" else float(p_text)
        return SweepConfig(n=n, delta=delta, p=p, k_values=powers_of_two(kmin, kmax))
    except ValueError as exc:
        raise InputSpecError(f"--delta/--p/--kmin: {exc}") from exc


def cmd_counterexample_sweep(args, config):
    cfg = _sweep_config(args, config)
    spec = args.grid or config.get("SWEEP_GRID", "mc:1000000:seed0")
    grid = parse_grid_spec(spec, cfg.n)
    workers = int(config.get("MAX_WORKERS", 1))
    to_stdout = _to_stdout(args.out)

    if not to_stdout:
        _banner("Divergence sweep")
        print(f"n={cfg.n} p={cfg.p:.6g} delta={cfg.delta} k={list(cfg.k_values)} grid={spec}")
    records = sweep(cfg, grid, workers, progress=not args.quiet and not to_stdout)
    write_sweep_csv(records, args.out, spec, grid.seed if grid.seed is not None else 0)
    if to_stdout or len(records) < 2:
        return 0

    table = Table(title="nu(f_k) and norms")
    for column in ("k", "N", "nu_fk", "sup_norm", "lip_est", "d_tau", "ties"):
        table.add_column(column)
    for r in records:
        table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in r.as_row()))
    Console().print(table)

    tols = TauTolerances(
        float(config.get("TAU_SUP_TOL", 1e-2)),
        float(config.get("TAU_GRAD_TOL", 1e-2)),
        float(config.get("TAU_LIP_BOUND", 2.0)),
    )
    tau = witness_tau_report(cfg, grid, tols, records)
    lower, upper = admissible_p_interval(cfg.n)
    nu_theory = 2 * cfg.n - 4 - cfg.p * (cfg.n - 1)
    print(f"nu exponent       {fit_exponent(records, 'nu'):.4f}  (theory {nu_theory:.4f})")
    print(f"sup_norm exponent {fit_exponent(records, 'sup_norm'):.4f}  (theory {-cfg.p:.4f})")
    print(f"lip_est exponent  {fit_exponent(records, 'lip_est'):.4f}  (theory {1 - cfg.p:.4f})")
    print(f"p interval        ({lower:.4f}, {upper:.4f})")
    print(f"tau verdict       {tau.verdict} (lip bound {tau.gradient_linf_bound:.4f})")
    print("=" * 60)
    return 0


def cmd_counterexample_verify(args, config):
    n = args.n or 4
    delta = find_delta(n) if args.delta in (None, "auto") else float(args.delta)
    rng = np.random.default_rng(args.seed)
    lams = [float(v) for v in args.lambdas.split(",")]
    report = verify_estimate(delta, lams, sample_cap(delta, args.samples, n, rng), n)
    print(f"delta={delta} samples={report.samples} violations={report.violations}")
    print(f"worst_margin={report.worst_margin!r}")
    print(f"worst_ratio={report.worst_ratio!r}")
    return 0 if report.passed else 1


def cmd_counterexample_find_delta(args, config):
    print(find_delta(args.n))
    return 0


def cmd_suite_all(args, config):
    overrides = dict(
        grid_spec=args.grid or config.get("DEFAULT_GRID", "icosphere:5"),
        gauss_order=int(config.get("GAUSS_ORDER", 32)),
        seed=int(config.get("RANDOM_SEED", 0)),
        max_workers=int(config.get("MAX_WORKERS", 1)),
        progress=not args.quiet and not _to_stdout(args.out),
    )
    if args.quick:
        settings = SuiteSettings.quick(**overrides)
    else:
        overrides["sweep_grid_spec"] = config.get("SWEEP_GRID", "mc:1000000:seed0")
        settings = SuiteSettings(**overrides)
    if not _to_stdout(args.out):
        _banner(f"sphereval {__version__} acceptance suite{' (quick)' if args.quick else ''}")
    only = set(args.only.split(",")) if args.only else None
    reports = run_suite(settings, only)
    return _emit_reports(
        reports, args.out, {"grid": settings.grid_spec, "seed": settings.seed}, "suite"
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="sphereval", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--quiet", action="store_true", help="Errors only, no progress lines")
    commands = parser.add_subparsers(dest="command", required=True)

    grid = commands.add_parser("grid").add_subparsers(dest="action", required=True)
    dump = grid.add_parser("dump", help="Write grid nodes and weights as CSV")
    dump.add_argument("--grid")
    dump.add_argument("--n", type=int, default=3)
    dump.add_argument("--out", required=True)
    dump.set_defaults(handler=cmd_grid_dump)

    field = commands.add_parser("field").add_subparsers(dest="action", required=True)
    field_eval = field.add_parser("eval", help="Evaluate a field at points")
    field_eval.add_argument("--field", required=True)
    field_eval.add_argument("--x", action="append", required=True, help="Comma-separated point")
    field_eval.set_defaults(handler=cmd_field_eval)
    norms = field.add_parser("norms", help="Sup norm and Lipschitz estimate")
    norms.add_argument("--field", required=True)
    norms.add_argument("--grid")
    norms.set_defaults(handler=cmd_field_norms)

    body = commands.add_parser("body").add_subparsers(dest="action", required=True)
    measure = body.add_parser("measure", help="Export the area measure as CSV")
    measure.add_argument("--body", required=True)
    measure.add_argument("--out")
    measure.set_defaults(handler=cmd_body_measure)
    pair = body.add_parser("pair", help="Pair the area measure with a test function")
    pair.add_argument("--body", required=True)
    pair.add_argument("--test", choices=sorted(TEST_FUNCTIONS), default="x1^3")
    pair.add_argument("--sheet-resolution", type=int)
    pair.add_argument("--grid")
    pair.set_defaults(handler=cmd_body_pair)

    valuation = commands.add_parser("valuation").add_subparsers(dest="action", required=True)
    val_eval = valuation.add_parser("eval", help="Evaluate a valuation")
    val_eval.add_argument("--spec", required=True)
    val_eval.add_argument("--field")
    val_eval.add_argument("--body")
    val_eval.add_argument("--grid")
    val_eval.set_defaults(handler=cmd_valuation_eval)
    check = valuation.add_parser("check", help="Run a checker battery")
    check.add_argument(
        "--suite", required=True, choices=["valuation-property", "invariance", "degree", "pde"]
    )
    check.add_argument("--spec", required=True)
    check.add_argument("--grid")
    check.add_argument("--n", type=int, default=3)
    check.add_argument("--cases", type=int)
    check.add_argument("--seed", type=int)
    check.add_argument("--out")
    check.set_defaults(handler=cmd_valuation_check)

    counter = commands.add_parser("counterexample").add_subparsers(dest="action", required=True)
    sweep_parser = counter.add_parser("sweep", help="nu(f_k) and norms over k")
    sweep_parser.add_argument("--n", type=int)
    sweep_parser.add_argument("--p")
    sweep_parser.add_argument("--delta")
    sweep_parser.add_argument("--kmin", type=int)
    sweep_parser.add_argument("--kmax", type=int)
    sweep_parser.add_argument("--grid")
    sweep_parser.add_argument("--out")
    sweep_parser.set_defaults(handler=cmd_counterexample_sweep)
    verify = counter.add_parser("verify-estimate", help="Check the cap estimate on samples")
    verify.add_argument("--n", type=int, default=4)
    verify.add_argument("--delta")
    verify.add_argument("--lambdas", default="2,4,8,16")
    verify.add_argument("--samples", type=int, default=500)
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(handler=cmd_counterexample_verify)
    delta = counter.add_parser("find-delta", help="Smallest admissible cap threshold")
    delta.add_argument("--n", type=int, default=4)
    delta.set_defaults(handler=cmd_counterexample_find_delta)

    suite = commands.add_parser("suite").add_subparsers(dest="action", required=True)
    suite_all = suite.add_parser("all", help="Run every acceptance battery")
    suite_all.add_argument("--grid")
    suite_all.add_argument("--out")
    suite_all.add_argument("--quick", action="store_true")
    suite_all.add_argument("--only", help="Comma-separated battery names")
    suite_all.set_defaults(handler=cmd_suite_all)
    return parser


def run(argv):
    """Parse argv, run the subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    configure_logging(args.verbose, args.quiet)
    try:
        config = get_config()
        return args.handler(args, config)
    except ValueError as exc:
        # bad specs, grids, dimensions and parameters
        print(f"Error: {exc}", file=sys.stderr)
        return 2
    except SpherevalError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


def main():
    """Console-script entry point."""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
