"""Command-line front end: fit, limit, check, repair, simulate.

Exit codes are part of the interface: 0 success, 2 parse error (bad file or
bad arguments), 3 invariant violation (well-formed input that breaks a data
rule), 4 numeric failure (quadrature breakdown or an evaluation outside the
valid window). Diagnostics go to stderr; data goes to output files, except
``check`` whose report is the payload and prints to stdout.
"""

from __future__ import annotations

import argparse
import importlib
import sys
from pathlib import Path

from . import formats
from .consistency import EmptyGridError, check_consistency
from .data import EmptyDatasetError, MixedKError, order_dataset
from .limits import (
    DEFAULT_QUADRATURE,
    DivisionByZeroMeasure,
    PopulationModel,
    QuadratureFailure,
    WindowViolation,
    make_evaluation_window,
    pop_Flim,
    pop_FXlim,
)
from .maxint import maximal_intersections
from .models import EXAMPLE_IDS, example_info
from .plmle import InternalConsistencyError, fit_masses
from .repaired import CRConfig, MarkGrid, discretize_marks, fit_cr_mle
from .simulate import DEFAULT_CURVES, ExampleSpec, StudyConfig, run_study

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVARIANT = 3
EXIT_NUMERIC = 4


class UsageError(ValueError):
    """Bad argument combination detected after argparse."""


def _marginal_step_rows(masses, bound: str):
    """Corner points (x, post-jump value) of the marginal bound."""
    jumps: dict[float, float] = {}
    if bound == "lower":
        for seg, p in zip(masses.segments, masses.probabilities):
            jumps[seg.r] = jumps.get(seg.r, 0.0) + p
    else:
        for seg, p in zip(masses.segments, masses.probabilities):
            jumps[seg.d] = jumps.get(seg.d, 0.0) + p
        if masses.censored_tail > 0.0:
            jumps[masses.u_last] = (
                jumps.get(masses.u_last, 0.0) + masses.censored_tail
            )
    rows = []
    running = 0.0
    for x in sorted(jumps):
        running += jumps[x]
        rows.append((x, running))
    return rows


def cmd_fit(args) -> int:
    observations = formats.read_dataset(args.input)
    ordered = order_dataset(observations)
    masses = fit_masses(ordered, maximal_intersections(ordered))
    formats.write_masses(args.output, masses)
    if args.marginal is not None:
        formats.write_step(args.marginal, _marginal_step_rows(masses, args.bound))
    return EXIT_OK


def cmd_limit(args) -> int:
    info = example_info(args.example)
    model = info.model
    tau = args.tau if args.tau is not None else info.default_tau
    window = make_evaluation_window(
        model, tau=tau, grid_step=args.grid_step, config=DEFAULT_QUADRATURE
    )
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    marginal_rows = [
        (x, pop_FXlim(model, window, x)) for x in window.grid
    ]
    formats.write_step(out_dir / "marginal.csv", marginal_rows)

    y_grid = []
    i = 1
    while info.mark_min + i * args.grid_step <= info.mark_max + 1e-12:
        y_grid.append(info.mark_min + i * args.grid_step)
        i += 1
    surface_rows = [
        (x, y, pop_Flim(model, window, x, y)) for x in window.grid for y in y_grid
    ]
    formats.write_table(out_dir / "surface.csv", ("x", "y", "value"), surface_rows)
    return EXIT_OK


def _resolve_model(spec: str) -> PopulationModel:
    module_name, _, attr = spec.partition(":")
    if not module_name or not attr:
        raise UsageError("--model expects MODULE:ATTRIBUTE")
    try:
        module = importlib.import_module(module_name)
    except ImportError as exc:
        raise UsageError(f"cannot import {module_name!r}: {exc}") from exc
    try:
        obj = getattr(module, attr)
    except AttributeError as exc:
        raise UsageError(f"{module_name!r} has no attribute {attr!r}") from exc
    if callable(obj) and not isinstance(obj, PopulationModel):
        try:
            obj = obj()
        except TypeError as exc:
            raise UsageError(
                f"calling {spec!r} failed: {exc}; a model factory must "
                "take no arguments"
            ) from exc
    if not isinstance(obj, PopulationModel):
        raise UsageError(f"{spec!r} did not resolve to a population model")
    return obj


def cmd_check(args) -> int:
    if args.example is not None:
        info = example_info(args.example)
        model = info.model
        tau = args.tau if args.tau is not None else info.default_tau
        span = info.mark_max - info.mark_min
        y_grid = [info.mark_min + span * f for f in (0.25, 0.5, 0.75)]
        heading = f"example={args.example}"
    else:
        if args.tau is None:
            raise UsageError("--tau is required with --model")
        model = _resolve_model(args.model)
        tau = args.tau
        y_grid = [float(tok) for tok in args.marks.split(",")] if args.marks else []
        heading = f"model={args.model}"
    window = make_evaluation_window(
        model, tau=tau, grid_step=args.grid_step, config=DEFAULT_QUADRATURE
    )
    report = check_consistency(
        model, window, y_grid, DEFAULT_QUADRATURE, threshold=args.threshold
    )
    out = [heading, "x,limit_hazard_x,truth_hazard_x,gap"]
    for x, lim, tru in report.x_rows:
        out.append(
            f"{formats.fmt(x)},{formats.fmt(lim)},{formats.fmt(tru)},"
            f"{formats.fmt(abs(lim - tru))}"
        )
    out.append(f"hazard_x_gap={formats.fmt(report.hazard_x_gap)}")
    out.append(f"hazard_xy_gap={formats.fmt(report.hazard_xy_gap)}")
    out.append(f"verdict={report.verdict}")
    print("\n".join(out))
    return EXIT_OK


def cmd_repair(args) -> int:
    observations = formats.read_dataset(args.input)
    grid = MarkGrid.equidistant(args.grid_k, args.grid_min, args.grid_max)
    estimate = fit_cr_mle(discretize_marks(observations, grid), CRConfig())
    formats.write_risk_steps(args.output, estimate)
    if estimate.all_censored:
        print("warning: no observed events; all mass on the tail",
              file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    include = set(DEFAULT_CURVES)
    if args.repaired:
        include.add("repaired")
    config = StudyConfig(
        example=ExampleSpec(example_id=args.example, n=args.n, seed=args.seed),
        include=frozenset(include),
        mark_grid_k=args.mark_grid_k,
        tau=args.tau,
        grid_step=args.grid_step,
    )
    result = run_study(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_dataset(out_dir / "dataset.csv", result.dataset)
    formats.write_table(
        out_dir / "marginal.csv", result.marginal.columns, result.marginal.rows
    )
    formats.write_table(
        out_dir / "slice.csv", result.slice_table.columns, result.slice_table.rows
    )
    summary = [("slice_x0", result.slice_x0)]
    if result.sup_marginal_gap is not None:
        summary.append(("sup_marginal_gap", result.sup_marginal_gap))
    if result.sup_repaired_gap is not None:
        summary.append(("sup_repaired_gap", result.sup_repaired_gap))
    formats.write_table(out_dir / "summary.csv", ("name", "value"), summary)
    if args.repaired:
        formats.write_risk_steps(
            out_dir / "repaired_steps.csv", result.repaired_estimate
        )
        formats.write_table(
            out_dir / "repaired_surface.csv",
            result.repaired_table.columns,
            result.repaired_table.rows,
        )
        formats.write_table(
            out_dir / "repaired_slice.csv",
            result.repaired_slice.columns,
            result.repaired_slice.rows,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markmle",
        description=(
            "Nonparametric estimation for interval-censored survival times "
            "with marks: MLE fitting, population limits, consistency "
            "checking, the grid-repaired estimator, and simulation studies."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the MLE masses to a dataset CSV")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--bound", choices=("lower", "upper"), default="lower")
    p_fit.add_argument("--output", required=True)
    p_fit.add_argument("--marginal", default=None,
                       help="also write the marginal step function here")
    p_fit.set_defaults(func=cmd_fit)

    p_limit = sub.add_parser(
        "limit", help="tabulate the population limit of the lower bound"
    )
    p_limit.add_argument("--example", type=int, choices=EXAMPLE_IDS,
                         required=True)
    p_limit.add_argument("--grid-step", type=float, default=0.02)
    p_limit.add_argument("--tau", type=float, default=None)
    p_limit.add_argument("--output", required=True,
                         help="directory for marginal.csv and surface.csv")
    p_limit.set_defaults(func=cmd_limit)

    p_check = sub.add_parser(
        "check", help="compare limit hazards against the true hazards"
    )
    group = p_check.add_mutually_exclusive_group(required=True)
    group.add_argument("--example", type=int, choices=EXAMPLE_IDS)
    group.add_argument("--model", default=None,
                       help="MODULE:ATTRIBUTE resolving to a population model")
    p_check.add_argument("--grid-step", type=float, default=0.05)
    p_check.add_argument("--tau", type=float, default=None)
    p_check.add_argument("--threshold", type=float, default=None)
    p_check.add_argument("--marks", default=None,
                         help="comma-separated mark levels (with --model)")
    p_check.set_defaults(func=cmd_check)

    p_repair = sub.add_parser(
        "repair", help="fit the mark-grid competing-risks estimator"
    )
    p_repair.add_argument("--input", required=True)
    p_repair.add_argument("--grid-k", type=int, default=20)
    p_repair.add_argument("--grid-min", type=float, required=True)
    p_repair.add_argument("--grid-max", type=float, required=True)
    p_repair.add_argument("--output", required=True)
    p_repair.set_defaults(func=cmd_repair)

    p_sim = sub.add_parser(
        "simulate", help="simulate an example and tabulate estimator curves"
    )
    p_sim.add_argument("--example", type=int, choices=EXAMPLE_IDS,
                       required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out-dir", required=True)
    p_sim.add_argument("--repaired", action="store_true")
    p_sim.add_argument("--grid-step", type=float, default=0.02)
    p_sim.add_argument("--mark-grid-k", type=int, default=20)
    p_sim.add_argument("--tau", type=float, default=None)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except formats.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except formats.RowInvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (
        QuadratureFailure,
        WindowViolation,
        DivisionByZeroMeasure,
        InternalConsistencyError,
        OverflowError,
        FloatingPointError,
    ) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MixedKError, EmptyDatasetError, EmptyGridError, ValueError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
