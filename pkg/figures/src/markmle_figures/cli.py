"""Command line wrapper: one figure per invocation.

Exit codes: 0 on success, 2 on schema mismatch, unreadable input, or bad
arguments. The report line on stdout lists the plotted series so batch
scripts can verify what was drawn.
"""

from __future__ import annotations

import argparse
import sys

from .render import FigureRequest, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="markmle-figures",
        description=(
            "Render markmle CSV tables into static comparison figures: "
            "marginal curve overlays, fixed-x0 slice plots, and contour "
            "plots of surface tables."
        ),
    )
    parser.add_argument("inputs", nargs="+",
                        help="input CSV files (order: curve table first, "
                             "then the optional repaired table)")
    parser.add_argument("--kind", required=True,
                        choices=("contour", "marginal", "slice"))
    parser.add_argument("--output", required=True,
                        help="image path ending in .png or .svg")
    parser.add_argument("--x0", type=float, default=None,
                        help="slice location, required for --kind slice")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        request = FigureRequest(
            kind=args.kind,
            inputs=tuple(args.inputs),
            output=args.output,
            x0=args.x0,
        )
        report = render(request)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {report.output} ({report.width}x{report.height}): "
        + ", ".join(f"{s} [{p}]" for s, p in zip(report.series, report.points))
    )
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
