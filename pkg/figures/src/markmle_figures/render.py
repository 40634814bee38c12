"""Render delimited estimator tables into static comparison figures.

Inputs are the flat CSV files written by the markmle command line: marginal
and slice curve tables, per-risk step functions, and (x, y, value) surface
tables. Rendering is a pure function of the CSV bytes and the request:
backend, canvas size, and SVG hash salt are pinned so re-rendering the same
inputs reproduces the image bytes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("contour", "marginal", "slice")

# caption roles for the curve columns of marginal and slice tables
_ROLE = {
    "mle_lower": "estimator lower",
    "mle_upper": "estimator upper",
    "limit_lower": "limit",
    "truth": "truth",
}
_STYLE = {
    "estimator lower": dict(drawstyle="steps-post", color="tab:blue",
                            linestyle="-"),
    "estimator upper": dict(drawstyle="steps-post", color="tab:cyan",
                            linestyle="--"),
    "limit": dict(color="tab:red", linestyle="-."),
    "truth": dict(color="black", linestyle=":"),
    "repaired": dict(drawstyle="steps-post", color="tab:green",
                     linestyle="-"),
}

_RC = {
    "figure.figsize": (6.4, 4.8),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "markmle-figures",
    "font.size": 10.0,
}

RISK_STEPS_HEADER = ("risk", "x", "value")


class SchemaError(ValueError):
    """An input file does not match the declared CSV schema."""


@dataclass(frozen=True)
class FigureRequest:
    """One figure to produce from one or two CSV inputs.

    kind 'marginal' takes a marginal curve table plus, optionally, a
    per-risk step table whose risks are summed into a repaired overlay.
    kind 'slice' takes a slice curve table plus, optionally, a repaired
    slice table drawn as grid markers; x0 labels the slice. kind 'contour'
    takes a single (x, y, value) table on a complete grid.
    """

    kind: str
    inputs: tuple[str, ...]
    output: str
    x0: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.kind == "contour" and len(self.inputs) != 1:
            raise SchemaError("contour takes exactly one input table")
        if self.kind in ("marginal", "slice") and len(self.inputs) > 2:
            raise SchemaError(f"{self.kind} takes at most two input tables")
        if self.kind == "slice" and self.x0 is None:
            raise SchemaError("slice figures need the x0 the table was cut at")
        if self.kind != "slice" and self.x0 is not None:
            raise SchemaError("x0 only applies to slice figures")
        if not self.output.endswith((".png", ".svg")):
            raise SchemaError("output must end in .png or .svg")


@dataclass(frozen=True)
class RenderReport:
    """What was drawn: legend labels, points per series, pixel size."""

    output: str
    series: tuple[str, ...]
    points: tuple[int, ...]
    width: int
    height: int


def read_csv(path) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
    """Header plus all-numeric rows; schema errors carry path and line."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        rows: list[tuple[float, ...]] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"{path}: line {line}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            try:
                rows.append(tuple(float(cell) for cell in row))
            except ValueError:
                raise SchemaError(
                    f"{path}: line {line}: non-numeric field in {row!r}"
                ) from None
    if not rows:
        raise SchemaError(f"{path}: no data rows after the header")
    return tuple(header), rows


def _read_curves(path, axis: str):
    """A curve table: first column `axis`, rest known curve columns."""
    header, rows = read_csv(path)
    if header[0] != axis or len(header) < 2:
        raise SchemaError(
            f"{path}: expected a table with first column {axis!r}, "
            f"got {','.join(header)!r}"
        )
    unknown = [c for c in header[1:] if c not in _ROLE]
    if unknown:
        raise SchemaError(
            f"{path}: unknown curve columns {unknown}; expected a subset of "
            f"{sorted(_ROLE)}"
        )
    return header, rows


def _read_repaired_steps(path):
    header, rows = read_csv(path)
    if header != RISK_STEPS_HEADER:
        raise SchemaError(
            f"{path}: expected header risk,x,value, got {','.join(header)!r}"
        )
    return rows


def _repaired_marginal(rows):
    """Sum the per-risk step functions into one marginal step curve.

    Risk 0 is the terminal half-line and carries no sub-distribution mass
    below any finite x, so it is skipped.
    """
    by_risk: dict[int, list[tuple[float, float]]] = {}
    for risk, x, value in rows:
        j = int(risk)
        if j == 0:
            continue
        by_risk.setdefault(j, []).append((x, value))
    xs = sorted({x for pts in by_risk.values() for x, _ in pts})
    total = []
    for x in xs:
        s = 0.0
        for pts in by_risk.values():
            val = 0.0
            for px, pv in pts:
                if px > x:
                    break
                val = pv
            s += val
        total.append(s)
    return xs, total


def _save(fig, request: FigureRequest) -> tuple[int, int]:
    width, height = fig.canvas.get_width_height()
    if request.output.endswith(".svg"):
        fig.savefig(request.output, format="svg", metadata={"Date": None})
    else:
        fig.savefig(request.output, format="png")
    plt.close(fig)
    return width, height


def _render_curve_table(request: FigureRequest) -> RenderReport:
    axis = "x" if request.kind == "marginal" else "y"
    header, rows = _read_curves(request.inputs[0], axis)
    grid = [row[0] for row in rows]
    series: list[str] = []
    points: list[int] = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for col, name in enumerate(header[1:], start=1):
            role = _ROLE[name]
            values = [row[col] for row in rows]
            ax.plot(grid, values, label=role, **_STYLE[role])
            series.append(role)
            points.append(len(values))
        if len(request.inputs) == 2:
            if request.kind == "marginal":
                steps = _read_repaired_steps(request.inputs[1])
                xs, totals = _repaired_marginal(steps)
                ax.plot(xs, totals, label="repaired", **_STYLE["repaired"])
                series.append("repaired")
                points.append(len(xs))
            else:
                rheader, rrows = read_csv(request.inputs[1])
                if rheader != ("y", "repaired"):
                    raise SchemaError(
                        f"{request.inputs[1]}: expected header y,repaired, "
                        f"got {','.join(rheader)!r}"
                    )
                ys = [row[0] for row in rrows]
                vals = [row[1] for row in rrows]
                ax.plot(ys, vals, "o", color="tab:green", markersize=4,
                        linestyle="none", label="repaired")
                series.append("repaired")
                points.append(len(ys))
        ax.set_xlabel(axis)
        if request.kind == "slice":
            ax.set_ylabel(f"distribution at x = {request.x0:g}")
        else:
            ax.set_ylabel("marginal distribution")
        ax.legend(loc="best")
        width, height = _save(fig, request)
    return RenderReport(
        output=request.output,
        series=tuple(series),
        points=tuple(points),
        width=width,
        height=height,
    )


def _render_contour(request: FigureRequest) -> RenderReport:
    header, rows = read_csv(request.inputs[0])
    if len(header) != 3:
        raise SchemaError(
            f"{request.inputs[0]}: expected three columns x,y,<value>, "
            f"got {','.join(header)!r}"
        )
    xs = sorted({row[0] for row in rows})
    ys = sorted({row[1] for row in rows})
    lookup = {(row[0], row[1]): row[2] for row in rows}
    if len(lookup) != len(rows):
        raise SchemaError(f"{request.inputs[0]}: duplicate (x, y) pairs")
    if len(lookup) != len(xs) * len(ys):
        raise SchemaError(
            f"{request.inputs[0]}: (x, y) points do not form a complete grid"
        )
    grid = [[lookup[(x, y)] for x in xs] for y in ys]
    name = header[2]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        cs = ax.contour(xs, ys, grid, levels=10)
        ax.clabel(cs, inline=True, fontsize=8)
        ax.set_xlabel(header[0])
        ax.set_ylabel(header[1])
        ax.set_title(name)
        width, height = _save(fig, request)
    return RenderReport(
        output=request.output,
        series=(name,),
        points=(len(rows),),
        width=width,
        height=height,
    )


def render(request: FigureRequest) -> RenderReport:
    """Draw the requested figure and return what was plotted."""
    if request.kind == "contour":
        return _render_contour(request)
    return _render_curve_table(request)
