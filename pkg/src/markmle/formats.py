"""Flat CSV formats shared by the command line and downstream consumers.

Every artifact is UTF-8 with LF line endings and a mandatory header row.
Floats are rendered with repr(), the shortest decimal string that parses
back to the identical double, so written files round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import math
from typing import Iterable, Sequence

from .data import Observation
from .plmle import MassVector

MASSES_HEADER = ("d", "r", "z", "mass")
STEP_HEADER = ("x", "value")
RISK_STEPS_HEADER = ("risk", "x", "value")


class ParseError(ValueError):
    """Input file malformed; carries the 1-based file line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RowInvariantError(ValueError):
    """A syntactically valid row violates a dataset invariant.

    ``row`` is the 1-based data row index (header excluded).
    """

    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


def fmt(value) -> str:
    """Shortest decimal form of a float that round-trips; strings pass through."""
    if isinstance(value, str):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def _writer(f):
    return csv.writer(f, lineterminator="\n")


def dataset_header(k: int) -> list[str]:
    return [f"t{i}" for i in range(1, k + 1)] + ["j", "z"]


def write_dataset(path, observations: Sequence[Observation]) -> None:
    observations = list(observations)
    if not observations:
        raise ValueError("refusing to write an empty dataset")
    k = observations[0].k
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(dataset_header(k))
        for obs in observations:
            z = "" if obs.mark is None else fmt(obs.mark)
            w.writerow([fmt(t) for t in obs.times] + [str(obs.delta_index), z])


def read_dataset(path) -> list[Observation]:
    """Parse an observation file; k is inferred from the header width."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        k = len(header) - 2
        if k < 1 or header != dataset_header(k):
            raise ParseError(
                f"header must be t1,..,tk,j,z; got {','.join(header)!r}", line=1
            )
        observations: list[Observation] = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != k + 2:
                raise ParseError(
                    f"expected {k + 2} fields, got {len(row)}", line=line
                )
            try:
                times = tuple(float(cell) for cell in row[:k])
                j = int(row[k])
            except ValueError:
                raise ParseError(
                    f"non-numeric field in {row!r}", line=line
                ) from None
            z_cell = row[k + 1].strip()
            if z_cell:
                try:
                    mark = float(z_cell)
                except ValueError:
                    raise ParseError(f"bad mark {z_cell!r}", line=line) from None
            else:
                mark = None
            try:
                observations.append(
                    Observation(times=times, delta_index=j, mark=mark)
                )
            except ValueError as exc:
                raise RowInvariantError(str(exc), row=line - 1) from exc
    if not observations:
        raise ParseError("no data rows after the header", line=2)
    return observations


def write_masses(path, masses: MassVector) -> None:
    """Fitted masses: one row per segment, then the halfplane row if any.

    The halfplane row carries the left endpoint in ``d``, ``inf`` in ``r``
    and an empty mark column.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(MASSES_HEADER)
        for seg, p in zip(masses.segments, masses.probabilities):
            w.writerow([fmt(seg.d), fmt(seg.r), fmt(seg.mark), fmt(p)])
        if masses.censored_tail > 0.0:
            w.writerow(
                [fmt(masses.u_last), "inf", "", fmt(masses.censored_tail)]
            )


def read_masses(path) -> list[tuple[float, float, float | None, float]]:
    """Rows of a masses file as (d, r, z, mass); z is None on the halfplane row."""
    out: list[tuple[float, float, float | None, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        if tuple(header) != MASSES_HEADER:
            raise ParseError("header must be d,r,z,mass", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", line=line)
            try:
                d = float(row[0])
                r = float(row[1])
                z = float(row[2]) if row[2].strip() else None
                mass = float(row[3])
            except ValueError:
                raise ParseError(
                    f"non-numeric field in {row!r}", line=line
                ) from None
            if z is None and math.isfinite(r):
                raise ParseError(
                    "empty mark is only allowed on the halfplane row", line=line
                )
            out.append((d, r, z, mass))
    return out


def write_step(path, rows: Iterable[tuple[float, float]]) -> None:
    """(x, value) corner points of a step function, post-jump values."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(STEP_HEADER)
        for x, v in rows:
            w.writerow([fmt(x), fmt(v)])


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Header plus uniform rows; numeric cells use round-trip formatting."""
    columns = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(columns)
        for row in rows:
            cells = list(row)
            if len(cells) != len(columns):
                raise ValueError(
                    f"row width {len(cells)} does not match header width "
                    f"{len(columns)}"
                )
            w.writerow([fmt(c) for c in cells])


def read_table(path) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
    """Header names plus all-numeric rows."""
    rows: list[tuple[float, ...]] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        if not header:
            raise ParseError("blank header row", line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=line
                )
            try:
                rows.append(tuple(float(cell) for cell in row))
            except ValueError:
                raise ParseError(
                    f"non-numeric field in {row!r}", line=line
                ) from None
    return tuple(header), rows


def write_risk_steps(path, estimate) -> None:
    """Per-risk sub-distribution step functions as risk,x,value rows.

    Every risk class opens with an (x=0, value=0) anchor so all classes are
    present even when empty; subsequent rows carry each support cell's right
    endpoint with the cumulative mass through it. A terminal half-line, when
    present, is recorded as a single risk 0 row holding its left endpoint
    and mass.
    """
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(RISK_STEPS_HEADER)
        for j, cells in enumerate(estimate.risk_cells, start=1):
            w.writerow([str(j), fmt(0.0), fmt(0.0)])
            running = 0.0
            for _, r, mass in cells:
                running += mass
                w.writerow([str(j), fmt(r), fmt(running)])
        if estimate.tail_location is not None:
            w.writerow(
                ["0", fmt(estimate.tail_location), fmt(estimate.tail_mass)]
            )
