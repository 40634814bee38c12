"""Seeded data generators for the four examples and the study harness.

Sampling uses the Philox counter-based generator, split into independent
streams keyed by (seed, example id, stream index), so datasets are
reproducible bit-for-bit and independent of execution order. Uniform draws
are taken as 1 - U with U in [0, 1) wherever a strictly positive value is
required; exponentials use the inverse CDF.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Observation, order_dataset
from .limits import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    make_evaluation_window,
    pop_Flim,
    pop_FXlim,
)
from .maxint import maximal_intersections
from .models import EXAMPLE_IDS, example_info
from .plmle import MassVector, eval_F, eval_FX, fit_masses
from .repaired import (
    CRConfig,
    MarkGrid,
    SubDistributionEstimate,
    discretize_marks,
    eval_repaired_F,
    fit_cr_mle,
)

_EX4_ATOMS = ((0.25, 0.5), (0.25, 0.75), (0.5, 0.75))
_EX4_CUMWEIGHTS = (0.3, 0.6)  # cumulative weights 0.3 / 0.3 / 0.4


@dataclass(frozen=True)
class ExampleSpec:
    """One simulated dataset: example id, sample size, RNG seed."""

    example_id: int
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.example_id not in EXAMPLE_IDS:
            raise ValueError(f"unknown example id {self.example_id}")
        if self.n < 1:
            raise ValueError("n must be at least 1")


def _stream(spec: ExampleSpec, index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        entropy=spec.seed, spawn_key=(spec.example_id, index)
    )
    return np.random.Generator(np.random.Philox(seq))


def gen_example(spec: ExampleSpec) -> tuple[Observation, ...]:
    """Exact sampler for the four example laws."""
    n = spec.n
    u_x = _stream(spec, 0).random(n)
    u_y = _stream(spec, 1).random(n)
    u_t1 = _stream(spec, 2).random(n)
    if spec.example_id == 1:
        x = u_x
        y = -np.log1p(-u_y)
        times = (0.5 * (1.0 - u_t1)).reshape(n, 1)
    elif spec.example_id == 2:
        x = u_x
        y = -(2.0 / (2.0 * x + 1.0)) * np.log1p(-u_y)
        times = (1.0 - u_t1).reshape(n, 1)
    elif spec.example_id == 3:
        x = 2.0 * u_x
        y = x
        u_t2 = _stream(spec, 3).random(n)
        times = np.column_stack([1.0 - u_t1, 2.0 - u_t2])
    else:
        x = np.minimum(u_x, u_y)
        y = np.maximum(u_x, u_y)
        idx = np.searchsorted(_EX4_CUMWEIGHTS, u_t1, side="right")
        atoms = np.asarray(_EX4_ATOMS)
        times = atoms[idx]
    out = []
    for i in range(n):
        ts = tuple(float(t) for t in times[i])
        delta = next(
            (j + 1 for j, t in enumerate(ts) if x[i] <= t), len(ts) + 1
        )
        mark = float(y[i]) if delta <= len(ts) else None
        out.append(Observation(times=ts, delta_index=delta, mark=mark))
    return tuple(out)


def worker_count() -> int:
    """Parallelism cap: MARKMLE_THREADS if set, else machine parallelism."""
    env = os.environ.get("MARKMLE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parallel_map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items)) if items else 1
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


ALL_CURVES = ("mle_lower", "mle_upper", "limit_lower", "truth", "repaired")
DEFAULT_CURVES = frozenset(("mle_lower", "mle_upper", "limit_lower", "truth"))


@dataclass(frozen=True)
class CurveTable:
    """Column-named numeric rows, the unit every study CSV is written from."""

    columns: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width does not match column count")

    def column(self, name: str) -> tuple[float, ...]:
        idx = self.columns.index(name)
        return tuple(row[idx] for row in self.rows)


@dataclass(frozen=True)
class StudyConfig:
    example: ExampleSpec
    x_grid: tuple[float, ...] | None = None
    y_grid: tuple[float, ...] | None = None
    include: frozenset = DEFAULT_CURVES
    mark_grid_k: int = 20
    tau: float | None = None
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE
    cr_config: CRConfig = field(default_factory=CRConfig)
    grid_step: float = 0.02

    def __post_init__(self) -> None:
        unknown = set(self.include) - set(ALL_CURVES)
        if unknown:
            raise ValueError(f"unknown curve names: {sorted(unknown)}")
        if self.mark_grid_k < 1:
            raise ValueError("mark_grid_k must be at least 1")
        if self.grid_step <= 0.0:
            raise ValueError("grid_step must be positive")


@dataclass(frozen=True)
class StudyResult:
    config: StudyConfig
    dataset: tuple[Observation, ...]
    masses: MassVector
    marginal: CurveTable
    slice_x0: float
    slice_table: CurveTable
    repaired_table: CurveTable | None
    repaired_slice: CurveTable | None
    repaired_estimate: SubDistributionEstimate | None
    surface: CurveTable | None
    sup_marginal_gap: float | None
    sup_repaired_gap: float | None


def _step_grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    grid = []
    i = 1
    while lo + i * step <= hi + 1e-12:
        grid.append(lo + i * step)
        i += 1
    return tuple(grid)


def run_study(config: StudyConfig) -> StudyResult:
    """Fit the estimator on one simulated dataset and tabulate all curves.

    Always produces the marginal table and a fixed-x0 slice table; adds the
    repaired tables when 'repaired' is included and a full surface table
    when an explicit y_grid is supplied. Limit evaluations fan out over a
    thread pool capped by MARKMLE_THREADS.
    """
    info = example_info(config.example.example_id)
    model = info.model
    quad = config.quadrature
    tau = config.tau if config.tau is not None else info.default_tau
    x_grid = config.x_grid
    if x_grid is None:
        x_grid = _step_grid(0.0, tau, config.grid_step)
    if max(x_grid) > model.support_hint[0] + 1e-12:
        raise ValueError("x grid extends beyond the example's support")
    window = make_evaluation_window(model, tau=tau, grid=x_grid, config=quad)

    dataset = gen_example(config.example)
    ordered = order_dataset(dataset)
    masses = fit_masses(ordered, maximal_intersections(ordered))
    include = config.include

    def marginal_row(x: float) -> tuple[float, ...]:
        row = [x]
        if "mle_lower" in include:
            row.append(eval_FX(masses, x, "lower"))
        if "mle_upper" in include:
            row.append(eval_FX(masses, x, "upper"))
        if "limit_lower" in include:
            row.append(pop_FXlim(model, window, x, quad))
        if "truth" in include:
            row.append(model.f0_marg_x(x))
        return tuple(row)

    marg_cols = ["x"] + [c for c in ALL_CURVES[:4] if c in include]
    if "limit_lower" in include:
        pop_FXlim(model, window, x_grid[0], quad)  # build tables serially
    marginal = CurveTable(
        columns=tuple(marg_cols),
        rows=tuple(_parallel_map(marginal_row, x_grid)),
    )

    slice_y = _step_grid(info.mark_min, info.mark_max, config.grid_step)
    x0 = info.slice_x0

    def slice_row(y: float) -> tuple[float, ...]:
        row = [y]
        if "mle_lower" in include:
            row.append(eval_F(masses, x0, y, "lower"))
        if "mle_upper" in include:
            row.append(eval_F(masses, x0, y, "upper"))
        if "limit_lower" in include:
            row.append(pop_Flim(model, window, x0, y, quad))
        if "truth" in include:
            row.append(model.f0_joint(x0, y))
        return tuple(row)

    slice_table = CurveTable(
        columns=tuple(["y"] + marg_cols[1:]),
        rows=tuple(_parallel_map(slice_row, slice_y)),
    )

    repaired_table = repaired_slice = est = None
    sup_repaired_gap = None
    if "repaired" in include:
        grid = MarkGrid.equidistant(config.mark_grid_k, info.mark_min,
                                    info.mark_max)
        est = fit_cr_mle(discretize_marks(dataset, grid), config.cr_config)
        rows = []
        gap = 0.0
        for x in x_grid:
            for j, y in enumerate(grid.cutpoints, start=1):
                val = eval_repaired_F(est, x, j, "lower")
                rows.append((x, y, val))
                gap = max(gap, abs(val - model.f0_joint(x, y)))
        repaired_table = CurveTable(columns=("x", "y", "repaired"),
                                    rows=tuple(rows))
        sup_repaired_gap = gap
        srows = [(info.mark_min, 0.0)]
        for j, y in enumerate(grid.cutpoints, start=1):
            srows.append((y, eval_repaired_F(est, x0, j, "lower")))
        repaired_slice = CurveTable(columns=("y", "repaired"),
                                    rows=tuple(srows))

    surface = None
    if config.y_grid:
        cols = tuple(["x", "y"] + marg_cols[1:])

        def surface_row(pt):
            x, y = pt
            row = [x, y]
            if "mle_lower" in include:
                row.append(eval_F(masses, x, y, "lower"))
            if "mle_upper" in include:
                row.append(eval_F(masses, x, y, "upper"))
            if "limit_lower" in include:
                row.append(pop_Flim(model, window, x, y, quad))
            if "truth" in include:
                row.append(model.f0_joint(x, y))
            return tuple(row)

        pts = [(x, y) for x in x_grid for y in config.y_grid]
        surface = CurveTable(columns=cols,
                             rows=tuple(_parallel_map(surface_row, pts)))

    sup_marginal_gap = None
    if "mle_lower" in include and "limit_lower" in include:
        est_col = marginal.column("mle_lower")
        lim_col = marginal.column("limit_lower")
        sup_marginal_gap = max(abs(a - b) for a, b in zip(est_col, lim_col))

    return StudyResult(
        config=config,
        dataset=dataset,
        masses=masses,
        marginal=marginal,
        slice_x0=x0,
        slice_table=slice_table,
        repaired_table=repaired_table,
        repaired_slice=repaired_slice,
        repaired_estimate=est,
        surface=surface,
        sup_marginal_gap=sup_marginal_gap,
        sup_repaired_gap=sup_repaired_gap,
    )
