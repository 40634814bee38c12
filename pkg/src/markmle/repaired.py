"""Repaired estimator: discretize marks into risks, fit by EM.

Marks are binned into K+1 classes by a grid y_1 < ... < y_K (cells
(y_{j-1}, y_j], with y_0 = -inf and y_{K+1} = +inf), turning the marked
sample into interval-censored competing-risks data. The MLE over
sub-distribution step functions lives on the per-risk regions of maximal
intersection: within risk j these are the innermost intervals (q, p] whose
endpoints are consecutive in the sorted union of

    lefts  = {event left endpoints of risk j} + {censoring times},
    rights = {event right endpoints of risk j},

with q a left and p a right endpoint, plus one shared terminal half-line
(max censoring time, inf) when no event interval reaches beyond it. The
simplex over those regions is fit by self-consistency (EM) iterations,
which for this log-concave likelihood converge to the global maximum.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .data import EmptyDatasetError, MixedKError, Observation, derive_endpoints
from .plmle import InternalConsistencyError


@dataclass(frozen=True)
class MarkGrid:
    """Strictly increasing cutpoints y_1 < ... < y_K partitioning the marks."""

    cutpoints: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.cutpoints) < 1:
            raise ValueError("a mark grid needs at least one cutpoint")
        if any(not math.isfinite(c) for c in self.cutpoints):
            raise ValueError("cutpoints must be finite")
        if any(a >= b for a, b in zip(self.cutpoints, self.cutpoints[1:])):
            raise ValueError("cutpoints must be strictly increasing")

    @classmethod
    def equidistant(cls, k: int, y_min: float, y_max: float) -> "MarkGrid":
        """K interior points splitting [y_min, y_max] into K+1 equal cells."""
        if k < 1:
            raise ValueError("k must be at least 1")
        if not y_min < y_max:
            raise ValueError("need y_min < y_max")
        step = (y_max - y_min) / (k + 1)
        return cls(cutpoints=tuple(y_min + j * step for j in range(1, k + 1)))

    @property
    def num_risks(self) -> int:
        return len(self.cutpoints) + 1

    def risk_of(self, mark: float) -> int:
        """1-based risk index of a mark; cells are left-open right-closed."""
        return bisect_left(self.cutpoints, mark) + 1


class CompetingRisksDataset:
    """Flattened competing-risks view of a marked dataset."""

    __slots__ = ("n", "k", "num_risks", "grid", "event_left", "event_right",
                 "event_risk", "censor_times")

    def __init__(self, observations, grid: MarkGrid):
        self.grid = grid
        self.num_risks = grid.num_risks
        event_left, event_right, event_risk, censor_times = [], [], [], []
        k = None
        for obs in observations:
            if k is None:
                k = obs.k
            elif obs.k != k:
                raise MixedKError(
                    f"observation has k={obs.k}, expected k={k}"
                )
            ep = derive_endpoints(obs)
            if ep.delta_plus:
                event_left.append(ep.left)
                event_right.append(ep.right)
                event_risk.append(grid.risk_of(obs.mark))
            else:
                censor_times.append(ep.left)
        if k is None:
            raise EmptyDatasetError("no observations supplied")
        self.k = k
        self.n = len(event_left) + len(censor_times)
        self.event_left = tuple(event_left)
        self.event_right = tuple(event_right)
        self.event_risk = tuple(event_risk)
        self.censor_times = tuple(censor_times)


def discretize_marks(observations, grid: MarkGrid) -> CompetingRisksDataset:
    """Map each observed mark to its risk class; censored records pass through."""
    return CompetingRisksDataset(observations, grid)


def per_risk_supports(crdata: CompetingRisksDataset):
    """Innermost intervals per risk, and the terminal half-line if present.

    Returns (supports, terminal_left): supports[j-1] is a tuple of disjoint
    (d, r] intervals ordered by d; terminal_left is the left endpoint of the
    shared (terminal_left, inf) region, or None when some event interval
    extends past every censoring time (or there are no censored records).
    """
    supports = []
    for j in range(1, crdata.num_risks + 1):
        lefts = {l for l, risk in zip(crdata.event_left, crdata.event_risk)
                 if risk == j}
        rights = {r for r, risk in zip(crdata.event_right, crdata.event_risk)
                  if risk == j}
        lefts.update(crdata.censor_times)
        merged = sorted(lefts | rights)
        cells = [
            (a, b)
            for a, b in zip(merged, merged[1:])
            if a in lefts and b in rights
        ]
        supports.append(tuple(cells))
    terminal_left = None
    if crdata.censor_times:
        top = max(crdata.censor_times)
        if all(r <= top for r in crdata.event_right):
            terminal_left = top
    return tuple(supports), terminal_left


# a support point is dropped once the likelihood has flattened while its EM
# multiplier stays this far below 1 (the KKT bound for an off-support cell)
_KKT_SLACK = 1e-7
# the face step may be attempted already when the increment is within this
# factor of the tolerance; a mass decaying harmonically keeps the increment
# above the tolerance itself for a very long time, and the step is guarded
# by a likelihood comparison so trying early cannot hurt
_FACE_TRIGGER_FACTOR = 100.0


@dataclass(frozen=True)
class CRConfig:
    tolerance: float = 1e-10
    max_iter: int = 5000
    fixed_point_tol: float = 1e-8
    prune_tol: float = 1e-16

    def __post_init__(self) -> None:
        if self.tolerance <= 0.0 or self.fixed_point_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class SubDistributionEstimate:
    """Per-risk support intervals with masses, plus the shared tail."""

    risk_cells: tuple[tuple[tuple[float, float, float], ...], ...]
    tail_location: float | None
    tail_mass: float
    iterations: int
    final_loglik: float
    last_increment: float
    fixed_point_residual: float
    converged: bool
    all_censored: bool

    def __post_init__(self) -> None:
        total = self.tail_mass
        for cells in self.risk_cells:
            for _, _, mass in cells:
                if mass < 0.0:
                    raise ValueError("negative mass")
                total += mass
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"masses sum to {total}, not 1")

    @property
    def num_risks(self) -> int:
        return len(self.risk_cells)


def fit_cr_mle(crdata: CompetingRisksDataset,
               config: CRConfig = CRConfig()) -> SubDistributionEstimate:
    """Maximize the competing-risks likelihood over the support simplex.

    Event records contribute the mass of their risk's cells inside (L, R];
    censored records contribute the mass strictly above their censoring
    time plus the terminal mass. The EM fixed point is the global maximum;
    the log-likelihood is asserted nondecreasing on every iteration.

    When the optimum sits on a face of the simplex, plain EM drives the
    vanishing masses to zero only harmonically, so once the likelihood
    increment flattens near the tolerance the cells whose update
    multiplier is bounded below one are projected to zero (kept only if
    the step costs no likelihood) and iteration resumes on the face.
    """
    supports, terminal_left = per_risk_supports(crdata)
    cell_risk, cell_d, cell_r = [], [], []
    risk_offsets = [0]
    for j, cells in enumerate(supports, start=1):
        for d, r in cells:
            cell_risk.append(j)
            cell_d.append(d)
            cell_r.append(r)
        risk_offsets.append(len(cell_d))
    n_cells = len(cell_d)
    has_term = terminal_left is not None

    if not crdata.event_left:
        if not has_term:
            raise InternalConsistencyError(
                "no events and no terminal region; dataset is empty"
            )
        return SubDistributionEstimate(
            risk_cells=tuple(() for _ in range(crdata.num_risks)),
            tail_location=terminal_left,
            tail_mass=1.0,
            iterations=0,
            final_loglik=0.0,
            last_increment=0.0,
            fixed_point_residual=0.0,
            converged=True,
            all_censored=True,
        )

    # CSR of cells contained in each event interval (contiguous per risk,
    # since a risk's cells are disjoint and sorted)
    ev_cols, ev_indptr = [], [0]
    for left, right, risk in zip(crdata.event_left, crdata.event_right,
                                 crdata.event_risk):
        lo, hi = risk_offsets[risk - 1], risk_offsets[risk]
        ds = cell_d[lo:hi]
        rs = cell_r[lo:hi]
        start = lo + bisect_left(ds, left)
        stop = lo + bisect_right(rs, right)
        if stop <= start:
            raise InternalConsistencyError(
                f"event ({left}, {right}] of risk {risk} contains no "
                "support cell"
            )
        ev_cols.extend(range(start, stop))
        ev_indptr.append(len(ev_cols))
    ev_cols = np.asarray(ev_cols, dtype=np.intp)
    ev_indptr = np.asarray(ev_indptr, dtype=np.intp)
    ev_rowlen = np.diff(ev_indptr)

    d_arr = np.asarray(cell_d)
    dord = np.argsort(d_arr, kind="stable")
    d_sorted = d_arr[dord]

    cens = np.asarray(sorted(crdata.censor_times))
    # first d-sorted cell position at or above each censoring time
    cens_cell_start = np.searchsorted(d_sorted, cens, side="left")
    if not has_term and cens.size and np.any(cens_cell_start >= n_cells):
        raise InternalConsistencyError(
            "censored record has no support mass above its censoring time"
        )
    # per cell: number of censoring times at or below its left endpoint
    cell_cens_count = np.searchsorted(cens, d_arr, side="right")

    m = np.full(n_cells + has_term, 1.0 / (n_cells + has_term))
    n = float(crdata.n)
    prev_ll = -math.inf
    increment = math.inf
    residual = math.inf
    ll = -math.inf
    iterations = 0
    converged = False

    def eval_ll(vec: np.ndarray) -> float:
        vc = vec[:n_cells]
        a = vec[n_cells] if has_term else 0.0
        qe = np.add.reduceat(vc[ev_cols], ev_indptr[:-1])
        sfx = np.concatenate([np.cumsum(vc[dord][::-1])[::-1], [0.0]])
        qc = a + sfx[cens_cell_start]
        with np.errstate(divide="ignore"):
            out = float(np.log(qe).sum())
            if cens.size:
                out += float(np.log(qc).sum())
        return out

    for iterations in range(1, config.max_iter + 1):
        mc = m[:n_cells]
        alpha = m[n_cells] if has_term else 0.0
        q_ev = np.add.reduceat(mc[ev_cols], ev_indptr[:-1])
        suffix = np.concatenate(
            [np.cumsum(mc[dord][::-1])[::-1], [0.0]]
        )
        q_cens = alpha + suffix[cens_cell_start]
        ll = float(np.log(q_ev).sum() + np.log(q_cens).sum()) if cens.size \
            else float(np.log(q_ev).sum())
        if ll < prev_ll - 1e-8:
            raise InternalConsistencyError(
                f"log-likelihood decreased: {prev_ll} -> {ll}"
            )
        w_ev = 1.0 / q_ev
        ev_contrib = np.bincount(
            ev_cols, weights=np.repeat(w_ev, ev_rowlen), minlength=n_cells
        )
        if cens.size:
            w_cens = 1.0 / q_cens
            cum = np.concatenate([[0.0], np.cumsum(w_cens)])
            cens_contrib = cum[cell_cens_count]
        else:
            w_cens = np.zeros(0)
            cens_contrib = 0.0
        new_m = np.empty_like(m)
        new_m[:n_cells] = mc * (ev_contrib + cens_contrib) / n
        if has_term:
            new_m[n_cells] = alpha * w_cens.sum() / n
        new_m[new_m < config.prune_tol] = 0.0
        total = new_m.sum()
        if total <= 0.0:
            raise InternalConsistencyError("all mass pruned away")
        new_m /= total
        residual = float(np.max(np.abs(new_m - m)))
        increment = ll - prev_ll
        if (increment < _FACE_TRIGGER_FACTOR * config.tolerance
                and residual >= config.fixed_point_tol):
            # The likelihood has flattened but the iterate still crawls
            # toward a face of the simplex; a mass heading to zero decays
            # like m/(1+m), which has no geometric rate, so the fixed point
            # is unreachable by plain iteration.  At the optimum every
            # supported cell has multiplier 1 and off-support cells at most
            # 1, so a multiplier bounded below 1 here marks a cell whose
            # mass belongs at zero.  Project those out, but keep the step
            # only if it costs no likelihood.
            mult = np.empty_like(new_m)
            mult[:n_cells] = (ev_contrib + cens_contrib) / n
            if has_term:
                mult[n_cells] = w_cens.sum() / n
            off_face = (mult < 1.0 - _KKT_SLACK) & (new_m > 0.0)
            if np.any(off_face):
                cand = new_m.copy()
                cand[off_face] = 0.0
                cand_total = cand.sum()
                if cand_total > 0.0:
                    cand /= cand_total
                    if eval_ll(cand) >= ll - 1e-12:
                        m = cand
                        prev_ll = ll
                        continue
        m = new_m
        if increment < config.tolerance and residual < config.fixed_point_tol:
            converged = True
            break
        prev_ll = ll

    risk_cells = []
    for j in range(1, crdata.num_risks + 1):
        lo, hi = risk_offsets[j - 1], risk_offsets[j]
        risk_cells.append(tuple(
            (cell_d[c], cell_r[c], float(m[c])) for c in range(lo, hi)
        ))
    return SubDistributionEstimate(
        risk_cells=tuple(risk_cells),
        tail_location=terminal_left,
        tail_mass=float(m[n_cells]) if has_term else 0.0,
        iterations=iterations,
        final_loglik=ll,
        last_increment=increment,
        fixed_point_residual=residual,
        converged=converged,
        all_censored=False,
    )


def cr_log_likelihood(crdata: CompetingRisksDataset,
                      est: SubDistributionEstimate) -> float:
    """Log-likelihood of the estimate's masses under a competing-risks sample."""
    ll = 0.0
    for left, right, risk in zip(crdata.event_left, crdata.event_right,
                                 crdata.event_risk):
        q = math.fsum(mass for d, r, mass in est.risk_cells[risk - 1]
                      if d >= left and r <= right)
        if q <= 0.0:
            return -math.inf
        ll += math.log(q)
    for t in crdata.censor_times:
        q = est.tail_mass + math.fsum(
            mass for cells in est.risk_cells for d, _, mass in cells if d >= t
        )
        if q <= 0.0:
            return -math.inf
        ll += math.log(q)
    return ll


def risk_cdf(est: SubDistributionEstimate, j: int, x: float,
             bound: str = "lower") -> float:
    """Sub-distribution value F_j(x) for a single risk."""
    if not 1 <= j <= est.num_risks:
        raise ValueError(f"risk index {j} out of range 1..{est.num_risks}")
    if bound == "lower":
        return math.fsum(m for d, r, m in est.risk_cells[j - 1] if r <= x)
    if bound == "upper":
        return math.fsum(m for d, r, m in est.risk_cells[j - 1] if d < x)
    raise ValueError(f"unknown bound {bound!r}")


def eval_repaired_F(est: SubDistributionEstimate, x: float, j: int,
                    bound: str = "lower") -> float:
    """Repaired estimate of F0(x, y_j): sum of the first j risk CDFs at x.

    The shared terminal mass is risk-unattributed and never counted here;
    it is reported separately as est.tail_mass.
    """
    if not 1 <= j <= est.num_risks:
        raise ValueError(f"risk index {j} out of range 1..{est.num_risks}")
    return math.fsum(risk_cdf(est, lvl, x, bound) for lvl in range(1, j + 1))
