"""Closed-form MLE masses on the maximal intersections, and evaluators.

With the records ranked by u (events first at ties), the mass attached to
the i-th ranked event's region is

    p_i = prod_{j<i} (1 - dp_j / (n - j + 1)) * dp_i / (n - i + 1),

where dp_j is the event indicator of rank j; the leftover mass sits on the
terminal halfplane when the largest u is censored. The implementation forms
each p_i as a difference of consecutive running products, which telescopes
exactly in floating point (consecutive products are within a factor two, so
the subtraction is lossless) and makes the total mass land on 1.0.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Literal

from .data import OrderedDataset
from .maxint import KIND_SEGMENT, MaximalIntersection

Bound = Literal["lower", "upper"]


class InternalConsistencyError(RuntimeError):
    """Fitted masses failed a bookkeeping identity that must hold exactly."""


def product_limit_masses(delta_flags, one=1.0):
    """Per-rank masses and the terminal survival weight.

    Generic in the arithmetic: pass ``one=Fraction(1)`` for exact rationals.
    Censored ranks get a zero mass entry so the output aligns with ranks.
    """
    flags = list(delta_flags)
    n = len(flags)
    zero = one - one
    survival = one
    masses = []
    for i, dp in enumerate(flags, start=1):
        if dp:
            shrunk = survival * (one - one / (n - i + 1))
            masses.append(survival - shrunk)
            survival = shrunk
        else:
            masses.append(zero)
    return masses, survival


@dataclass(frozen=True)
class MassVector:
    """Masses aligned with the segment maximal intersections, plus the tail.

    ``rank_masses`` keeps the per-event-rank (d, r, mark, mass) quadruples
    before tied regions merge. The per-rank masses are exact differences of
    consecutive survival products, so summing any subset of them with fsum
    is correctly rounded; the evaluators prefer this decomposition over the
    (once-rounded) merged probabilities when it is available.
    """

    segments: tuple[MaximalIntersection, ...]
    probabilities: tuple[float, ...]
    censored_tail: float
    u_last: float
    rank_masses: tuple[tuple[float, float, float, float], ...] = ()

    @property
    def masses(self) -> tuple[tuple[MaximalIntersection, float], ...]:
        return tuple(zip(self.segments, self.probabilities))

    def _quads(self):
        if self.rank_masses:
            return self.rank_masses
        return tuple(
            (seg.d, seg.r, seg.mark, p)
            for seg, p in zip(self.segments, self.probabilities)
        )


def fit_masses(ordered: OrderedDataset, maxints) -> MassVector:
    """Attach the closed-form masses to the maximal intersections."""
    per_rank, tail_weight = product_limit_masses(ordered.delta_plus)
    segments = tuple(m for m in maxints if m.kind == KIND_SEGMENT)
    probabilities = tuple(
        math.fsum(per_rank[i - 1] for i in seg.source_ranks) for seg in segments
    )
    rank_masses = []
    for seg in segments:
        for i in seg.source_ranks:
            rank_masses.append((i, (seg.d, seg.r, seg.mark, per_rank[i - 1])))
    rank_masses.sort()
    tail = tail_weight if not ordered.delta_plus[-1] else 0.0
    total = math.fsum(per_rank) + tail
    if abs(1.0 - total) > 1e-12:
        raise InternalConsistencyError(
            f"masses sum to {total!r}, drift exceeds 1e-12"
        )
    for p in probabilities:
        if not 0.0 <= p <= 1.0:
            raise InternalConsistencyError(f"mass {p!r} outside [0, 1]")
    return MassVector(
        segments=segments,
        probabilities=probabilities,
        censored_tail=tail,
        u_last=ordered.u[-1],
        rank_masses=tuple(q for _, q in rank_masses),
    )


def log_likelihood(masses: MassVector, ordered: OrderedDataset) -> float:
    """Log-likelihood of any feasible mass vector on the fitted support.

    Event ranks contribute log of their region's mass; censored ranks
    contribute log of the mass strictly beyond them (regions generated by
    later ranks plus the terminal tail). Returns -inf when a needed term
    vanishes.
    """
    seg_of_rank: dict[int, int] = {}
    first_rank = []
    for s, seg in enumerate(masses.segments):
        first_rank.append(seg.source_ranks[0])
        for i in seg.source_ranks:
            seg_of_rank[i] = s
    # suffix[s] = mass of segments whose first generating rank is >= first_rank[s]
    suffix = [0.0] * (len(masses.segments) + 1)
    for s in range(len(masses.segments) - 1, -1, -1):
        suffix[s] = suffix[s + 1] + masses.probabilities[s]

    total = 0.0
    for i in range(1, ordered.n + 1):
        if ordered.delta_plus[i - 1]:
            p = masses.probabilities[seg_of_rank[i]]
        else:
            s = bisect_right(first_rank, i)
            p = suffix[s] + masses.censored_tail
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
    return total


def eval_FX(masses: MassVector, x: float, bound: Bound) -> float:
    """Marginal distribution bound at x.

    The lower bound piles each region's mass on its right endpoint, the
    upper bound on its left endpoint (and counts the terminal tail once x
    passes the largest u). Sums run over the per-rank decomposition, whose
    lower-bound prefix telescopes so that the result is bitwise equal to
    1 - the survival product at x.
    """
    quads = masses._quads()
    if bound == "lower":
        return math.fsum(p for d, r, z, p in quads if r <= x)
    if bound == "upper":
        total = math.fsum(p for d, r, z, p in quads if d < x)
        if x > masses.u_last:
            total += masses.censored_tail
        return total
    raise ValueError(f"bound must be 'lower' or 'upper', got {bound!r}")


def eval_F(masses: MassVector, x: float, y: float, bound: Bound) -> float:
    """Joint distribution bound at (x, y); the tail mass spans every mark."""
    quads = masses._quads()
    if bound == "lower":
        return math.fsum(p for d, r, z, p in quads if r <= x and z <= y)
    if bound == "upper":
        total = math.fsum(p for d, r, z, p in quads if d < x and z <= y)
        if x > masses.u_last:
            total += masses.censored_tail
        return total
    raise ValueError(f"bound must be 'lower' or 'upper', got {bound!r}")


class EmpiricalProcesses:
    """Step-function processes of the ranked data.

    H(x) counts ranks with u <= x; V(x, y) counts events with u <= x and
    mark <= y (both scaled by 1/n). The cumulative hazards divide each
    event jump by the at-risk count. The survival product multiplies one
    factor (1 - 1/(n-i+1)) per event rank, the same operations in the same
    order as the mass recursion, so 1 - F-hat-lower(x) == km_survival(x)
    holds bitwise at every x.
    """

    def __init__(self, ordered: OrderedDataset):
        self.n = ordered.n
        jumps: list[float] = []
        counts: list[int] = []
        event_marks: list[list[float]] = []
        rank_factors: list[list[float]] = []
        for i in range(ordered.n):
            u = ordered.u[i]
            if not jumps or u != jumps[-1]:
                jumps.append(u)
                counts.append(0)
                event_marks.append([])
                rank_factors.append([])
            counts[-1] += 1
            if ordered.delta_plus[i]:
                event_marks[-1].append(ordered.mark[i])
                rank_factors[-1].append(1.0 - 1.0 / (ordered.n - i))
        self.jumps = jumps
        self.event_marks = [sorted(m) for m in event_marks]
        self.cum_counts = []
        running = 0
        for c in counts:
            running += c
            self.cum_counts.append(running)
        # at-risk just before each jump, and the X-hazard survival products
        self.at_risk = [
            self.n - (self.cum_counts[j - 1] if j else 0)
            for j in range(len(jumps))
        ]
        self.hazard_x_jumps = [
            len(self.event_marks[j]) / self.at_risk[j] for j in range(len(jumps))
        ]
        self.survival = []
        s = 1.0
        for factors in rank_factors:
            for f in factors:
                s = s * f
            self.survival.append(s)

    def _idx(self, x: float) -> int:
        return bisect_right(self.jumps, x)

    def H(self, x: float) -> float:
        j = self._idx(x)
        return self.cum_counts[j - 1] / self.n if j else 0.0

    def V(self, x: float, y: float) -> float:
        j = self._idx(x)
        total = 0
        for t in range(j):
            total += bisect_right(self.event_marks[t], y)
        return total / self.n

    def VX(self, x: float) -> float:
        j = self._idx(x)
        return sum(len(self.event_marks[t]) for t in range(j)) / self.n

    def Lambda(self, x: float, y: float) -> float:
        j = self._idx(x)
        return math.fsum(
            bisect_right(self.event_marks[t], y) / self.at_risk[t]
            for t in range(j)
        )

    def LambdaX(self, x: float) -> float:
        j = self._idx(x)
        return math.fsum(self.hazard_x_jumps[t] for t in range(j))

    def km_survival(self, x: float) -> float:
        """prod_{u <= x} (1 - dLambda_X(u)); equals 1 - eval_FX(..., 'lower')."""
        j = self._idx(x)
        return self.survival[j - 1] if j else 1.0


def empirical_processes(ordered: OrderedDataset) -> EmpiricalProcesses:
    return EmpiricalProcesses(ordered)


@dataclass(frozen=True)
class ImputedDataset:
    """Events collapsed to their right endpoints; censorings untouched.

    Each event's set becomes the point {u} x {mark}, so u, delta_plus and
    mark determine the data. Order matches the originating ranks.
    """

    u: tuple[float, ...]
    delta_plus: tuple[int, ...]
    mark: tuple[float, ...]


def impute_right_endpoints(ordered: OrderedDataset) -> ImputedDataset:
    return ImputedDataset(
        u=ordered.u, delta_plus=ordered.delta_plus, mark=ordered.mark
    )


def fit_imputed_masses(imputed: ImputedDataset):
    """MLE of the imputed (point event / censored tail) data.

    Re-sorts from scratch, then applies the same closed form; events are
    atoms at their own u so each point is its own support region. Returns
    (points, tail) with points = [(u, mark, mass)] over event ranks.
    """
    order = sorted(
        range(len(imputed.u)),
        key=lambda i: (imputed.u[i], 1 - imputed.delta_plus[i]),
    )
    flags = [imputed.delta_plus[i] for i in order]
    per_rank, tail_weight = product_limit_masses(flags)
    points = [
        (imputed.u[i], imputed.mark[i], per_rank[rank])
        for rank, i in enumerate(order)
        if flags[rank]
    ]
    tail = tail_weight if not flags[-1] else 0.0
    return points, tail


def nonuniqueness_diagnostics(masses: MassVector, maxints=None):
    """(longest positive-mass segment, terminal tail mass)."""
    lengths = [
        seg.r - seg.d
        for seg, p in zip(masses.segments, masses.probabilities)
        if p > 0.0
    ]
    return (max(lengths) if lengths else 0.0, masses.censored_tail)
