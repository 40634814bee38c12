"""Maximal intersections of the observed sets.

An observed set is either a segment (L, R] x {Z} (event seen, mark Z) or a
halfplane (L, inf) x R (event not yet seen). The maximal intersections are
the local maximum regions of the height map h(x, y) = number of observed
sets containing (x, y); the fitted distribution can only put mass there.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .data import OrderedDataset

KIND_SEGMENT = "segment"
KIND_HALFPLANE = "halfplane"


@dataclass(frozen=True)
class MaximalIntersection:
    """One support region: a mark-line segment (d, r] x {mark} or the
    terminal halfplane (u_last, inf) x R.

    ``source_ranks`` lists the 1-based sorted ranks of the generating
    observations; it has several entries when tied observations share one
    region.
    """

    kind: str
    d: float = math.nan
    r: float = math.nan
    mark: float = math.nan
    u_last: float = math.nan
    source_ranks: tuple[int, ...] = ()

    @property
    def source_rank(self) -> int:
        return self.source_ranks[0]

    def geometry(self) -> tuple:
        """Coordinates only, for comparing against the brute-force oracle."""
        if self.kind == KIND_SEGMENT:
            return (KIND_SEGMENT, self.d, self.r, self.mark)
        return (KIND_HALFPLANE, self.u_last)


def maximal_intersections(ordered: OrderedDataset) -> list[MaximalIntersection]:
    """One left-to-right pass over the u-sorted records.

    For the i-th ranked event, the segment's left endpoint is the largest
    censored left endpoint seen so far (or the event's own L if larger).
    Ties producing an identical (d, r, mark) triple merge into one shared
    region. A terminal halfplane exists iff the largest u is censored.
    """
    groups: dict[tuple[float, float, float], list[int]] = {}
    run_max = -math.inf
    for i in range(ordered.n):
        if ordered.delta_plus[i]:
            d = max(run_max, ordered.left[i])
            key = (d, ordered.right[i], ordered.mark[i])
            groups.setdefault(key, []).append(i + 1)
        else:
            if ordered.left[i] > run_max:
                run_max = ordered.left[i]
    out = [
        MaximalIntersection(
            kind=KIND_SEGMENT, d=d, r=r, mark=z, source_ranks=tuple(ranks)
        )
        for (d, r, z), ranks in groups.items()
    ]
    if not ordered.delta_plus[-1]:
        out.append(
            MaximalIntersection(
                kind=KIND_HALFPLANE,
                u_last=ordered.u[-1],
                source_ranks=(ordered.n,),
            )
        )
    return out


@dataclass(frozen=True)
class ObservedSet:
    """(left, right] x {mark}, or the halfplane (left, inf) x R if mark is None."""

    left: float
    right: float
    mark: float | None

    @property
    def censored(self) -> bool:
        return self.mark is None


def observed_sets(ordered: OrderedDataset) -> list[ObservedSet]:
    """The raw observed sets, in rank order."""
    out = []
    for i in range(ordered.n):
        if ordered.delta_plus[i]:
            out.append(
                ObservedSet(ordered.left[i], ordered.right[i], ordered.mark[i])
            )
        else:
            out.append(ObservedSet(ordered.left[i], math.inf, None))
    return out


def height_at(sets, point) -> int:
    """Number of observed sets containing the point (x, y)."""
    x, y = point
    h = 0
    for s in sets:
        if s.censored:
            if x > s.left:
                h += 1
        elif s.left < x <= s.right and y == s.mark:
            h += 1
    return h


def brute_force_maximal_intersections(sets) -> list[MaximalIntersection]:
    """Height-map sweep over endpoint-induced cells; the slow oracle.

    Per mark line, each cell between consecutive breakpoints gets the bitmask
    of observed sets containing it (evaluated pointwise, since every relevant
    endpoint is a breakpoint a single representative point decides
    containment). A covered cell is a maximal intersection iff its family is
    not a proper subset of a neighboring cell's family; comparing raw heights
    instead would wrongly drop a cell whose equal-height neighbor is covered
    by an incomparable family (e.g. a censoring time tied with the segment's
    right endpoint). Exact duplicates among the observed sets are collapsed
    first, mirroring the shared-region rule of the fast path. Quadratic and
    meant for cross-checking only.
    """
    sets = list(dict.fromkeys(sets))
    cens = sorted(
        (i for i, s in enumerate(sets) if s.censored),
        key=lambda i: sets[i].left,
    )
    cens_lefts = [sets[i].left for i in cens]
    # prefix_masks[t] = bitmask of the t smallest censored halfplanes
    prefix_masks = [0]
    for i in cens:
        prefix_masks.append(prefix_masks[-1] | (1 << i))
    by_mark: dict[float, list[int]] = {}
    for i, s in enumerate(sets):
        if not s.censored:
            by_mark.setdefault(s.mark, []).append(i)

    out = []
    for mark, group in by_mark.items():
        lo = min(sets[i].left for i in group)
        hi = max(sets[i].right for i in group)
        bps = {sets[i].left for i in group} | {sets[i].right for i in group}
        bps.update(c for c in cens_lefts if lo < c < hi)
        bps = sorted(bps)
        families = []
        covered = []
        for a, b in zip(bps, bps[1:]):
            mask = 0
            n_seg = 0
            for i in group:
                if sets[i].left <= a and sets[i].right >= b:
                    mask |= 1 << i
                    n_seg += 1
            mask |= prefix_masks[bisect_right(cens_lefts, a)]
            families.append(mask)
            covered.append(n_seg > 0)
        left_sentinel = prefix_masks[bisect_left(cens_lefts, bps[0])]
        right_sentinel = prefix_masks[bisect_right(cens_lefts, bps[-1])]
        for t, (fam, cov) in enumerate(zip(families, covered)):
            if not cov:
                continue
            prev = families[t - 1] if t > 0 else left_sentinel
            nxt = families[t + 1] if t + 1 < len(families) else right_sentinel
            proper_prev = fam != prev and (fam & prev) == fam
            proper_next = fam != nxt and (fam & nxt) == fam
            if not proper_prev and not proper_next:
                out.append(
                    MaximalIntersection(
                        kind=KIND_SEGMENT, d=bps[t], r=bps[t + 1], mark=mark
                    )
                )

    if cens_lefts:
        u_hp = cens_lefts[-1]
        if all(s.right <= u_hp for s in sets if not s.censored):
            out.append(MaximalIntersection(kind=KIND_HALFPLANE, u_last=u_hp))
    return out
