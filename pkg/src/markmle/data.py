"""Observation records for interval censoring case k with a continuous mark.

Each subject carries k ordered inspection times T_1 < ... < T_k. The event
time X falls in exactly one of the intervals (T_0, T_1], ..., (T_{k-1}, T_k],
(T_k, inf) with T_0 = 0, and the mark Z is observed exactly when the event
happened by the last inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class MixedKError(ValueError):
    """Observations in one dataset disagree on the number of inspection times."""


class EmptyDatasetError(ValueError):
    """An empty observation list was supplied."""


@dataclass(frozen=True)
class Observation:
    """One subject: inspection times, interval index, and (maybe) a mark.

    ``delta_index`` is the j in 1..k+1 with T_{j-1} < X <= T_j. The mark must
    be present iff j <= k (the event was seen by the last inspection).
    """

    times: tuple[float, ...]
    delta_index: int
    mark: float | None = None

    def __post_init__(self) -> None:
        if len(self.times) == 0:
            raise ValueError("at least one inspection time is required")
        prev = 0.0
        for t in self.times:
            if not (isinstance(t, (int, float)) and math.isfinite(t)):
                raise ValueError(f"inspection times must be finite, got {t!r}")
            if t <= prev:
                raise ValueError(
                    "inspection times must be strictly increasing and positive, "
                    f"got {self.times!r}"
                )
            prev = t
        k = len(self.times)
        if not 1 <= self.delta_index <= k + 1:
            raise ValueError(
                f"delta_index must lie in 1..{k + 1}, got {self.delta_index}"
            )
        if self.delta_index <= k:
            if self.mark is None:
                raise ValueError("mark is required when the event was observed")
            if not math.isfinite(self.mark):
                raise ValueError(f"mark must be finite, got {self.mark!r}")
        elif self.mark is not None:
            raise ValueError("mark must be absent for a right-censored record")

    @property
    def k(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class DerivedEndpoints:
    """Interval endpoints and the ordering statistic of one observation.

    ``right`` is math.inf for a censored record; IEEE infinity is the
    extended-real value here (comparisons and interval arithmetic stay total),
    not an in-band sentinel. ``u`` is the right endpoint when the event was
    observed and the left endpoint otherwise.
    """

    left: float
    right: float
    u: float
    delta_plus: int


def derive_endpoints(obs: Observation) -> DerivedEndpoints:
    """Compute (L, R, U, delta_plus) for one observation."""
    j = obs.delta_index
    k = obs.k
    left = obs.times[j - 2] if j >= 2 else 0.0
    if j <= k:
        right = obs.times[j - 1]
        return DerivedEndpoints(left=left, right=right, u=right, delta_plus=1)
    return DerivedEndpoints(left=left, right=math.inf, u=left, delta_plus=0)


class OrderedDataset:
    """Observations sorted by u, with events before censorings at ties.

    Ties in u between two observed events (or two censorings) keep the
    original input order, which makes the ordering deterministic. Flat
    per-rank tuples (``u``, ``delta_plus``, ``left``, ``right``, ``mark``)
    are exposed for the algorithmic passes; ``mark`` holds nan for censored
    records so the tuple stays rectangular.
    """

    __slots__ = ("records", "permutation", "n", "k",
                 "u", "delta_plus", "left", "right", "mark")

    def __init__(self, records, permutation):
        self.records = tuple(records)
        self.permutation = tuple(permutation)
        self.n = len(self.records)
        self.k = self.records[0][0].k
        self.u = tuple(ep.u for _, ep in self.records)
        self.delta_plus = tuple(ep.delta_plus for _, ep in self.records)
        self.left = tuple(ep.left for _, ep in self.records)
        self.right = tuple(ep.right for _, ep in self.records)
        self.mark = tuple(
            obs.mark if ep.delta_plus else math.nan for obs, ep in self.records
        )

    def __len__(self) -> int:
        return self.n


def order_dataset(observations) -> OrderedDataset:
    """Sort observations by u, breaking ties as events-first then input order."""
    observations = list(observations)
    if not observations:
        raise EmptyDatasetError("cannot order an empty dataset")
    k = observations[0].k
    for obs in observations:
        if obs.k != k:
            raise MixedKError(
                f"all observations must share one k, saw {k} and {obs.k}"
            )
    endpoints = [derive_endpoints(obs) for obs in observations]
    order = sorted(
        range(len(observations)),
        key=lambda i: (endpoints[i].u, 1 - endpoints[i].delta_plus),
    )
    records = [(observations[i], endpoints[i]) for i in order]
    return OrderedDataset(records, order)
