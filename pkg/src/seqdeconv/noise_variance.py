"""Estimators of the noise variance ``eps^2`` from the observation stream.

Two routes are provided.

*Consistent*: on a subsequence of observations taken through the same
operator, the per-pixel sample variance around the subsequence mean
estimates ``eps^2``. If the operators vary inside the subsequence the
per-pixel means mix different blurred signals and the statistic is biased
upward, so treat it as an upper bound in that regime.

*Tail*: a low-quality observation carries almost no signal in its weakest
spectral components, so the mean power ``|X_iq|^2`` over those components
estimates ``eps^2`` plus a nonnegative leakage term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DimensionError

__all__ = [
    "ConsistentVariance",
    "TailVariance",
    "TailFlag",
    "epsilon_consistent",
    "epsilon_tail",
    "flag_low_quality",
    "LOW_QUALITY_REL_THRESHOLD",
    "LOW_QUALITY_FRACTION",
]

LOW_QUALITY_REL_THRESHOLD = 1e-3
LOW_QUALITY_FRACTION = 0.5


@dataclass
class ConsistentVariance:
    """Running sums for the consistent estimator.

    ``every`` selects the subsequence: the i-th offered observation
    (0-based) is used when ``i % every == 0``.
    """

    p: int
    every: int = 1
    offered: int = 0
    used: int = 0
    total: np.ndarray = field(default=None)
    total_sq: np.ndarray = field(default=None)
    clamped: bool = False

    def __post_init__(self):
        if self.every < 1:
            raise ValueError("every must be >= 1")
        if self.total is None:
            self.total = np.zeros(self.p)
        if self.total_sq is None:
            self.total_sq = np.zeros(self.p)

    def add(self, y) -> bool:
        """Offer one signal-space observation; returns whether it was used."""
        y = np.asarray(y)
        if y.shape != (self.p,):
            raise DimensionError(f"observation has shape {y.shape}, expected ({self.p},)")
        if not np.all(np.isfinite(y)):
            raise ValueError("observation contains non-finite values")
        take = self.offered % self.every == 0
        self.offered += 1
        if take:
            self.total += y.real
            self.total_sq += y.real**2
            self.used += 1
        return take

    def merge(self, other: "ConsistentVariance") -> "ConsistentVariance":
        if other.p != self.p or other.every != self.every:
            raise DimensionError("cannot merge accumulators with different p or stride")
        return ConsistentVariance(
            self.p, self.every, self.offered + other.offered, self.used + other.used,
            self.total + other.total, self.total_sq + other.total_sq,
        )

    def estimate(self) -> float:
        if self.used < 2:
            raise ValueError("the consistent estimator needs at least two observations")
        mean = self.total / self.used
        raw = float(np.sum(self.total_sq / self.used - mean**2) / self.p)
        self.clamped = raw < 0
        return max(raw, 0.0)

    def to_dict(self) -> dict:
        return {
            "every": self.every, "offered": self.offered, "used": self.used,
            "total": self.total.tolist(), "total_sq": self.total_sq.tolist(),
        }

    @classmethod
    def from_dict(cls, p: int, d: dict) -> "ConsistentVariance":
        return cls(p, d["every"], d["offered"], d["used"],
                   np.asarray(d["total"], float), np.asarray(d["total_sq"], float))


def epsilon_consistent(observations: Iterable) -> float:
    """``(1/(p n')) sum_i sum_j (Y_ij^2 - Ybar_j^2)`` over the given observations."""
    acc = None
    for y in observations:
        y = np.asarray(y)
        if acc is None:
            acc = ConsistentVariance(y.shape[0])
        acc.add(y)
    if acc is None:
        raise ValueError("the consistent estimator needs at least two observations")
    return acc.estimate()


class TailFlag(NamedTuple):
    flagged: bool
    p_prime: int
    order: np.ndarray


def flag_low_quality(
    d,
    rel_threshold: float = LOW_QUALITY_REL_THRESHOLD,
    fraction: float = LOW_QUALITY_FRACTION,
) -> TailFlag:
    """Decide whether an observation is low quality and where its tail starts.

    Components are sorted by decreasing ``|D_j|^2``; ``p_prime`` counts those
    at or above ``rel_threshold * max |D|^2``. The observation is flagged when
    more than ``fraction`` of the components fall below the threshold.
    """
    d2 = np.abs(np.asarray(d)) ** 2
    order = np.argsort(-d2, kind="stable")
    top = d2.max() if d2.size else 0.0
    if top <= 0:
        return TailFlag(False, 0, order)
    p_prime = int(np.count_nonzero(d2 >= rel_threshold * top))
    weak = d2.size - p_prime
    return TailFlag(weak > fraction * d2.size, p_prime, order)


def epsilon_tail(x, p_prime: int, order=None) -> float:
    """Mean power of the spectral observation over its tail ``order[p_prime:]``."""
    x = np.asarray(x)
    p = x.shape[0]
    if not 1 <= p_prime < p:
        raise ValueError(f"p_prime must satisfy 1 <= p_prime < p={p}, got {p_prime}")
    idx = np.arange(p) if order is None else np.asarray(order)
    tail = x[idx[p_prime:]]
    return float(np.mean(tail.real**2 + tail.imag**2))


@dataclass
class TailVariance:
    """Mean of per-observation tail estimates over flagged observations."""

    total: float = 0.0
    count: int = 0

    def add(self, d, x) -> bool:
        """Flag with :func:`flag_low_quality`; fold in the tail estimate if flagged."""
        flag = flag_low_quality(d)
        if not flag.flagged or flag.p_prime < 1:
            return False
        self.add_estimate(epsilon_tail(x, flag.p_prime, flag.order))
        return True

    def add_estimate(self, value: float) -> None:
        self.total += value
        self.count += 1

    def merge(self, other: "TailVariance") -> "TailVariance":
        return TailVariance(self.total + other.total, self.count + other.count)

    def estimate(self) -> float:
        if self.count == 0:
            raise ValueError("no low-quality observations have been flagged")
        return self.total / self.count

    def to_dict(self) -> dict:
        return {"total": self.total, "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "TailVariance":
        return cls(float(d["total"]), int(d["count"]))
