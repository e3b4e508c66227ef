"""Streaming sufficient statistic for a sequence of diagonalized observations.

After ``n`` observations ``X_i = D_i beta + eps Z_i`` the whole history is
summarized by two length-``p`` vectors::

    num_j   = sum_i conj(D_ij) X_ij
    delta_j = sum_i |D_ij|^2

and ``B_nj = num_j / delta_j``. Components with ``delta_j == 0`` have not been
observed through any operator; their ``B_nj`` is defined as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStateError, DimensionError
from .spectral import SpectralBasis, diagonalize, to_spectral

__all__ = [
    "SufStat",
    "BStatistic",
    "init",
    "update",
    "update_from_signal",
    "merge",
    "b_statistic",
    "omega_sq",
    "gamma_n",
    "STATE_VERSION",
]

STATE_VERSION = 1


@dataclass(frozen=True, eq=False)
class SufStat:
    """Value-typed accumulator state. Treat the arrays as read-only."""

    basis: SpectralBasis
    n: int
    num: np.ndarray
    delta: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, SufStat):
            return NotImplemented
        return (
            self.basis == other.basis
            and self.n == other.n
            and np.array_equal(self.num, other.num)
            and np.array_equal(self.delta, other.delta)
        )

    def to_dict(self) -> dict:
        d = {"version": STATE_VERSION, "layout": self.basis.layout}
        if self.basis.layout == "1d":
            d["p"] = self.basis.p
        else:
            d["h"], d["w"] = self.basis.shape
        d.update(
            n=self.n,
            num_re=self.num.real.tolist(),
            num_im=self.num.imag.tolist(),
            delta=self.delta.tolist(),
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SufStat":
        if d.get("version") != STATE_VERSION:
            raise ValueError(f"unsupported state version {d.get('version')!r}")
        if d["layout"] == "1d":
            basis = SpectralBasis.one_d(d["p"])
        elif d["layout"] == "2d":
            basis = SpectralBasis.two_d(d["h"], d["w"])
        else:
            raise ValueError(f"unknown layout {d['layout']!r}")
        num = np.asarray(d["num_re"], dtype=float) + 1j * np.asarray(d["num_im"], dtype=float)
        delta = np.asarray(d["delta"], dtype=float)
        if num.shape != (basis.p,) or delta.shape != (basis.p,):
            raise DimensionError("state vectors do not match the basis size")
        return cls(basis, int(d["n"]), num, delta)

    def to_json(self) -> str:
        # json emits floats with repr(), which round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "SufStat":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True, eq=False)
class BStatistic:
    b: np.ndarray
    delta: np.ndarray
    n: int


def init(basis: SpectralBasis) -> SufStat:
    return SufStat(basis, 0, np.zeros(basis.p, dtype=complex), np.zeros(basis.p))


def _check_obs(state: SufStat, d, x) -> tuple[np.ndarray, np.ndarray]:
    d = state.basis._as_vector(d, "d").astype(complex, copy=False)
    x = state.basis._as_vector(x, "x").astype(complex, copy=False)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(x))):
        raise ValueError("observation contains non-finite values")
    return d, x


def update(state: SufStat, d, x) -> SufStat:
    """Fold one spectral observation ``x`` with eigenvalues ``d`` into the state."""
    d, x = _check_obs(state, d, x)
    return SufStat(
        state.basis,
        state.n + 1,
        state.num + d.conj() * x,
        state.delta + (d.real**2 + d.imag**2),
    )


def update_from_signal(state: SufStat, kernel, y) -> SufStat:
    """Diagonalize ``kernel``, rotate ``y`` and update. Convenience for raw data."""
    basis = state.basis
    return update(state, diagonalize(basis, kernel), to_spectral(basis, y))


def merge(a: SufStat, b: SufStat) -> SufStat:
    """Combine states built from disjoint observation streams."""
    if a.basis != b.basis:
        raise DimensionError(f"cannot merge bases {a.basis.shape} and {b.basis.shape}")
    return SufStat(a.basis, a.n + b.n, a.num + b.num, a.delta + b.delta)


def b_statistic(state: SufStat) -> BStatistic:
    active = state.delta > 0
    b = np.zeros_like(state.num)
    b[active] = state.num[active] / state.delta[active]
    return BStatistic(b, state.delta.copy(), state.n)


def omega_sq(state) -> float:
    """Threshold inflation ``(p-2)_+ (1 + max delta / min delta)`` over identified components.

    Accepts anything with a ``delta`` attribute (``SufStat`` or ``BStatistic``).
    """
    delta = np.asarray(state.delta)
    active = delta[delta > 0]
    if active.size == 0:
        raise DegenerateStateError("no identified components: every delta is zero")
    p = delta.size
    return max(p - 2, 0) * (1.0 + active.max() / active.min())


def gamma_n(state, epsilon: float) -> float:
    """Worst-case per-component noise variance ``max_j eps^2 / delta_j``."""
    delta = np.asarray(state.delta)
    if np.any(delta <= 0):
        raise DegenerateStateError("rate undefined before every component is identified")
    return float(np.max(epsilon**2 / delta))
