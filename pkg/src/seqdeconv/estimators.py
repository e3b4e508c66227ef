"""Spectral shrinkage estimators built on the sufficient statistic.

Every estimator here has the form ``theta_hat = Psi (lambda * B_n)`` with a
weight vector ``lambda`` in ``[0, 1]^p``. The weight families are

``main``
    soft threshold inflated by ``Omega_n^2`` (see :func:`weights_main`);
``soft``
    minimizer of the unbiased risk estimate over the hypercube;
``tp``
    Tikhonov-Phillips, ``delta / (delta + gamma)``;
``li``
    Landweber after ``gamma`` iterations with relaxation ``tau``;
``mono``
    minimizer of the risk estimate over nonincreasing weights.

Tuning parameters for ``tp`` and ``li`` that are not supplied are chosen by
minimizing :func:`risk_estimate` over fixed grids (see ``TP_GRID_SIZE`` etc.).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .accumulator import BStatistic, SufStat, b_statistic, gamma_n, omega_sq
from .errors import DegenerateStateError
from .spectral import from_spectral

__all__ = [
    "EstimatorSpec",
    "Estimate",
    "FAMILIES",
    "psi_hat",
    "risk_estimate",
    "risk_offset",
    "weights_soft",
    "weights_main",
    "weights_tp",
    "weights_li",
    "weights_monotone",
    "tune_tp",
    "tune_li",
    "estimate",
]

FAMILIES = ("main", "soft", "tp", "li", "mono")

# Tikhonov grid: log-spaced multiples of median(delta)
TP_GRID_SIZE = 50
TP_GRID_SPAN = (1e-6, 1e6)
# Landweber grid: iteration counts, tau = 1 / max(delta)
LI_MAX_ITER = 200


@dataclass(frozen=True)
class EstimatorSpec:
    """Selects one member of the estimator class.

    ``gamma``/``tau`` are the Tikhonov/Landweber tuning values; ``None``
    means "tune by risk minimization". ``omega_sq`` overrides the threshold
    inflation of the ``main`` family (default: the data-driven value).
    """

    family: str = "main"
    gamma: float | None = None
    tau: float | None = None
    omega_sq: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown estimator family {self.family!r}; expected one of {FAMILIES}")
        for name in ("gamma", "tau", "omega_sq"):
            v = getattr(self, name)
            if v is not None and (not np.isfinite(v) or v < 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.family == "li":
            if self.gamma is not None and (self.gamma < 1 or int(self.gamma) != self.gamma):
                raise ValueError("Landweber gamma is an iteration count >= 1")
            if self.tau is not None and self.tau <= 0:
                raise ValueError("Landweber tau must be positive")

    @property
    def label(self) -> str:
        return self.family


def _modulus_sq(b: BStatistic) -> np.ndarray:
    return b.b.real**2 + b.b.imag**2


def psi_hat(b: BStatistic, epsilon: float) -> np.ndarray:
    """Unclipped per-component shrinkage statistic ``(|B|^2 - eps^2/delta) / |B|^2``.

    Defined as 0 wherever ``|B_j| = 0`` or ``delta_j = 0``. May be negative.
    """
    m2 = _modulus_sq(b)
    ok = (m2 > 0) & (b.delta > 0)
    out = np.zeros_like(m2)
    out[ok] = 1.0 - epsilon**2 / (b.delta[ok] * m2[ok])
    return out


def risk_estimate(lam, b: BStatistic, epsilon: float) -> float:
    """Risk estimate ``sum_j (lambda_j - psi_j)^2 |B_j|^2``, unbiased up to a lambda-free constant."""
    lam = np.asarray(lam, dtype=float)
    return float(np.sum((lam - psi_hat(b, epsilon)) ** 2 * _modulus_sq(b)))


def risk_offset(b: BStatistic, epsilon: float) -> float:
    """The lambda-free term ``eps^2 sum_j psi_j / delta_j``.

    ``risk_estimate(lam) + risk_offset`` is an unbiased estimate of the
    true risk of ``lam * B``.
    """
    ok = b.delta > 0
    return float(epsilon**2 * np.sum(psi_hat(b, epsilon)[ok] / b.delta[ok]))


def _threshold(b: BStatistic, level: np.ndarray | float) -> np.ndarray:
    m2 = _modulus_sq(b)
    ok = (m2 > 0) & (b.delta > 0)
    out = np.zeros_like(m2)
    out[ok] = np.maximum(1.0 - level / (b.delta[ok] * m2[ok]), 0.0)
    return out


def weights_soft(b: BStatistic, epsilon: float) -> np.ndarray:
    """``(1 - eps^2 / (delta |B|^2))_+``: the hypercube minimizer of the risk estimate."""
    return _threshold(b, epsilon**2)


def weights_main(b: BStatistic, epsilon: float, omega_sq: float) -> np.ndarray:
    """Soft threshold with the level inflated by ``omega_sq``."""
    if omega_sq < 0:
        raise ValueError("omega_sq must be nonnegative")
    return _threshold(b, omega_sq * epsilon**2)


def weights_tp(delta, gamma: float) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    out = np.zeros_like(delta)
    ok = delta > 0
    out[ok] = delta[ok] / (delta[ok] + gamma)
    return out


def weights_li(delta, gamma: int, tau: float) -> np.ndarray:
    """Landweber filter factors ``1 - (1 - tau delta)^gamma``, projected onto [0, 1]."""
    if gamma < 1 or int(gamma) != gamma:
        raise ValueError("gamma is an iteration count >= 1")
    delta = np.asarray(delta, dtype=float)
    raw = 1.0 - (1.0 - tau * delta) ** int(gamma)
    out = np.clip(raw, 0.0, 1.0)
    if not np.array_equal(out, raw):
        warnings.warn(
            "Landweber weights left [0, 1] (tau * delta > 2 somewhere); clamped",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


def weights_monotone(b: BStatistic, epsilon: float, order=None) -> np.ndarray:
    """Minimize the risk estimate over weights that are nonincreasing along ``order``.

    Weighted pooled-adjacent-violators on ``psi_hat`` with weights ``|B_j|^2``,
    followed by projection onto [0, 1]. ``order`` is a permutation of the
    components (default: index order). Components with zero weight do not
    enter the objective; they inherit the preceding pooled value.
    """
    psi = psi_hat(b, epsilon)
    w = _modulus_sq(b)
    p = psi.size
    order = np.arange(p) if order is None else np.asarray(order)
    psi_o, w_o = psi[order], w[order]

    fitted = np.zeros(p)
    pos = w_o > 0
    if pos.any():
        fitted[pos] = isotonic_regression(psi_o[pos], weights=w_o[pos], increasing=False).x
        idx = np.where(pos, np.arange(p), -1)
        np.maximum.accumulate(idx, out=idx)
        first = np.argmax(pos)
        idx[idx < 0] = first
        fitted = fitted[idx]
    out = np.empty(p)
    out[order] = np.clip(fitted, 0.0, 1.0)
    return out


def tune_tp(b: BStatistic, epsilon: float) -> tuple[float, np.ndarray]:
    """Risk-minimizing Tikhonov ``gamma`` over the documented log grid."""
    active = b.delta[b.delta > 0]
    med = np.median(active) if active.size else 1.0
    grid = np.logspace(np.log10(TP_GRID_SPAN[0]), np.log10(TP_GRID_SPAN[1]), TP_GRID_SIZE) * med
    risks = [risk_estimate(weights_tp(b.delta, g), b, epsilon) for g in grid]
    g = float(grid[int(np.argmin(risks))])
    return g, weights_tp(b.delta, g)


def tune_li(b: BStatistic, epsilon: float, tau: float | None = None) -> tuple[int, float, np.ndarray]:
    """Risk-minimizing Landweber iteration count; ``tau`` defaults to ``1 / max(delta)``."""
    if tau is None:
        dmax = b.delta.max()
        tau = 1.0 / dmax if dmax > 0 else 1.0
    best = None
    for it in range(1, LI_MAX_ITER + 1):
        lam = weights_li(b.delta, it, tau)
        r = risk_estimate(lam, b, epsilon)
        if best is None or r < best[0]:
            best = (r, it, lam)
    return best[1], float(tau), best[2]


@dataclass
class Estimate:
    """Signal estimate and the quantities needed to audit it."""

    theta_hat: np.ndarray
    weights: np.ndarray
    beta_hat: np.ndarray
    n: int
    family: str
    tuning: dict = field(default_factory=dict)
    imag_residual: float = 0.0
    gamma_n: float | None = None
    omega_sq: float | None = None
    n_zeroed: int = 0
    degenerate: bool = False


def estimate(state: SufStat, spec: EstimatorSpec, epsilon: float) -> Estimate:
    """Compute ``theta_hat = Psi (lambda * B_n)`` for the family in ``spec``.

    ``epsilon`` is the noise standard deviation, known or estimated with
    :mod:`seqdeconv.noise_variance`. A state with no identified components
    yields the zero estimate and ``degenerate=True``.
    """
    if epsilon < 0 or not np.isfinite(epsilon):
        raise ValueError("epsilon must be finite and nonnegative")
    basis = state.basis
    b = b_statistic(state)
    if not np.any(b.delta > 0):
        warnings.warn("no identified components; returning the zero estimate", RuntimeWarning, stacklevel=2)
        zero = np.zeros(basis.p)
        return Estimate(zero, zero.copy(), np.zeros(basis.p, complex), state.n, spec.family,
                        n_zeroed=basis.p, degenerate=True)

    om = omega_sq(b)
    tuning: dict = {}
    fam = spec.family
    if fam == "main":
        level = om if spec.omega_sq is None else spec.omega_sq
        tuning["omega_sq"] = level
        lam = weights_main(b, epsilon, level)
    elif fam == "soft":
        lam = weights_soft(b, epsilon)
    elif fam == "tp":
        if spec.gamma is None:
            g, lam = tune_tp(b, epsilon)
        else:
            g, lam = spec.gamma, weights_tp(b.delta, spec.gamma)
        tuning["gamma"] = g
    elif fam == "li":
        if spec.gamma is None:
            it, tau, lam = tune_li(b, epsilon, spec.tau)
        else:
            it = int(spec.gamma)
            tau = spec.tau if spec.tau is not None else 1.0 / b.delta.max()
            if tau * b.delta.max() > 2:
                warnings.warn("tau * max(delta) > 2: Landweber iteration diverges", RuntimeWarning, stacklevel=2)
            lam = weights_li(b.delta, it, tau)
        tuning.update(gamma=it, tau=tau)
    else:
        lam = weights_monotone(b, epsilon, basis.frequency_order())

    beta_hat = lam * b.b
    theta_hat, imag = from_spectral(basis, beta_hat)
    try:
        gn = gamma_n(b, epsilon)
    except DegenerateStateError:
        gn = None
    return Estimate(
        theta_hat=theta_hat,
        weights=lam,
        beta_hat=beta_hat,
        n=state.n,
        family=fam,
        tuning=tuning,
        imag_residual=imag,
        gamma_n=gn,
        omega_sq=om,
        n_zeroed=int(np.count_nonzero(lam == 0)),
    )
