"""Averaged-observation baseline, ridge/GCV comparator and oracle risks.

The averaged model keeps running means of the rotated observations and of
the eigenvalues, ``xbar = mean(X_i)`` and ``dbar = mean(D_i)``, and works with

    Bbar_j = conj(dbar_j) xbar_j / |dbar_j|^2,

whose noise variance is ``eps^2 / (n |dbar_j|^2)``. Since
``n |dbar_j|^2 <= sum_i |D_ij|^2`` (Cauchy-Schwarz) this is never better
than the sufficient statistic, and strictly worse once the ``D_i`` differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .spectral import SpectralBasis, from_spectral

__all__ = [
    "AveragedStat",
    "OracleRiskReport",
    "init_average",
    "update_average",
    "b_bar",
    "ridge_weights",
    "gcv_curve",
    "gcv_select_tau",
    "ridge_estimate",
    "true_risk",
    "oracle_weights",
    "oracle_risks",
    "GCV_GRID_SIZE",
    "GCV_GRID_SPAN",
]

GCV_GRID_SIZE = 100
GCV_GRID_SPAN = (1e-8, 1e8)  # multiples of median(|dbar|^2)


@dataclass(frozen=True, eq=False)
class AveragedStat:
    basis: SpectralBasis
    n: int
    xbar: np.ndarray
    dbar: np.ndarray

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "xbar_re": self.xbar.real.tolist(),
            "xbar_im": self.xbar.imag.tolist(),
            "dbar_re": self.dbar.real.tolist(),
            "dbar_im": self.dbar.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, basis: SpectralBasis, d: dict) -> "AveragedStat":
        xbar = np.asarray(d["xbar_re"], float) + 1j * np.asarray(d["xbar_im"], float)
        dbar = np.asarray(d["dbar_re"], float) + 1j * np.asarray(d["dbar_im"], float)
        if xbar.shape != (basis.p,) or dbar.shape != (basis.p,):
            raise DimensionError("averaged state does not match the basis size")
        return cls(basis, int(d["n"]), xbar, dbar)


@dataclass(frozen=True)
class OracleRiskReport:
    r1: float
    r2: float
    per_component_r1: np.ndarray
    per_component_r2: np.ndarray


def init_average(basis: SpectralBasis) -> AveragedStat:
    return AveragedStat(basis, 0, np.zeros(basis.p, complex), np.zeros(basis.p, complex))


def update_average(state: AveragedStat, d, x) -> AveragedStat:
    d = state.basis._as_vector(d, "d").astype(complex, copy=False)
    x = state.basis._as_vector(x, "x").astype(complex, copy=False)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(x))):
        raise ValueError("observation contains non-finite values")
    n = state.n + 1
    return AveragedStat(
        state.basis,
        n,
        state.xbar + (x - state.xbar) / n,
        state.dbar + (d - state.dbar) / n,
    )


def _dbar_sq(state: AveragedStat) -> np.ndarray:
    return state.dbar.real**2 + state.dbar.imag**2


def b_bar(state: AveragedStat) -> np.ndarray:
    d2 = _dbar_sq(state)
    out = np.zeros(state.basis.p, complex)
    ok = d2 > 0
    out[ok] = state.dbar[ok].conj() * state.xbar[ok] / d2[ok]
    return out


def ridge_weights(state: AveragedStat, tau: float) -> np.ndarray:
    """Ridge filter factors ``|dbar|^2 / (|dbar|^2 + tau)``; 0 where ``dbar = 0``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    d2 = _dbar_sq(state)
    out = np.zeros_like(d2)
    ok = d2 > 0
    out[ok] = d2[ok] / (d2[ok] + tau)
    return out


def _tau_grid(state: AveragedStat) -> np.ndarray:
    d2 = _dbar_sq(state)
    med = np.median(d2)
    if med <= 0:
        pos = d2[d2 > 0]
        med = np.median(pos) if pos.size else 1.0
    lo, hi = np.log10(GCV_GRID_SPAN[0]), np.log10(GCV_GRID_SPAN[1])
    return np.logspace(lo, hi, GCV_GRID_SIZE) * med


def gcv_curve(state: AveragedStat, taus=None) -> tuple[np.ndarray, np.ndarray]:
    """GCV score at each ``tau``; NaN where it is undefined.

    ``GCV(tau) = mean_j |(1 - S_j) xbar_j|^2 / (mean_j (1 - S_j))^2`` with
    ``S_j = |dbar_j|^2 / (|dbar_j|^2 + tau)``. Since ``1 - S_j = tau * g_j``
    with ``g_j = 1 / (|dbar_j|^2 + tau)``, the factor ``tau^2`` cancels and the
    score is evaluated as ``mean(g^2 |xbar|^2) / mean(g)^2``, which stays
    accurate when every ``S_j`` is close to 1. Only ``tau = 0`` (all
    ``S_j = 1``, a 0/0) is excluded.
    """
    taus = _tau_grid(state) if taus is None else np.asarray(taus, float)
    d2 = _dbar_sq(state)
    x2 = state.xbar.real**2 + state.xbar.imag**2
    score = np.full(taus.shape, np.nan)
    ok = taus > 0
    g = 1.0 / (d2[None, :] + taus[ok, None])
    score[ok] = np.mean(g**2 * x2[None, :], axis=1) / np.mean(g, axis=1) ** 2
    return taus, score


def gcv_select_tau(state: AveragedStat) -> float:
    if state.n < 1:
        raise ValueError("GCV needs at least one observation")
    taus, score = gcv_curve(state)
    if np.all(np.isnan(score)):
        return float(taus[-1])
    return float(taus[int(np.nanargmin(score))])


def ridge_estimate(state: AveragedStat, tau: float | None = None) -> tuple[np.ndarray, float]:
    """Ridge estimate from the averaged model; ``tau`` chosen by GCV when omitted."""
    if tau is None:
        tau = gcv_select_tau(state)
    theta, _ = from_spectral(state.basis, ridge_weights(state, tau) * b_bar(state))
    return theta, tau


def true_risk(lam, beta, delta, epsilon: float) -> float:
    """Exact risk of ``lambda * B_n``: ``sum (lambda-1)^2 |beta|^2 + eps^2 lambda^2 / delta``.

    Components with ``delta = 0`` are estimated as 0 and contribute ``|beta_j|^2``.
    """
    lam = np.asarray(lam, float)
    beta = np.asarray(beta)
    delta = np.asarray(delta, float)
    b2 = np.abs(beta) ** 2
    ok = delta > 0
    risk = np.where(ok, (lam - 1.0) ** 2 * b2, b2)
    risk[ok] += epsilon**2 * lam[ok] ** 2 / delta[ok]
    return float(np.sum(risk))


def oracle_weights(beta, delta, epsilon: float) -> np.ndarray:
    """Risk-minimizing weights given the truth: ``|beta|^2 / (|beta|^2 + eps^2/delta)``."""
    b2 = np.abs(np.asarray(beta)) ** 2
    delta = np.asarray(delta, float)
    out = np.zeros_like(b2)
    ok = delta > 0
    v = epsilon**2 / delta[ok]
    with np.errstate(invalid="ignore"):
        w = b2[ok] / (b2[ok] + v)
    out[ok] = np.where(b2[ok] + v > 0, w, 1.0)
    return out


def _oracle_component_risk(b2: np.ndarray, var: np.ndarray) -> np.ndarray:
    denom = b2 + var
    out = np.zeros_like(b2)
    ok = denom > 0
    out[ok] = b2[ok] * var[ok] / denom[ok]
    return out


def oracle_risks(beta, d_list, epsilon: float) -> OracleRiskReport:
    """Oracle linear risks from the sufficient statistic (``r1``) and the averaged model (``r2``)."""
    d = np.asarray(d_list, dtype=complex)
    if d.ndim != 2 or d.shape[0] == 0:
        raise ValueError("d_list must be a non-empty (n, p) collection")
    beta = np.asarray(beta)
    if beta.shape != (d.shape[1],):
        raise DimensionError("beta length does not match the eigenvalue vectors")
    n = d.shape[0]
    b2 = np.abs(beta) ** 2
    delta = np.sum(d.real**2 + d.imag**2, axis=0)
    dbar = d.mean(axis=0)
    eff = n * (dbar.real**2 + dbar.imag**2)
    # identical operators on a component: the two statistics coincide exactly
    same = np.all(d == d[:1], axis=0)
    eff[same] = delta[same]
    np.minimum(eff, delta, out=eff)  # Cauchy-Schwarz; guards against rounding

    per1 = b2.copy()
    ok1 = delta > 0
    per1[ok1] = _oracle_component_risk(b2[ok1], epsilon**2 / delta[ok1])
    per2 = b2.copy()
    ok2 = eff > 0
    per2[ok2] = _oracle_component_risk(b2[ok2], epsilon**2 / eff[ok2])
    return OracleRiskReport(float(per1.sum()), float(per2.sum()), per1, per2)
