"""Streaming spectral estimators for sequences of blurred, noisy inverse problems."""

from .accumulator import BStatistic, SufStat, b_statistic, gamma_n, merge, omega_sq, update
from .accumulator import init as init_state
from .baselines import AveragedStat, gcv_select_tau, oracle_risks, ridge_estimate, true_risk
from .errors import DegenerateStateError, DimensionError
from .estimators import Estimate, EstimatorSpec, estimate
from .spectral import SpectralBasis, diagonalize, from_spectral, to_spectral

__version__ = "0.1.0"

__all__ = [
    "AveragedStat",
    "BStatistic",
    "DegenerateStateError",
    "DimensionError",
    "Estimate",
    "EstimatorSpec",
    "SpectralBasis",
    "SufStat",
    "b_statistic",
    "diagonalize",
    "estimate",
    "from_spectral",
    "gamma_n",
    "gcv_select_tau",
    "init_state",
    "merge",
    "omega_sq",
    "oracle_risks",
    "ridge_estimate",
    "to_spectral",
    "true_risk",
    "update",
]
