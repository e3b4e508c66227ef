"""Simulation study: test signals, random blur kernels and the RR experiment.

Signals live on ``p`` equispaced points of ``[-1, 1)``. Blur kernels are
three-Gaussian mixtures evaluated on a grid with ``spacing`` units per sample
(default 1, i.e. kernel means and widths are in samples). Noise is drawn in
signal space as real i.i.d. normals and rotated, which reproduces the
degenerate complex noise of the spectral model exactly.

Random streams come from Philox generators keyed by ``(seed, rep, signal)``,
so a replication's output does not depend on which worker ran it or when.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import accumulator as acc
from .baselines import init_average, oracle_weights, ridge_estimate, true_risk, update_average
from .estimators import EstimatorSpec, estimate
from .spectral import SpectralBasis, diagonalize, from_spectral, to_spectral

__all__ = [
    "KernelModel",
    "ExperimentConfig",
    "RRRow",
    "RRTable",
    "RiskCurve",
    "make_rng",
    "signal_axis",
    "gen_theta_smooth",
    "gen_theta_peaked",
    "make_signal",
    "sample_kernel",
    "gaussian_kernel",
    "sample_random_eigenvalues",
    "simulate_observation",
    "rr",
    "rr_with_se",
    "run_experiment",
    "risk_curve",
    "SMOOTH_PARAMS",
    "PEAKED_PARAMS",
]

# two Gaussian bumps: (center, sigma, amplitude) on [-1, 1); taper exp(-(k / (p/8))^2)
SMOOTH_PARAMS = {"bumps": ((-0.3, 0.1, 1.0), (0.3, 0.1, 0.8)), "taper_scale": 1 / 8}
# triangular peaks: (center, height, half-width in samples)
PEAKED_PARAMS = {"peaks": ((-0.5, 1.0, 3), (0.0, 0.7, 3), (0.45, 0.15, 2))}

SIGNALS = ("smooth", "peaked")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the substream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def signal_axis(p: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, p, endpoint=False)


def _center_index(pos: float, p: int) -> int:
    return int(round((pos + 1.0) / 2.0 * p)) % p


def gen_theta_smooth(p: int, cutoff: float | None = None) -> np.ndarray:
    """Two Gaussian bumps, low-pass filtered by a Gaussian taper.

    Spectral coefficients whose frequency magnitude is ``>= cutoff``
    (default ``p/2``, i.e. the Nyquist bin) are set exactly to zero.
    """
    if p < 8 or p % 2:
        raise ValueError("smooth signal needs an even p >= 8")
    x = signal_axis(p)
    theta = np.zeros(p)
    for c, s, a in SMOOTH_PARAMS["bumps"]:
        theta += a * np.exp(-0.5 * ((x - c) / s) ** 2)
    k = np.abs(np.fft.fftfreq(p) * p)
    spec = np.fft.fft(theta) * np.exp(-((k / (p * SMOOTH_PARAMS["taper_scale"])) ** 2))
    spec[k >= (p / 2 if cutoff is None else cutoff)] = 0.0
    return np.fft.ifft(spec).real


def gen_theta_peaked(p: int) -> np.ndarray:
    """Three triangular spikes; the last one is small enough to vanish under blur."""
    if p < 8:
        raise ValueError("peaked signal needs p >= 8")
    theta = np.zeros(p)
    for c, h, hw in PEAKED_PARAMS["peaks"]:
        i0 = _center_index(c, p)
        for off in range(-hw + 1, hw):
            theta[(i0 + off) % p] += h * (1.0 - abs(off) / hw)
    return theta


def make_signal(kind: str, p: int) -> np.ndarray:
    if kind == "smooth":
        return gen_theta_smooth(p)
    if kind == "peaked":
        return gen_theta_peaked(p)
    raise ValueError(f"unknown signal {kind!r}")


@dataclass(frozen=True)
class KernelModel:
    """Equal-weight mixture of three Gaussians with random widths ``sigma_base + Exp(1)``."""

    means: tuple[float, float, float] = (-0.75, 0.0, 0.5)
    sigma_base: float = 0.5
    spacing: float = 1.0

    def grid(self, p: int) -> np.ndarray:
        return (np.arange(p) - p // 2) * self.spacing


def _center_and_normalize(values: np.ndarray) -> np.ndarray:
    p = values.size
    centroid = int(round(np.sum(np.arange(p) * values) / np.sum(values)))
    taps = np.roll(values, -centroid)
    return taps / np.sum(np.abs(taps))


def sample_kernel(rng: np.random.Generator, p: int, model: KernelModel = KernelModel()) -> np.ndarray:
    """Draw one blur kernel; taps sum to 1 with the mass centroid at index 0."""
    u = rng.random(len(model.means))
    sigmas = model.sigma_base - np.log1p(-u)  # Exp(1) by inverse CDF
    g = model.grid(p)
    mix = np.zeros(p)
    for mu, s in zip(model.means, sigmas):
        mix += np.exp(-0.5 * ((g - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi))
    return _center_and_normalize(mix / len(model.means))


def gaussian_kernel(p: int, sigma: float, spacing: float = 1.0) -> np.ndarray:
    """Single centered Gaussian blur with unit mass."""
    g = (np.arange(p) - p // 2) * spacing
    return _center_and_normalize(np.exp(-0.5 * (g / sigma) ** 2))


def sample_random_eigenvalues(rng: np.random.Generator, rho: float, p: int) -> np.ndarray:
    """Eigenvalues with ``P(|D_j|^2 < t) = t^rho`` on (0, 1] and uniform phase."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    mag_sq = rng.random(p) ** (1.0 / rho)
    phase = rng.random(p) * 2 * math.pi
    return np.sqrt(mag_sq) * np.exp(1j * phase)


def simulate_observation(
    rng: np.random.Generator,
    theta,
    epsilon: float,
    *,
    kernel=None,
    d=None,
    basis: SpectralBasis | None = None,
    spectral: bool = False,
) -> np.ndarray:
    """One draw of ``Y = K theta + eps W`` (or ``X = D beta + eps Psi^* W`` if ``spectral``).

    Give exactly one of ``kernel`` (real taps) or ``d`` (eigenvalues).
    """
    theta = np.asarray(theta, dtype=float)
    basis = SpectralBasis.one_d(theta.size) if basis is None else basis
    if (kernel is None) == (d is None):
        raise ValueError("give exactly one of kernel or d")
    if d is None:
        d = diagonalize(basis, kernel)
    w = rng.standard_normal(basis.p)
    if spectral:
        return d * to_spectral(basis, theta) + epsilon * to_spectral(basis, w)
    blurred = _apply_spectral(basis, np.asarray(d) * to_spectral(basis, theta))
    if kernel is not None:
        blurred = blurred.real
    return blurred + epsilon * w


def _apply_spectral(basis: SpectralBasis, b: np.ndarray) -> np.ndarray:
    if basis.layout == "1d":
        return np.fft.ifft(b, norm="ortho")
    return np.fft.ifft2(b.reshape(basis.shape), norm="ortho").ravel()


def rr_with_se(losses, theta_norm_sq: float) -> tuple[float, float]:
    """RR from per-replication squared errors, with a delta-method standard error."""
    losses = np.asarray(losses, dtype=float)
    m = float(losses.mean())
    value = math.sqrt(m / theta_norm_sq)
    if losses.size < 2:
        return value, math.nan
    se_m = float(losses.std(ddof=1)) / math.sqrt(losses.size)
    se = se_m / (2.0 * math.sqrt(m * theta_norm_sq)) if m > 0 else 0.0
    return value, se


def rr(theta_hat_samples, theta) -> float:
    """Normalized relative risk ``sqrt(mean ||theta_hat - theta||^2 / ||theta||^2)``."""
    theta = np.asarray(theta, dtype=float)
    samples = np.atleast_2d(np.asarray(theta_hat_samples, dtype=float))
    losses = np.sum((samples - theta) ** 2, axis=1)
    return rr_with_se(losses, float(theta @ theta))[0]


def _entry_label(e) -> str:
    if isinstance(e, str):
        if e not in ("ridge", "oracle"):
            raise ValueError(f"unknown baseline {e!r}")
        return e
    params = [f"{k}={getattr(e, k):g}" for k in ("gamma", "tau", "omega_sq") if getattr(e, k) is not None]
    return e.family + (f"({','.join(params)})" if params else "")


@dataclass
class ExperimentConfig:
    p: int = 256
    snr: float = 1.0
    n_grid: tuple[int, ...] = (50, 100, 200, 300)
    reps: int = 100
    seed: int = 0
    signals: tuple[str, ...] = SIGNALS
    estimators: tuple = (EstimatorSpec("main"), "ridge")
    kernel_model: KernelModel = field(default_factory=KernelModel)
    workers: int = 1
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise ValueError("n_grid must be a non-empty list of positive sample sizes")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ValueError("n_grid must be strictly increasing")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        for s in self.signals:
            make_signal(s, self.p)
        labels = [_entry_label(e) for e in self.estimators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate estimator labels {labels}")

    @property
    def labels(self) -> list[str]:
        return [_entry_label(e) for e in self.estimators]


class RRRow(NamedTuple):
    n: int
    estimator: str
    signal: str
    rr: float
    se: float
    reps: int
    seed: int


@dataclass
class RRTable:
    rows: list[RRRow]
    losses: dict = field(default_factory=dict, repr=False)
    snapshots: dict = field(default_factory=dict, repr=False)
    thetas: dict = field(default_factory=dict, repr=False)

    CSV_HEADER = ("n", "estimator", "signal", "rr", "se", "reps", "seed")

    def get(self, n: int, estimator: str, signal: str) -> RRRow:
        for r in self.rows:
            if r.n == n and r.estimator == estimator and r.signal == signal:
                return r
        raise KeyError((n, estimator, signal))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([r.n, r.estimator, r.signal, repr(r.rr), repr(r.se), r.reps, r.seed])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RRTable":
        reader = csv.DictReader(io.StringIO(text))
        rows = [
            RRRow(int(d["n"]), d["estimator"], d["signal"], float(d["rr"]), float(d["se"]),
                  int(d["reps"]), int(d["seed"]))
            for d in reader
        ]
        return cls(rows)


def _replication(args):
    cfg, rep = args
    basis = SpectralBasis.one_d(cfg.p)
    out = {}
    snaps = {}
    checkpoints = set(cfg.n_grid)
    for s_idx, kind in enumerate(cfg.signals):
        rng = make_rng(cfg.seed, rep, s_idx)
        theta = make_signal(kind, cfg.p)
        eps = float(np.sum(np.abs(theta))) / (cfg.p * cfg.snr)
        beta = to_spectral(basis, theta)
        state = acc.init(basis)
        avg = init_average(basis)
        for i in range(1, cfg.n_grid[-1] + 1):
            d = diagonalize(basis, sample_kernel(rng, cfg.p, cfg.kernel_model))
            x = d * beta + eps * to_spectral(basis, rng.standard_normal(cfg.p))
            state = acc.update(state, d, x)
            avg = update_average(avg, d, x)
            if i not in checkpoints:
                continue
            for entry in cfg.estimators:
                label = _entry_label(entry)
                if entry == "ridge":
                    th, _ = ridge_estimate(avg)
                elif entry == "oracle":
                    lam = oracle_weights(beta, state.delta, eps)
                    out[(kind, i, label)] = true_risk(lam, beta, state.delta, eps)
                    th, _ = from_spectral(basis, lam * acc.b_statistic(state).b)
                    if cfg.keep_snapshots and rep == 0:
                        snaps[(kind, i, label)] = th
                    continue
                else:
                    th = estimate(state, entry, eps).theta_hat
                out[(kind, i, label)] = float(np.sum((th - theta) ** 2))
                if cfg.keep_snapshots and rep == 0:
                    snaps[(kind, i, label)] = th
    return out, snaps


def run_experiment(config: ExperimentConfig) -> RRTable:
    """Monte Carlo RR for every (signal, n, estimator) in the configuration.

    The ``oracle`` entry reports the exact risk of the oracle weights given
    each replication's ``delta`` rather than a realized squared error.
    Results are identical for any ``workers`` value.
    """
    jobs = [(config, r) for r in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            results = list(ex.map(_replication, jobs))
    else:
        results = [_replication(j) for j in jobs]

    labels = config.labels
    losses = {}
    rows = []
    thetas = {kind: make_signal(kind, config.p) for kind in config.signals}
    for kind in config.signals:
        tn = float(thetas[kind] @ thetas[kind])
        for label in labels:
            for n in config.n_grid:
                ls = np.array([res[0][(kind, n, label)] for res in results])
                losses[(kind, n, label)] = ls
                value, se = rr_with_se(ls, tn)
                rows.append(RRRow(n, label, kind, value, se, config.reps, int(config.seed)))
    snapshots = results[0][1] if results else {}
    return RRTable(rows, losses, snapshots, thetas)


class RiskCurve(NamedTuple):
    n_grid: tuple[int, ...]
    mean_loss: np.ndarray
    se_loss: np.ndarray
    mean_gamma_n: np.ndarray


def risk_curve(
    theta,
    d_sampler: Callable[[np.random.Generator], np.ndarray],
    epsilon: float,
    n_grid: Sequence[int],
    reps: int,
    seed: int,
    spec: EstimatorSpec = EstimatorSpec("main"),
) -> RiskCurve:
    """Monte Carlo risk of a streaming estimator along a growing sample size.

    ``d_sampler(rng)`` returns the eigenvalues of the next operator. Loss is
    the spectral squared error ``||lambda B_n - beta||^2``, equal to the
    complex signal-space error ``||Psi (lambda B_n) - theta||^2``.
    """
    theta = np.asarray(theta, dtype=float)
    basis = SpectralBasis.one_d(theta.size)
    beta = to_spectral(basis, theta)
    n_grid = tuple(int(n) for n in n_grid)
    losses = np.zeros((reps, len(n_grid)))
    gammas = np.full((reps, len(n_grid)), np.nan)
    for r in range(reps):
        rng = make_rng(seed, r)
        state = acc.init(basis)
        k = 0
        for i in range(1, n_grid[-1] + 1):
            d = d_sampler(rng)
            x = d * beta + epsilon * to_spectral(basis, rng.standard_normal(basis.p))
            state = acc.update(state, d, x)
            if i == n_grid[k]:
                est = estimate(state, spec, epsilon)
                losses[r, k] = float(np.sum(np.abs(est.beta_hat - beta) ** 2))
                if est.gamma_n is not None:
                    gammas[r, k] = est.gamma_n
                k += 1
    se = losses.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(len(n_grid), np.nan)
    return RiskCurve(n_grid, losses.mean(axis=0), se, np.nanmean(gammas, axis=0))
