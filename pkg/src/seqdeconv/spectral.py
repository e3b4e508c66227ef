"""Diagonalization of circular-convolution operators by the discrete Fourier basis.

Scaling conventions, in one place:

* ``Psi`` is the *inverse* unitary DFT and ``Psi^*`` the forward unitary DFT
  (``norm="ortho"``), so both transforms preserve the Euclidean norm.
* Eigenvalues of a convolution operator are the *unnormalized* DFT of its
  first column. With these two choices ``K = Psi diag(D) Psi^*`` holds exactly
  and ``D`` is the usual transfer function of the blur.

A real signal ``y`` is treated as an element of ``C^p`` with zero imaginary
part. For two-dimensional layouts vectors are row-major flattenings of an
``(h, w)`` image and the transforms are 2D FFTs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError

__all__ = [
    "SpectralBasis",
    "SharedDiagonalization",
    "diagonalize",
    "to_spectral",
    "from_spectral",
    "validate_shared_diagonalization",
]


@dataclass(frozen=True)
class SpectralBasis:
    """Descriptor of a 1D (``shape=(p,)``) or 2D (``shape=(h, w)``) Fourier basis."""

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) not in (1, 2):
            raise ValueError(f"basis must be 1D or 2D, got shape {shape}")
        if any(s < 1 for s in shape):
            raise ValueError(f"basis dimensions must be positive, got {shape}")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def one_d(cls, p: int) -> "SpectralBasis":
        return cls((p,))

    @classmethod
    def two_d(cls, h: int, w: int) -> "SpectralBasis":
        return cls((h, w))

    @property
    def layout(self) -> str:
        return "1d" if len(self.shape) == 1 else "2d"

    @property
    def p(self) -> int:
        return int(np.prod(self.shape))

    def frequency_order(self) -> np.ndarray:
        """Component indices sorted by increasing frequency magnitude.

        The sort is stable, so the two members of a conjugate pair end up
        adjacent and constant-in-magnitude shells keep index order.
        """
        grids = np.meshgrid(*[np.fft.fftfreq(s) * s for s in self.shape], indexing="ij")
        radius = np.sqrt(sum(g**2 for g in grids)).ravel()
        return np.argsort(radius, kind="stable")

    def _as_vector(self, v, name: str) -> np.ndarray:
        a = np.asarray(v)
        if a.shape != (self.p,) and a.shape != self.shape:
            raise DimensionError(
                f"{name} has shape {a.shape}, expected ({self.p},) for basis {self.shape}"
            )
        return a.reshape(self.p)


def diagonalize(basis: SpectralBasis, kernel) -> np.ndarray:
    """Eigenvalues of the (block-)circulant operator whose first column is ``kernel``.

    Parameters
    ----------
    basis : SpectralBasis
    kernel : array_like
        Length-``p`` taps (or an ``(h, w)`` array for 2D layouts).

    Returns
    -------
    ndarray of complex, shape (p,)
        Unnormalized DFT of the taps.
    """
    taps = basis._as_vector(kernel, "kernel")
    if not np.all(np.isfinite(taps)):
        raise ValueError("kernel taps must be finite")
    if basis.layout == "1d":
        return np.fft.fft(taps)
    return np.fft.fft2(taps.reshape(basis.shape)).ravel()


def to_spectral(basis: SpectralBasis, y) -> np.ndarray:
    """Apply ``Psi^*`` (forward unitary DFT) to a signal-space vector."""
    v = basis._as_vector(y, "y")
    if basis.layout == "1d":
        return np.fft.fft(v, norm="ortho")
    return np.fft.fft2(v.reshape(basis.shape), norm="ortho").ravel()


def from_spectral(basis: SpectralBasis, b) -> tuple[np.ndarray, float]:
    """Apply ``Psi`` to a spectral vector.

    Returns
    -------
    real : ndarray of float
        Real part of ``Psi b``.
    imag_residual : float
        ``max |Im(Psi b)|``; close to zero when ``b`` is conjugate symmetric.
    """
    v = basis._as_vector(b, "b")
    if basis.layout == "1d":
        out = np.fft.ifft(v, norm="ortho")
    else:
        out = np.fft.ifft2(v.reshape(basis.shape), norm="ortho").ravel()
    imag = float(np.max(np.abs(out.imag))) if out.size else 0.0
    return out.real.copy(), imag


class SharedDiagonalization(NamedTuple):
    ok: bool
    residual: float


def validate_shared_diagonalization(
    matrices: Sequence,
    *,
    commute_tol: float = 1e-8,
    diag_tol: float = 1e-6,
    max_order: int = 32,
    rng: np.random.Generator | None = None,
) -> SharedDiagonalization:
    """Check that a small family of matrices is simultaneously unitarily diagonalizable.

    Pairwise commutators must vanish (relative to ``commute_tol``), and the
    Schur vectors of a random complex combination of the family must
    diagonalize every member (off-diagonal mass relative to ``diag_tol``).
    A degenerate combination is retried with fresh coefficients up to three
    times.

    Returns
    -------
    SharedDiagonalization
        ``ok`` flag and the worst relative residual seen.
    """
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    order = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"matrix of shape {m.shape} is not square")
        if m.shape[0] != order:
            raise DimensionError("matrices have different orders")
    if order > max_order:
        raise DimensionError(f"order {order} exceeds the test-scale limit {max_order}")
    rng = np.random.default_rng() if rng is None else rng

    scale = [max(1.0, np.linalg.norm(m)) for m in mats]
    worst_commute = 0.0
    for i in range(len(mats)):
        for k in range(i + 1, len(mats)):
            c = mats[i] @ mats[k] - mats[k] @ mats[i]
            worst_commute = max(worst_commute, np.linalg.norm(c) / (scale[i] * scale[k]))
    if worst_commute > commute_tol:
        return SharedDiagonalization(False, float(worst_commute))

    off = ~np.eye(order, dtype=bool)
    best = np.inf
    for _ in range(3):
        coef = rng.standard_normal(len(mats)) + 1j * rng.standard_normal(len(mats))
        combo = sum(c * m for c, m in zip(coef, mats))
        _, q = scipy.linalg.schur(combo, output="complex")
        resid = max(
            np.linalg.norm((q.conj().T @ m @ q)[off]) / s for m, s in zip(mats, scale)
        )
        best = min(best, resid)
        if best <= diag_tol:
            break
    return SharedDiagonalization(bool(best <= diag_tol), float(max(best, worst_commute)))
