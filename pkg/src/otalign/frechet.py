"""Frechet distance between Gaussian fits of two embedding sets.

    d(a, b) = ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})

The cross term is computed through the symmetric product
S_a^{1/2} S_b S_a^{1/2}, whose eigenvalues are those of S_a S_b but can be
extracted with a symmetric eigensolver.  Everything runs in float64
regardless of the storage precision of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embio import EmbeddingMatrix
from .errors import DimMismatch, SqrtFailure, TooFewSamples

# Eigenvalues down to -tol*lambda_max are treated as rounding noise;
# sample covariances of high-D / low-N sets are routinely rank-deficient.
PSD_EIG_RTOL = 1e-6


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector, covariance matrix, and sample count of an embedding set."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self) -> None:
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        cov = np.ascontiguousarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise DimMismatch("mean must be a 1-D vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimMismatch(f"cov must be {d}x{d}, got {cov.shape}")
        if self.count < 2:
            raise TooFewSamples(f"need at least 2 samples, got {self.count}")
        if np.abs(cov - cov.T).max() > 1e-9:
            raise ValueError("covariance matrix is not symmetric")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dims(self) -> int:
        return self.mean.shape[0]


def gaussian_stats(m: EmbeddingMatrix) -> GaussianStats:
    """Column means and unbiased (n-1) sample covariance of the rows."""
    if m.rows < 2:
        raise TooFewSamples(f"need at least 2 rows, got {m.rows}")
    data = m.data.astype(np.float64)
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (m.rows - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean, cov, m.rows)


def psd_sqrt_product_trace(sa: np.ndarray, sb: np.ndarray) -> float:
    """Tr((S_a S_b)^{1/2}) for symmetric PSD matrices.

    S_a is eigendecomposed with negative eigenvalues clamped to zero to
    form S_a^{1/2}; the eigenvalues of S_a^{1/2} S_b S_a^{1/2} are clamped
    the same way and their square roots summed.
    """
    sa = np.asarray(sa, dtype=np.float64)
    sb = np.asarray(sb, dtype=np.float64)
    if sa.ndim != 2 or sa.shape[0] != sa.shape[1]:
        raise DimMismatch(f"expected a square matrix, got {sa.shape}")
    if sb.shape != sa.shape:
        raise DimMismatch(f"matrix shapes differ: {sa.shape} vs {sb.shape}")
    try:
        w, v = np.linalg.eigh((sa + sa.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise SqrtFailure(f"eigendecomposition of first matrix failed: {exc}") from exc
    w = _clip_spectrum(w)
    half = (v * np.sqrt(w)) @ v.T
    inner = half @ sb @ half
    inner = (inner + inner.T) / 2.0
    try:
        ev = np.linalg.eigvalsh(inner)
    except np.linalg.LinAlgError as exc:
        raise SqrtFailure(f"eigendecomposition of the product failed: {exc}") from exc
    ev = _clip_spectrum(ev)
    return float(np.sqrt(ev).sum())


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet (Wasserstein-2) distance between two Gaussian fits.

    Symmetric in its arguments up to rounding; slightly negative results
    from cancellation are clamped to 0.
    """
    if a.dims != b.dims:
        raise DimMismatch(f"stats dims differ: {a.dims} vs {b.dims}")
    diff = a.mean - b.mean
    value = (
        float(diff @ diff)
        + float(np.trace(a.cov))
        + float(np.trace(b.cov))
        - 2.0 * psd_sqrt_product_trace(a.cov, b.cov)
    )
    return max(value, 0.0)


def _clip_spectrum(w: np.ndarray) -> np.ndarray:
    tol = PSD_EIG_RTOL * max(float(w.max(initial=0.0)), 0.0)
    if float(w.min(initial=0.0)) < -max(tol, PSD_EIG_RTOL):
        raise SqrtFailure(
            f"matrix is not PSD up to rounding: min eigenvalue {w.min()!r}"
        )
    return np.maximum(w, 0.0)
