"""Map each source embedding onto the target set.

Three strategies share one support/weight representation:

* ``knn_map``    -- unweighted mean of the k most cosine-similar targets.
* ``ot_ave_map`` -- unweighted mean of the k targets with largest coupling
  weight in the row.
* ``ot_bar_map`` -- coupling-weighted mean over those same k targets, with
  the weights renormalized to sum to 1 (at k = N this is exactly the
  barycentric projection gamma_ij / p_i).

All mapped rows are produced by one dense weight-matrix product W @ Y so
that equal weight rows yield bit-identical output rows and `--threads 1`
runs are reproducible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .cost import cosine_similarity
from .embio import EmbeddingMatrix
from .errors import DimMismatch, KOutOfRange
from .sinkhorn import Coupling

DEFAULT_K = 4

# Below this total top-k coupling mass a row cannot be renormalized
# meaningfully; it falls back to cosine kNN and is flagged in the result.
DEGENERATE_ROW_MASS = 1e-30


class MappingMethod(enum.Enum):
    KNN = "knn"
    OT_AVE = "ot-ave"
    OT_BAR = "ot-bar"


@dataclass(frozen=True)
class MappingResult:
    """Mapped embeddings plus per-row provenance.

    ``support_indices[i]`` lists the k targets used for source row i in
    descending weight order; ``support_weights[i]`` are the convex weights
    applied to them.  ``fallback_rows`` names rows whose coupling mass
    underflowed and were mapped by cosine kNN instead.
    """

    mapped: EmbeddingMatrix
    support_indices: np.ndarray
    support_weights: np.ndarray
    method: MappingMethod
    k: int
    fallback_rows: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        idx = np.ascontiguousarray(self.support_indices, dtype=np.int64)
        w = np.ascontiguousarray(self.support_weights, dtype=np.float64)
        m = self.mapped.rows
        if idx.shape != (m, self.k) or w.shape != (m, self.k):
            raise DimMismatch(
                f"support arrays must be {(m, self.k)}, got {idx.shape} and {w.shape}"
            )
        if (w < 0).any():
            raise ValueError("support weights must be non-negative")
        if np.abs(w.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("support weights must sum to 1 per row")
        if self.k > 1 and not (np.diff(np.sort(idx, axis=1), axis=1) > 0).all():
            bad = int(np.argmin((np.diff(np.sort(idx, axis=1), axis=1) > 0).all(axis=1)))
            raise ValueError(f"support indices in row {bad} are not distinct")
        idx.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "support_indices", idx)
        object.__setattr__(self, "support_weights", w)


def top_k_rows(scores: np.ndarray, k: int) -> np.ndarray:
    """Per-row indices of the k largest scores, descending, ties to the
    smaller index.  Returns an (M, k) int64 array."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise DimMismatch(f"scores must be 2-D, got ndim={scores.ndim}")
    n = scores.shape[1]
    if not 1 <= k <= n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    # Stable sort of the negated scores: descending values, ties keep the
    # original (smaller) index first.
    return np.argsort(-scores, axis=1, kind="stable")[:, :k]


def knn_map(x: EmbeddingMatrix, y: EmbeddingMatrix, k: int = DEFAULT_K) -> MappingResult:
    """k-nearest-neighbor regression: mean of the k most cosine-similar targets."""
    sims = cosine_similarity(x, y)  # raises DimMismatch on dim conflict
    idx = top_k_rows(sims, k)
    weights = np.full(idx.shape, 1.0 / k)
    mapped = _combine(idx, weights, y)
    return MappingResult(mapped, idx, weights, MappingMethod.KNN, k)


def ot_ave_map(
    coupling: Coupling, x: EmbeddingMatrix, y: EmbeddingMatrix, k: int = DEFAULT_K
) -> MappingResult:
    """Unweighted mean over the k targets with largest coupling weight."""
    _check_shapes(coupling, x, y)
    idx = top_k_rows(coupling.gamma, k)
    weights = np.full(idx.shape, 1.0 / k)
    mapped = _combine(idx, weights, y)
    return MappingResult(mapped, idx, weights, MappingMethod.OT_AVE, k)


def ot_bar_map(
    coupling: Coupling, x: EmbeddingMatrix, y: EmbeddingMatrix, k: int = DEFAULT_K
) -> MappingResult:
    """Barycentric projection restricted to the top-k coupling entries.

    Row weights are gamma sorted descending and renormalized over the k
    kept entries; with k = N this reproduces gamma_ij / p_i exactly.
    """
    _check_shapes(coupling, x, y)
    idx = top_k_rows(coupling.gamma, k)
    raw = np.take_along_axis(coupling.gamma, idx, axis=1)
    mass = raw.sum(axis=1)
    degenerate = mass < DEGENERATE_ROW_MASS
    fallback: tuple[int, ...] = ()
    if degenerate.any():
        fallback = tuple(int(i) for i in np.flatnonzero(degenerate))
        sims = cosine_similarity(x, y)
        knn_idx = top_k_rows(sims, k)
        idx[degenerate] = knn_idx[degenerate]
        raw[degenerate] = 1.0
        mass[degenerate] = float(k)
    weights = raw / mass[:, None]
    mapped = _combine(idx, weights, y)
    return MappingResult(mapped, idx, weights, MappingMethod.OT_BAR, k, fallback)


def _check_shapes(coupling: Coupling, x: EmbeddingMatrix, y: EmbeddingMatrix) -> None:
    if x.dims != y.dims:
        raise DimMismatch(f"embedding dims differ: {x.dims} vs {y.dims}")
    if coupling.shape != (x.rows, y.rows):
        raise DimMismatch(
            f"coupling is {coupling.shape}, expected {(x.rows, y.rows)}"
        )


def _combine(idx: np.ndarray, weights: np.ndarray, y: EmbeddingMatrix) -> EmbeddingMatrix:
    # Scatter the per-row weights into a dense M x N matrix and take one
    # matrix product: every row is then reduced in the same column order,
    # so identical weight rows give bit-identical mapped rows.
    m = idx.shape[0]
    dense = np.zeros((m, y.rows))
    np.put_along_axis(dense, idx, weights, axis=1)
    mapped = dense @ y.data.astype(np.float64)
    return EmbeddingMatrix(mapped.astype(np.float32))
