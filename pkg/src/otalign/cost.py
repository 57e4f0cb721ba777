"""Pairwise transport-cost matrices between two embedding sets.

Dot products and norms are accumulated in double precision regardless of
storage precision; at D ~ 1000 a float32 reduction loses too many digits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .embio import EmbeddingMatrix
from .errors import DimMismatch

# Rows with norm below this are treated as direction-free (silence frames);
# their cosine similarity is defined as 0, i.e. cost 1.
ZERO_NORM_EPS = 1e-12


class CostKind(enum.Enum):
    COSINE_DISTANCE = "cosine"
    SQUARED_EUCLIDEAN = "sqeuclidean"


@dataclass(frozen=True)
class CostMatrix:
    """M x N matrix of non-negative transport costs, float64."""

    data: np.ndarray
    kind: CostKind

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimMismatch(f"cost matrix must be 2-D, got ndim={arr.ndim}")
        if not np.isfinite(arr).all():
            raise ValueError("cost matrix contains non-finite entries")
        if (arr < 0).any():
            raise ValueError("cost matrix contains negative entries")
        if self.kind is CostKind.COSINE_DISTANCE and (arr > 2).any():
            raise ValueError("cosine distance entries must lie in [0, 2]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


def cosine_similarity(x: EmbeddingMatrix, y: EmbeddingMatrix) -> np.ndarray:
    """Pairwise cosine similarity, clamped to [-1, 1], float64 (M, N).

    Zero-norm rows on either side get similarity 0 against everything.
    """
    if x.dims != y.dims:
        raise DimMismatch(f"embedding dims differ: {x.dims} vs {y.dims}")
    xs = x.data.astype(np.float64)
    ys = y.data.astype(np.float64)
    xn = np.linalg.norm(xs, axis=1)
    yn = np.linalg.norm(ys, axis=1)
    xs = np.where(xn[:, None] < ZERO_NORM_EPS, 0.0, xs / np.maximum(xn, ZERO_NORM_EPS)[:, None])
    ys = np.where(yn[:, None] < ZERO_NORM_EPS, 0.0, ys / np.maximum(yn, ZERO_NORM_EPS)[:, None])
    sims = xs @ ys.T
    np.clip(sims, -1.0, 1.0, out=sims)
    return sims


def cosine_cost(x: EmbeddingMatrix, y: EmbeddingMatrix) -> CostMatrix:
    """Cost matrix with entries 1 - cos(x_i, y_j), in [0, 2]."""
    cost = 1.0 - cosine_similarity(x, y)
    np.clip(cost, 0.0, 2.0, out=cost)
    return CostMatrix(cost, CostKind.COSINE_DISTANCE)


def squared_euclidean_cost(x: EmbeddingMatrix, y: EmbeddingMatrix) -> CostMatrix:
    """Cost matrix with entries ||x_i - y_j||^2."""
    if x.dims != y.dims:
        raise DimMismatch(f"embedding dims differ: {x.dims} vs {y.dims}")
    xs = x.data.astype(np.float64)
    ys = y.data.astype(np.float64)
    sq = (
        np.sum(xs * xs, axis=1)[:, None]
        + np.sum(ys * ys, axis=1)[None, :]
        - 2.0 * (xs @ ys.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    return CostMatrix(sq, CostKind.SQUARED_EUCLIDEAN)
