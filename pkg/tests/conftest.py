"""Shared test fixtures and instance generators."""

from __future__ import annotations

import numpy as np

from otalign import EmbeddingMatrix


def two_cloud_instance(
    seed: int,
    m: int = 500,
    n: int = 500,
    d: int = 16,
    offset: float = 3.0,
) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    """Two Gaussian clouds whose centers differ by ``offset`` along the base
    direction.

    The clouds have a 3-dimensional unit-variance active subspace and
    0.1-sigma tails (low intrinsic dimension, like real embedding clouds),
    sit at radius 4 from the origin so cosine costs are informative, and the
    offset length equals ``offset`` times the active-direction sigma of 1.
    """
    rng = np.random.default_rng(seed)
    scales = np.full(d, 0.1)
    scales[:3] = 1.0
    base = 4.0 * np.ones(d) / np.sqrt(d)
    shift = offset * base / np.linalg.norm(base)
    src = base + shift + scales * rng.normal(size=(m, d))
    tgt = base + scales * rng.normal(size=(n, d))
    return (
        EmbeddingMatrix(src.astype(np.float32)),
        EmbeddingMatrix(tgt.astype(np.float32)),
    )


def random_unit_rows(rng: np.random.Generator, rows: int, dims: int) -> EmbeddingMatrix:
    """Matrix of unit-norm rows drawn from an isotropic Gaussian."""
    v = rng.normal(size=(rows, dims))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return EmbeddingMatrix(v.astype(np.float32))
