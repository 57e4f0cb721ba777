"""Discrete entropic optimal transport for embedding-set alignment."""

from .cost import CostKind, CostMatrix, cosine_cost, cosine_similarity, squared_euclidean_cost
from .embio import (
    EmbeddingMatrix,
    load_csv,
    load_embeddings,
    save_csv,
    save_embeddings,
)
from .frechet import GaussianStats, frechet_distance, gaussian_stats, psd_sqrt_product_trace
from .mapping import (
    MappingMethod,
    MappingResult,
    knn_map,
    ot_ave_map,
    ot_bar_map,
    top_k_rows,
)
from .pipeline import ConvertConfig, SweepRecord, SweepReport, convert, export_plan, sweep
from .sinkhorn import (
    Coupling,
    Marginals,
    exact_small_ot,
    solve_entropic,
    transport_cost,
)

__version__ = "0.1.0"

__all__ = [
    "CostKind",
    "CostMatrix",
    "cosine_cost",
    "cosine_similarity",
    "squared_euclidean_cost",
    "EmbeddingMatrix",
    "load_csv",
    "load_embeddings",
    "save_csv",
    "save_embeddings",
    "GaussianStats",
    "frechet_distance",
    "gaussian_stats",
    "psd_sqrt_product_trace",
    "MappingMethod",
    "MappingResult",
    "knn_map",
    "ot_ave_map",
    "ot_bar_map",
    "top_k_rows",
    "ConvertConfig",
    "SweepRecord",
    "SweepReport",
    "convert",
    "export_plan",
    "sweep",
    "Coupling",
    "Marginals",
    "exact_small_ot",
    "solve_entropic",
    "transport_cost",
]
