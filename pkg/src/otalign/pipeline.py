"""End-to-end conversion and ablation sweeps over (method, k) grids.

One coupling is solved per (cost kind, epsilon, tol, max_iter, input
digests) and reused across methods and k values; a small in-process cache
makes repeated `convert` calls hit the same plan.
"""

from __future__ import annotations

import hashlib
import json
import time
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .cost import CostKind, CostMatrix, cosine_cost, squared_euclidean_cost
from .embio import EmbeddingMatrix, load_embeddings, save_embeddings
from .errors import ConfigError, DimMismatch, KOutOfRange
from .frechet import frechet_distance, gaussian_stats
from .mapping import (
    DEFAULT_K,
    MappingMethod,
    MappingResult,
    knn_map,
    ot_ave_map,
    ot_bar_map,
)
from .sinkhorn import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    Coupling,
    Marginals,
    solve_entropic,
    transport_cost,
)

METHOD_NAMES = tuple(m.value for m in MappingMethod)
COST_NAMES = tuple(c.value for c in CostKind)

_COUPLING_CACHE_SIZE = 4
_coupling_cache: "OrderedDict[tuple, Coupling]" = OrderedDict()


@dataclass
class ConvertConfig:
    """Everything `convert` needs; flag names on the CLI mirror these fields."""

    source: Path
    target: Path
    output: Path
    method: str
    k: int = DEFAULT_K
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    cost: str = "cosine"
    report: Path | None = None
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.method not in METHOD_NAMES:
            raise ConfigError(f"method must be one of {METHOD_NAMES}, got {self.method!r}")
        if self.cost not in COST_NAMES:
            raise ConfigError(f"cost must be one of {COST_NAMES}, got {self.cost!r}")
        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")


@dataclass
class SweepRecord:
    """One (method, k) entry of a sweep report."""

    method: str
    k: int
    skipped: bool = False
    reason: str | None = None
    transport_cost: float | None = None
    iterations: int | None = None
    marginal_error: float | None = None
    frechet: float | None = None
    wall_time_s: float | None = None


@dataclass
class SweepReport:
    records: list[SweepRecord] = field(default_factory=list)

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for rec in self.records:
                fh.write(json.dumps(_drop_none(asdict(rec))) + "\n")

    def write_csv(self, path: str | Path) -> None:
        cols = [
            "method", "k", "skipped", "reason", "transport_cost",
            "iterations", "marginal_error", "frechet", "wall_time_s",
        ]
        with open(path, "w", encoding="ascii") as fh:
            fh.write(",".join(cols) + "\n")
            for rec in self.records:
                row = asdict(rec)
                fh.write(",".join("" if row[c] is None else str(row[c]) for c in cols) + "\n")


def convert(cfg: ConvertConfig) -> MappingResult:
    """Load source/target embeddings, map, and persist the mapped matrix.

    A JSON report with solver diagnostics is written when ``cfg.report``
    is set.  Deterministic: identical config and inputs give bit-identical
    output files in single-threaded mode.
    """
    x = load_embeddings(cfg.source)
    y = load_embeddings(cfg.target)
    if x.dims != y.dims:
        raise DimMismatch(f"source dims {x.dims} != target dims {y.dims}")

    report: dict = {
        "method": cfg.method,
        "k": cfg.k,
        "cost": cfg.cost,
        "source_rows": x.rows,
        "target_rows": y.rows,
        "dims": x.dims,
    }
    start = time.perf_counter()
    with _thread_limit(cfg.threads):
        if cfg.method == MappingMethod.KNN.value:
            result = knn_map(x, y, cfg.k)
            # Solver flags are accepted with knn but have no effect.
            report["unused_params"] = ["epsilon", "tol", "max_iter"]
        else:
            coupling, cost_mat = _coupling_for(x, y, cfg)
            if cfg.method == MappingMethod.OT_AVE.value:
                result = ot_ave_map(coupling, x, y, cfg.k)
            else:
                result = ot_bar_map(coupling, x, y, cfg.k)
            report.update(
                epsilon=cfg.epsilon,
                tol=cfg.tol,
                max_iter=cfg.max_iter,
                iterations=coupling.iterations,
                marginal_error=coupling.marginal_error,
                transport_cost=transport_cost(coupling, cost_mat),
            )
    report["wall_time_s"] = time.perf_counter() - start
    if result.fallback_rows:
        report["fallback_rows"] = list(result.fallback_rows)

    save_embeddings(result.mapped, cfg.output)
    if cfg.report is not None:
        Path(cfg.report).write_text(json.dumps(report, indent=2) + "\n", encoding="ascii")
    return result


def sweep(
    cfg: ConvertConfig,
    methods: Sequence[str],
    ks: Sequence[int],
) -> SweepReport:
    """Run every (method, k) pair and report alignment quality.

    The coupling is solved once per (cost, epsilon) and shared across OT
    methods and k values.  A k larger than the target size marks the entry
    skipped instead of failing the sweep.
    """
    for m in methods:
        if m not in METHOD_NAMES:
            raise ConfigError(f"unknown method {m!r}")
    x = load_embeddings(cfg.source)
    y = load_embeddings(cfg.target)
    if x.dims != y.dims:
        raise DimMismatch(f"source dims {x.dims} != target dims {y.dims}")

    target_stats = gaussian_stats(y)
    report = SweepReport()
    coupling: Coupling | None = None
    cost_mat: CostMatrix | None = None
    with _thread_limit(cfg.threads):
        if any(m != MappingMethod.KNN.value for m in methods):
            coupling, cost_mat = _coupling_for(x, y, cfg)
        for method in methods:
            for k in ks:
                rec = SweepRecord(method=method, k=int(k))
                if not 1 <= k <= y.rows:
                    rec.skipped = True
                    rec.reason = f"k={k} outside [1, {y.rows}]"
                    report.records.append(rec)
                    continue
                begin = time.perf_counter()
                if method == MappingMethod.KNN.value:
                    result = knn_map(x, y, k)
                else:
                    assert coupling is not None and cost_mat is not None
                    if method == MappingMethod.OT_AVE.value:
                        result = ot_ave_map(coupling, x, y, k)
                    else:
                        result = ot_bar_map(coupling, x, y, k)
                    rec.transport_cost = transport_cost(coupling, cost_mat)
                    rec.iterations = coupling.iterations
                    rec.marginal_error = coupling.marginal_error
                rec.frechet = frechet_distance(gaussian_stats(result.mapped), target_stats)
                rec.wall_time_s = time.perf_counter() - begin
                report.records.append(rec)
    return report


def export_plan(cfg: ConvertConfig) -> Path:
    """Solve the coupling for ``cfg`` and write it to ``cfg.output`` as an
    EMB1 matrix (M rows by N columns)."""
    x = load_embeddings(cfg.source)
    y = load_embeddings(cfg.target)
    if x.dims != y.dims:
        raise DimMismatch(f"source dims {x.dims} != target dims {y.dims}")
    with _thread_limit(cfg.threads):
        coupling, _ = _coupling_for(x, y, cfg)
    save_embeddings(EmbeddingMatrix(coupling.gamma.astype(np.float32)), cfg.output)
    return Path(cfg.output)


def clear_coupling_cache() -> None:
    _coupling_cache.clear()


def _coupling_for(
    x: EmbeddingMatrix, y: EmbeddingMatrix, cfg: ConvertConfig
) -> tuple[Coupling, CostMatrix]:
    if cfg.cost == CostKind.COSINE_DISTANCE.value:
        cost_mat = cosine_cost(x, y)
    else:
        cost_mat = squared_euclidean_cost(x, y)
    key = (
        cfg.cost,
        float(cfg.epsilon),
        float(cfg.tol),
        int(cfg.max_iter),
        _digest(x),
        _digest(y),
    )
    cached = _coupling_cache.get(key)
    if cached is not None:
        _coupling_cache.move_to_end(key)
        return cached, cost_mat
    coupling = solve_entropic(
        cost_mat,
        Marginals.uniform(x.rows, y.rows),
        epsilon=cfg.epsilon,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
    )
    _coupling_cache[key] = coupling
    while len(_coupling_cache) > _COUPLING_CACHE_SIZE:
        _coupling_cache.popitem(last=False)
    return coupling, cost_mat


def _digest(m: EmbeddingMatrix) -> str:
    h = hashlib.sha256()
    h.update(str(m.data.shape).encode())
    h.update(m.data.tobytes())
    return h.hexdigest()


@contextmanager
def _thread_limit(threads: int | None) -> Iterator[None]:
    if threads is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # BLAS pool left as-is; numpy elementwise ops are single-threaded anyway
        yield
        return
    with threadpool_limits(limits=threads):
        yield


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}
