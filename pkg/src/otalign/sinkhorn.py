"""Entropic optimal transport on discrete distributions.

:func:`solve_entropic` runs log-domain Sinkhorn iterations (stabilized dual
potentials), so small regularization strengths do not underflow the way the
kernel-scaling form exp(-C/eps) does.  :func:`exact_small_ot` enumerates
permutations on small uniform square instances and serves as an independent
correctness oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cost import CostMatrix
from .errors import DimMismatch, NonUniformMarginals, TooLarge

DEFAULT_EPSILON = 0.1
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10000

EXACT_MAX_N = 8

# Warm-start schedule: the regularization is walked down geometrically from
# the cost scale to the requested epsilon, each stage re-using the previous
# dual potentials.  A cold start at epsilon << max(C) crawls through a long
# sublinear transient; the warm start removes it without changing the fixed
# point.
_STAGE_FACTOR = 0.5
_STAGE_TOL = 1e-4
_STAGE_CAP = 200


@dataclass(frozen=True)
class Marginals:
    """Source and target probability weights (p over M rows, q over N)."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        q = np.ascontiguousarray(self.q, dtype=np.float64)
        for name, w in (("p", p), ("q", q)):
            if w.ndim != 1 or w.size < 1:
                raise ValueError(f"marginal {name} must be a non-empty 1-D vector")
            if (w <= 0).any():
                raise ValueError(f"marginal {name} has non-positive weights")
            if abs(w.sum() - 1.0) > 1e-9:
                raise ValueError(f"marginal {name} sums to {w.sum()!r}, expected 1")
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @staticmethod
    def uniform(m: int, n: int) -> "Marginals":
        """Empirical weights 1/M and 1/N."""
        return Marginals(np.full(m, 1.0 / m), np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Coupling:
    """Non-negative transport plan with solver diagnostics.

    ``marginal_error`` is the max absolute row/column-sum violation at
    termination; callers decide whether a non-converged plan is usable.
    """

    gamma: np.ndarray
    epsilon: float
    iterations: int
    marginal_error: float

    def __post_init__(self) -> None:
        g = np.ascontiguousarray(self.gamma, dtype=np.float64)
        if g.ndim != 2:
            raise DimMismatch(f"coupling must be 2-D, got ndim={g.ndim}")
        if not np.isfinite(g).all():
            raise ValueError("coupling contains non-finite entries")
        if (g < 0).any():
            raise ValueError("coupling contains negative entries")
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gamma.shape


def solve_entropic(
    cost: CostMatrix,
    marg: Marginals,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> Coupling:
    """Minimize <gamma, C> + eps * sum gamma_ij (log gamma_ij - 1) s.t. marginals.

    Alternates exact dual-potential updates in the log domain, warm-started
    through a geometric epsilon schedule, and stops when the L-inf violation
    of both marginals drops to ``tol`` or ``max_iter`` total iterations pass.
    Non-convergence is not an error: the plan is returned with its achieved
    ``marginal_error`` and iteration count.
    """
    m, n = cost.shape
    if marg.p.shape[0] != m or marg.q.shape[0] != n:
        raise DimMismatch(
            f"cost is {m}x{n} but marginals have lengths {marg.p.shape[0]}, {marg.q.shape[0]}"
        )
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")

    logp = np.log(marg.p)
    logq = np.log(marg.q)

    stages = []
    e = float(cost.data.max())
    while e > epsilon * (1.0 + 1e-12):
        stages.append(e)
        e *= _STAGE_FACTOR
    stages.append(epsilon)

    # Unscaled dual potentials f, g; each stage works with phi = f/eps_s,
    # psi = g/eps_s so the exp/log arithmetic never under- or overflows.
    f = np.zeros(m)
    g = np.zeros(n)
    gamma = np.zeros((m, n))
    total = 0
    err = np.inf
    for eps_s in stages:
        final = eps_s == epsilon
        stage_tol = tol if final else max(tol, _STAGE_TOL)
        budget = max_iter - total if final else min(_STAGE_CAP, max_iter - total)
        if budget <= 0:
            break
        scaled_cost = cost.data / eps_s
        phi = f / eps_s
        psi = g / eps_s
        for _ in range(budget):
            phi = logp - _logsumexp_rows(psi[None, :] - scaled_cost)
            psi = logq - _logsumexp_cols(phi[:, None] - scaled_cost)
            total += 1
            np.exp(phi[:, None] + psi[None, :] - scaled_cost, out=gamma)
            row_err = np.abs(gamma.sum(axis=1) - marg.p).max()
            col_err = np.abs(gamma.sum(axis=0) - marg.q).max()
            err = max(row_err, col_err)
            if err <= stage_tol:
                break
        f = phi * eps_s
        g = psi * eps_s
        if final or total >= max_iter:
            break
    return Coupling(gamma, epsilon=epsilon, iterations=total, marginal_error=float(err))


def exact_small_ot(cost: CostMatrix, marg: Marginals) -> Coupling:
    """Exact OT for uniform square instances by permutation enumeration.

    On the Birkhoff polytope with uniform marginals an optimal plan is a
    permutation matrix scaled by 1/N, so enumerating all N! permutations is
    a complete search.  Ties break toward the lexicographically smallest
    permutation.  Restricted to N <= 8.
    """
    m, n = cost.shape
    if m != n:
        raise NonUniformMarginals(f"exact solver needs a square instance, got {m}x{n}")
    if n > EXACT_MAX_N:
        raise TooLarge(f"exact solver enumerates at most {EXACT_MAX_N}! plans, got N={n}")
    if marg.p.shape[0] != m or marg.q.shape[0] != n:
        raise DimMismatch("marginal lengths do not match the cost matrix")
    uniform = 1.0 / n
    if np.abs(marg.p - uniform).max() > 1e-9 or np.abs(marg.q - uniform).max() > 1e-9:
        raise NonUniformMarginals("exact solver requires uniform 1/N marginals")

    c = cost.data
    rows = np.arange(n)
    best_perm: tuple[int, ...] | None = None
    best_sum = np.inf
    for perm in itertools.permutations(range(n)):
        s = c[rows, perm].sum()
        if s < best_sum:
            best_sum = s
            best_perm = perm
    assert best_perm is not None
    gamma = np.zeros((n, n))
    gamma[rows, best_perm] = uniform
    return Coupling(gamma, epsilon=0.0, iterations=0, marginal_error=0.0)


def transport_cost(coupling: Coupling, cost: CostMatrix) -> float:
    """Total plan cost sum_ij gamma_ij * C_ij, accumulated in float64."""
    if coupling.shape != cost.shape:
        raise DimMismatch(f"coupling {coupling.shape} vs cost {cost.shape}")
    return float(np.sum(coupling.gamma * cost.data))


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    amax = a.max(axis=1)
    return amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))


def _logsumexp_cols(a: np.ndarray) -> np.ndarray:
    amax = a.max(axis=0)
    return amax + np.log(np.exp(a - amax[None, :]).sum(axis=0))
