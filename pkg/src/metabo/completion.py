"""Low-rank completion of a partially observed offline matrix (soft-impute)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .prior_discrete import OfflineMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompletionConfig:
    """Soft-impute settings.

    ``shrink`` is the singular-value soft threshold; ``shrink=0`` gives
    plain rank-``max_rank`` hard impute.
    """

    max_rank: int = 10
    shrink: float = 0.0
    max_iters: int = 5000
    tol: float = 1e-9

    def __post_init__(self):
        if self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        if self.shrink < 0:
            raise ValueError("shrink must be nonnegative")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class CompletionTrace:
    objective: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def completion_objective(values: np.ndarray, mask: np.ndarray, estimate: np.ndarray,
                         shrink: float) -> float:
    """Masked squared error plus ``shrink`` times the nuclear norm of ``estimate``."""
    resid = np.where(mask, values - estimate, 0.0)
    nuclear = np.linalg.svd(estimate, compute_uv=False).sum() if shrink > 0 else 0.0
    return 0.5 * float(np.sum(resid * resid)) + shrink * float(nuclear)


def _check_sample_complexity(mask: np.ndarray, rank: int) -> None:
    n = mask.shape[0]
    needed = rank * n ** 1.2 * math.log(max(n, 2))
    observed = int(mask.sum())
    if observed < needed:
        log.warning(
            "only %d observed entries; exact recovery at rank %d typically needs about %.0f",
            observed, rank, needed,
        )


def complete_matrix(data: OfflineMatrix, cfg: CompletionConfig | None = None,
                    trace: CompletionTrace | None = None) -> OfflineMatrix:
    """Fill masked entries by iterative rank-capped SVD soft-thresholding.

    Observed entries are returned unchanged. Iteration stops once the
    relative change of the low-rank estimate drops below ``cfg.tol`` or
    after ``cfg.max_iters`` sweeps.
    """
    cfg = cfg or CompletionConfig()
    mask = data.mask
    if mask.all():
        return OfflineMatrix(data.values, mask, data.noise_sd_hint)
    if not mask.any(axis=1).all() or not mask.any(axis=0).all():
        raise ValueError("unrecoverable row/column: every row and column needs an observation")
    rank = min(cfg.max_rank, *mask.shape)
    _check_sample_complexity(mask, rank)

    observed = np.where(mask, data.values, 0.0)
    col_means = observed.sum(axis=0) / mask.sum(axis=0)
    estimate = np.where(mask, data.values, col_means[None, :])
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        filled = np.where(mask, data.values, estimate)
        u, s, vt = np.linalg.svd(filled, full_matrices=False)
        s = np.maximum(s[:rank] - cfg.shrink, 0.0)
        new = (u[:, :rank] * s) @ vt[:rank]
        change = float(np.linalg.norm(new - estimate)) / max(float(np.linalg.norm(estimate)), 1e-300)
        estimate = new
        if trace is not None:
            trace.objective.append(completion_objective(data.values, mask, estimate, cfg.shrink))
        if change < cfg.tol:
            converged = True
            break
    if trace is not None:
        trace.iterations = it
        trace.converged = converged
    if not converged:
        log.info("soft-impute stopped after %d iterations without reaching tol", it)
    completed = np.where(mask, data.values, estimate)
    return OfflineMatrix(completed, np.ones_like(mask), data.noise_sd_hint)
