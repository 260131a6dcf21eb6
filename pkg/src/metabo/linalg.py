"""Symmetric positive (semi)definite solves with a fixed jitter ladder."""

from __future__ import annotations

import numpy as np
import scipy.linalg

JITTER_START = 1e-8
JITTER_STOP = 1e-2


class JitterError(np.linalg.LinAlgError):
    """Raised when a matrix stays non-factorizable after the full jitter ladder."""


def jitter_ladder(matrix: np.ndarray):
    """Yield the diagonal increments tried after a failed factorization.

    Increments start at ``1e-8 * trace / n`` and grow by 10x up to
    ``1e-2 * trace / n``.
    """
    n = matrix.shape[0]
    scale = float(np.trace(matrix)) / n if n else 0.0
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    level = JITTER_START
    while level <= JITTER_STOP * (1 + 1e-9):
        yield level * scale
        level *= 10.0


def safe_cholesky(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix, jittering on failure."""
    matrix = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(matrix.shape[0])
    for jitter in jitter_ladder(matrix):
        try:
            return np.linalg.cholesky(matrix + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise JitterError(f"{what} is singular or indefinite despite jitter")


def chol_solve(factor: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return scipy.linalg.cho_solve((factor, True), rhs, check_finite=False)


def spd_solve(matrix: np.ndarray, rhs: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Solve ``matrix @ x = rhs`` for symmetric PSD ``matrix``."""
    return chol_solve(safe_cholesky(matrix, what), rhs)


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def is_psd(matrix: np.ndarray, rel_tol: float = 1e-8) -> bool:
    """PSD check with tolerance ``rel_tol * trace / n`` on the smallest eigenvalue."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if n == 0:
        return True
    tol = rel_tol * max(float(np.trace(matrix)) / n, 0.0)
    return float(np.linalg.eigvalsh(symmetrize(matrix)).min()) >= -tol - 1e-300
