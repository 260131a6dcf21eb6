"""Prior and posterior estimators for a finite candidate set.

The prior is estimated by the sample mean and (N-1)-denominator sample
covariance of the offline observation matrix. The posterior estimator
conditions that estimate on the online data *without* a noise term and
inflates the Schur complement by ``(N-1)/(N-t-1)``; the observation noise
is already folded into the sample covariance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gp_core import History
from .linalg import chol_solve, safe_cholesky, symmetrize


@dataclass(frozen=True)
class OfflineMatrix:
    """N x M offline observations with a presence mask.

    Entries where ``mask`` is False are missing and must never be read.
    """

    values: np.ndarray
    mask: np.ndarray
    noise_sd_hint: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        mask = np.ones(values.shape, dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValueError("mask shape must match values")
        values[~mask] = np.nan
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask.copy())

    @classmethod
    def complete(cls, values, noise_sd_hint: float | None = None) -> "OfflineMatrix":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool), noise_sd_hint)

    @property
    def n_tasks(self) -> int:
        return self.values.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.values.shape[1]

    @property
    def is_complete(self) -> bool:
        return bool(self.mask.all())

    def subset_tasks(self, rows) -> "OfflineMatrix":
        rows = np.asarray(rows)
        return OfflineMatrix(self.values[rows], self.mask[rows], self.noise_sd_hint)


@dataclass(frozen=True)
class DiscretePriorEstimate:
    mean_hat: np.ndarray
    cov_hat: np.ndarray
    n_train: int

    @property
    def size(self) -> int:
        return self.mean_hat.size


@dataclass(frozen=True)
class PosteriorEstimate:
    mean_hat_t: np.ndarray
    var_hat_t: np.ndarray
    t: int
    cov_hat_t: np.ndarray | None = None


def estimate_prior_discrete(data: OfflineMatrix) -> DiscretePriorEstimate:
    """Sample mean and unbiased sample covariance of the rows of ``data``."""
    if not data.is_complete:
        raise ValueError("offline matrix has missing entries; run complete_matrix first")
    n = data.n_tasks
    if n < 2:
        raise ValueError("insufficient tasks: need N >= 2")
    y = data.values
    mean_hat = y.mean(axis=0)
    centered = y - mean_hat[None, :]
    cov_hat = symmetrize(centered.T @ centered / (n - 1))
    return DiscretePriorEstimate(mean_hat, cov_hat, n)


def _checked_indices(history: History, size: int) -> np.ndarray:
    idx = history.indices()
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise IndexError("history index outside candidate set")
    if np.unique(idx).size != idx.size:
        raise ValueError("repeated query index: the conditioning matrix would be singular")
    return idx


def estimate_posterior_discrete(prior: DiscretePriorEstimate, history: History,
                                full_cov: bool = False) -> PosteriorEstimate:
    """Unbiased estimates of the posterior mean and variance at every candidate.

    Parameters
    ----------
    prior : DiscretePriorEstimate
    history : History
        Distinct candidate indices and their noisy observations.
    full_cov : bool
        Also return the full inflated Schur complement.
    """
    t = len(history)
    n = prior.n_train
    if t > n - 2:
        raise ValueError(f"training set too small: t={t} needs N >= t + 2 (N={n})")
    if t == 0:
        return PosteriorEstimate(
            prior.mean_hat.copy(),
            np.diag(prior.cov_hat).copy(),
            0,
            prior.cov_hat.copy() if full_cov else None,
        )
    idx = _checked_indices(history, prior.size)
    y = history.y()
    cross = prior.cov_hat[:, idx]
    factor = safe_cholesky(prior.cov_hat[np.ix_(idx, idx)], "estimated covariance at queries")
    mean_t = prior.mean_hat + cross @ chol_solve(factor, y - prior.mean_hat[idx])
    gain = chol_solve(factor, cross.T)  # (t, M)
    inflate = (n - 1) / (n - t - 1)
    var_t = inflate * (np.diag(prior.cov_hat) - np.einsum("mt,tm->m", cross, gain))
    # the Schur complement vanishes on the conditioning set
    var_t[idx] = 0.0
    mean_t[idx] = y
    cov_t = None
    if full_cov:
        cov_t = inflate * symmetrize(prior.cov_hat - cross @ gain)
        cov_t[idx, :] = 0.0
        cov_t[:, idx] = 0.0
    return PosteriorEstimate(mean_t, var_t, t, cov_t)


def concentration_constants(n: int, t: int, delta: float) -> tuple[float, float]:
    """Constants ``(a_t, b_t)`` of the estimator concentration bounds.

    With probability at least ``1 - delta`` both
    ``|mu_hat_t - mu_t|^2 < a_t (k_t + s^2)`` and
    ``1 - 2 sqrt(b_t) < k_hat_t / (k_t + s^2) < 1 + 2 sqrt(b_t) + 2 b_t``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if n <= t + 2:
        raise ValueError(f"need N >= t + 3 (N={n}, t={t})")
    log_term = math.log(4.0 / delta)
    a_t = 4.0 * (n - 2 + t + 2.0 * math.sqrt(t * log_term) + 2.0 * log_term) / (delta * n * (n - t - 2))
    b_t = log_term / (n - t - 1)
    return a_t, b_t


def kt_ratio_bounds(b_t: float) -> tuple[float, float]:
    """Lower and upper bounds on ``k_hat_t / (k_t + s^2)`` for a given ``b_t``."""
    root = math.sqrt(b_t)
    return 1.0 - 2.0 * root, 1.0 + 2.0 * root + 2.0 * b_t


# ----------------------------------------------------------------------------
# CSV: header ``task_id,input_index,y``; a missing row means a masked entry.

DISCRETE_HEADER = ("task_id", "input_index", "y")


def write_offline_csv(data: OfflineMatrix, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DISCRETE_HEADER)
        rows, cols = np.nonzero(data.mask)
        for i, j in zip(rows, cols):
            writer.writerow((int(i), int(j), repr(float(data.values[i, j]))))


def read_offline_csv(path, n_tasks: int | None = None, n_inputs: int | None = None) -> OfflineMatrix:
    """Load an offline matrix; absent (task, input) pairs become masked entries."""
    entries = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DISCRETE_HEADER:
            raise ValueError(f"expected header {','.join(DISCRETE_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"line {line_no}: expected 3 fields")
            entries.append((int(row[0]), int(row[1]), float(row[2])))
    if not entries:
        raise ValueError("no observations in file")
    tasks = np.array([e[0] for e in entries])
    inputs = np.array([e[1] for e in entries])
    n = int(tasks.max()) + 1 if n_tasks is None else n_tasks
    m = int(inputs.max()) + 1 if n_inputs is None else n_inputs
    if tasks.min() < 0 or inputs.min() < 0 or tasks.max() >= n or inputs.max() >= m:
        raise ValueError("task_id or input_index out of range")
    values = np.full((n, m), np.nan)
    mask = np.zeros((n, m), dtype=bool)
    for i, j, y in entries:
        if mask[i, j]:
            raise ValueError(f"duplicate entry for task {i}, input {j}")
        values[i, j] = y
        mask[i, j] = True
    return OfflineMatrix(values, mask)
