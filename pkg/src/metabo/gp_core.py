"""Ground-truth Gaussian-process machinery over a finite candidate set.

Everything here assumes the prior (mean, kernel, noise) is *known*; it is
the reference that the estimators in :mod:`metabo.prior_discrete` and
:mod:`metabo.prior_continuous` are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .linalg import JitterError, chol_solve, is_psd, safe_cholesky, symmetrize
from .seeding import as_rng


@dataclass(frozen=True)
class GpPrior:
    """A GP restricted to a finite candidate set.

    Parameters
    ----------
    mean : (M,) array
        Prior mean at each candidate.
    cov : (M, M) array
        Prior covariance between candidates.
    noise_sd : float
        Observation noise standard deviation.
    """

    mean: np.ndarray
    cov: np.ndarray
    noise_sd: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(cov).max(initial=0.0))):
            raise ValueError("cov must be symmetric")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", symmetrize(cov))

    @property
    def size(self) -> int:
        return self.mean.size

    def validate(self) -> None:
        if not is_psd(self.cov):
            raise ValueError("cov is not positive semidefinite")


@dataclass(frozen=True)
class ExactPosterior:
    mean_t: np.ndarray
    cov_t: np.ndarray

    @property
    def var_t(self) -> np.ndarray:
        return np.diag(self.cov_t).copy()


@dataclass
class History:
    """Online record ``D_t`` of queries and noisy observations.

    ``queries`` holds candidate indices (ints) or, for continuous inputs,
    input points. ``true_values`` optionally holds the noiseless ``f(x_t)``
    for scoring.
    """

    queries: list = field(default_factory=list)
    observations: list = field(default_factory=list)
    true_values: list | None = None

    def __post_init__(self):
        self.queries = list(self.queries)
        self.observations = [float(v) for v in self.observations]
        if len(self.queries) != len(self.observations):
            raise ValueError("queries and observations must have equal length")
        if self.true_values is not None:
            self.true_values = [float(v) for v in self.true_values]
            if len(self.true_values) != len(self.queries):
                raise ValueError("true_values must match queries in length")

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def t(self) -> int:
        return len(self.queries)

    def append(self, query, observation: float, true_value: float | None = None) -> None:
        self.queries.append(query)
        self.observations.append(float(observation))
        if true_value is not None:
            if self.true_values is None:
                if len(self.queries) > 1:
                    raise ValueError("true_values missing for earlier queries")
                self.true_values = []
            self.true_values.append(float(true_value))
        elif self.true_values is not None:
            raise ValueError("true_value required once true_values are tracked")

    def prefix(self, t: int) -> "History":
        return History(
            self.queries[:t],
            self.observations[:t],
            None if self.true_values is None else self.true_values[:t],
        )

    def indices(self) -> np.ndarray:
        return np.asarray(self.queries, dtype=np.int64).reshape(-1)

    def y(self) -> np.ndarray:
        return np.asarray(self.observations, dtype=float)


def se_kernel(a: np.ndarray, b: np.ndarray | None = None, lengthscale: float = 1.0,
              signal_var: float = 1.0) -> np.ndarray:
    """Squared-exponential kernel matrix between row-stacked inputs."""
    a = _as_points(a)
    b = a if b is None else _as_points(b)
    gram = kernels.sq_exp_gram(a, b, lengthscale, signal_var)
    if b is a:
        gram = symmetrize(gram)
    return gram


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def se_prior(inputs: np.ndarray, lengthscale: float, signal_var: float = 1.0,
             noise_sd: float = 0.0, mean: float | np.ndarray = 0.0) -> GpPrior:
    inputs = _as_points(inputs)
    cov = se_kernel(inputs, inputs, lengthscale, signal_var)
    mean_vec = np.broadcast_to(np.asarray(mean, dtype=float), (inputs.shape[0],)).copy()
    return GpPrior(mean_vec, cov, noise_sd)


def _sampling_factor(cov: np.ndarray) -> np.ndarray | None:
    if not np.any(cov):
        return None
    try:
        return safe_cholesky(cov, "prior covariance")
    except JitterError as exc:
        raise JitterError("indefinite covariance") from exc


def sample_functions(prior: GpPrior, n: int, rng) -> np.ndarray:
    """Draw ``n`` function vectors from ``N(mean, cov)``; returns shape (n, M)."""
    rng = as_rng(rng)
    factor = _sampling_factor(prior.cov)
    z = rng.standard_normal((n, prior.size))
    if factor is None:
        return np.broadcast_to(prior.mean, (n, prior.size)).copy()
    return prior.mean[None, :] + z @ factor.T


def sample_function(prior: GpPrior, seed) -> np.ndarray:
    """Draw one function over the candidate set, deterministic given ``seed``."""
    return sample_functions(prior, 1, seed)[0]


def exact_posterior(prior: GpPrior, history: History) -> ExactPosterior:
    """Closed-form GP posterior over all candidates given noisy observations.

    ``mean_t = mu + k(., x_t) (k(x_t) + s^2 I)^-1 (y_t - mu(x_t))`` and the
    matching Schur-complement covariance.
    """
    if len(history) == 0:
        return ExactPosterior(prior.mean.copy(), prior.cov.copy())
    idx = history.indices()
    if idx.min() < 0 or idx.max() >= prior.size:
        raise IndexError("history index outside candidate set")
    y = history.y()
    cross = prior.cov[:, idx]
    gram = prior.cov[np.ix_(idx, idx)] + prior.noise_sd**2 * np.eye(idx.size)
    factor = safe_cholesky(gram, "observation covariance")
    alpha = chol_solve(factor, y - prior.mean[idx])
    mean_t = prior.mean + cross @ alpha
    cov_t = prior.cov - cross @ chol_solve(factor, cross.T)
    return ExactPosterior(mean_t, symmetrize(cov_t))


def noisy_objective(f_values: Sequence[float], noise_sd: float):
    """Objective callback ``(index, rng) -> y`` with Gaussian observation noise."""
    f_values = np.asarray(f_values, dtype=float)

    def observe(index: int, rng: np.random.Generator) -> float:
        # always consume one draw so the stream does not depend on noise_sd
        noise = rng.standard_normal()
        return float(f_values[index] + noise_sd * noise)

    observe.true_values = f_values
    observe.noise_sd = noise_sd
    return observe
