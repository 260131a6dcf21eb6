"""Primal-form (finite basis) estimators for inputs in R^d.

Each offline task is regressed onto a shared basis ``Phi`` evaluated at a
shared design ``x_bar``; the per-task weight vectors give a sample mean and
covariance for the weight prior, and the posterior over weights is
estimated the same way as the finite-set estimator, through the basis.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .gp_core import History
from .linalg import chol_solve, safe_cholesky, symmetrize
from .seeding import as_rng

log = logging.getLogger(__name__)

# about 1/sqrt(machine epsilon)
ILL_CONDITIONED = 1e8


@dataclass(frozen=True)
class FeatureMap:
    """Random cosine features ``scale * cos(frequencies @ x + phases)``."""

    frequencies: np.ndarray
    phases: np.ndarray
    scale: float

    def __post_init__(self):
        freqs = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        if freqs.shape[0] != phases.size or phases.size < 1:
            raise ValueError("frequencies must be K x d with K matching phases")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "phases", phases)

    @property
    def n_features(self) -> int:
        return self.phases.size

    @property
    def dim(self) -> int:
        return self.frequencies.shape[1]

    def __call__(self, x) -> np.ndarray:
        """Evaluate the basis; a single d-vector gives a K-vector, an (n, d)
        array gives the K x n design matrix."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            if x.size != self.dim:
                raise ValueError(f"expected a {self.dim}-vector")
            return kernels.cosine_features(x[None, :], self.frequencies, self.phases, self.scale)[:, 0]
        if x.shape[1] != self.dim:
            raise ValueError(f"expected inputs with {self.dim} columns")
        return kernels.cosine_features(x, self.frequencies, self.phases, self.scale)


@dataclass(frozen=True)
class ContinuousPriorEstimate:
    features: FeatureMap
    u_hat: np.ndarray
    sigma_hat: np.ndarray
    n_train: int
    design_gram_inverse: np.ndarray


@dataclass(frozen=True)
class ContinuousPosterior:
    u_hat_t: np.ndarray
    sigma_hat_t: np.ndarray
    t: int
    features: FeatureMap | None = None


def make_cosine_features(d: int, k: int, bandwidth: float, seed) -> FeatureMap:
    """Random Fourier features approximating an SE kernel of lengthscale ``bandwidth``.

    Frequencies are drawn from ``N(0, bandwidth^-2 I)`` and phases uniformly
    on ``[0, 2 pi)``; ``scale = sqrt(2 / K)`` so that ``Phi(x) . Phi(x')``
    approximates ``exp(-|x - x'|^2 / (2 bandwidth^2))``.
    """
    if d < 1 or k < 1:
        raise ValueError("d and K must be >= 1")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    rng = as_rng(seed)
    freqs = rng.standard_normal((k, d)) / bandwidth
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
    return FeatureMap(freqs, phases, math.sqrt(2.0 / k))


def fit_task_weights(design: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Least-squares weights ``(Phi Phi^T)^-1 Phi y`` for one or many tasks.

    ``design`` is K x M; ``ys`` is an M-vector or an N x M matrix (one task
    per row), giving a K-vector or an N x K matrix.
    """
    design = np.asarray(design, dtype=float)
    k, m = design.shape
    if m < k or np.linalg.matrix_rank(design) < k:
        raise ValueError("design not full row rank")
    cond = np.linalg.cond(design)
    if cond > ILL_CONDITIONED:
        log.warning("feature design condition number %.2g; weight covariance will be dominated "
                    "by noise in near-null directions", cond)
    ys = np.asarray(ys, dtype=float)
    # solve on the design itself; the normal equations square its condition number
    weights = np.linalg.lstsq(design.T, ys.T, rcond=None)[0]
    return weights.T if ys.ndim == 2 else weights


def estimate_prior_continuous(weights: np.ndarray, design: np.ndarray,
                              features: FeatureMap) -> ContinuousPriorEstimate:
    """Sample mean and unbiased sample covariance of the fitted task weights."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    n = weights.shape[0]
    if n < 2:
        raise ValueError("insufficient tasks: need N >= 2")
    u_hat = weights.mean(axis=0)
    centered = weights - u_hat[None, :]
    sigma_hat = symmetrize(centered.T @ centered / (n - 1))
    design = np.asarray(design, dtype=float)
    _, sv, vt = np.linalg.svd(design.T, full_matrices=False)
    gram_inv = symmetrize((vt.T / sv**2) @ vt)
    return ContinuousPriorEstimate(features, u_hat, sigma_hat, n, gram_inv)


def fit_prior_continuous(features: FeatureMap, design_inputs: np.ndarray,
                         ys: np.ndarray) -> ContinuousPriorEstimate:
    """Convenience: evaluate the basis on the shared design, fit all tasks, estimate."""
    design = features(np.asarray(design_inputs, dtype=float))
    return estimate_prior_continuous(fit_task_weights(design, ys), design, features)


def _query_design(features: FeatureMap, history: History, candidates: np.ndarray | None) -> np.ndarray:
    if candidates is not None:
        pts = np.asarray(candidates, dtype=float)[history.indices()]
    else:
        pts = np.atleast_2d(np.asarray(history.queries, dtype=float))
    return features(pts)  # K x t


def estimate_posterior_continuous(prior: ContinuousPriorEstimate, history: History,
                                  candidates: np.ndarray | None = None) -> ContinuousPosterior:
    """Estimated posterior over the weight vector given online data.

    ``history.queries`` are input points, or indices into ``candidates``
    when that array is given.
    """
    t = len(history)
    n = prior.n_train
    k = prior.features.n_features
    if t == 0:
        return ContinuousPosterior(prior.u_hat.copy(), prior.sigma_hat.copy(), 0, prior.features)
    # t = K is allowed: the projected covariance stays invertible when the
    # queried feature columns are independent
    if t > k or t > n - 2:
        raise ValueError(f"need t <= K and t <= N - 2 (t={t}, K={k}, N={n})")
    phi_t = _query_design(prior.features, history, candidates)
    y = history.y()
    cross = prior.sigma_hat @ phi_t  # K x t
    inner = phi_t.T @ cross  # t x t
    factor = safe_cholesky(symmetrize(inner), "projected weight covariance")
    u_t = prior.u_hat + cross @ chol_solve(factor, y - phi_t.T @ prior.u_hat)
    schur = prior.sigma_hat - cross @ chol_solve(factor, cross.T)
    sigma_t = symmetrize((n - 1) / (n - t - 1) * schur)
    return ContinuousPosterior(u_t, sigma_t, t, prior.features)


def exact_weight_posterior(u: np.ndarray, sigma: np.ndarray, features: FeatureMap,
                           history: History, noise_sd: float,
                           candidates: np.ndarray | None = None) -> ContinuousPosterior:
    """Posterior over weights when ``(u, Sigma)`` and the noise are known."""
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if len(history) == 0:
        return ContinuousPosterior(u.copy(), sigma.copy(), 0, features)
    phi_t = _query_design(features, history, candidates)
    cross = sigma @ phi_t
    inner = phi_t.T @ cross + noise_sd**2 * np.eye(phi_t.shape[1])
    factor = safe_cholesky(symmetrize(inner), "observation covariance")
    u_t = u + cross @ chol_solve(factor, history.y() - phi_t.T @ u)
    sigma_t = symmetrize(sigma - cross @ chol_solve(factor, cross.T))
    return ContinuousPosterior(u_t, sigma_t, len(history), features)


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    var: np.ndarray
    raw_var: np.ndarray

    def __iter__(self):
        # unpack as (mean, var)
        yield self.mean
        yield self.var


def _weights_of(model) -> tuple[np.ndarray, np.ndarray, FeatureMap]:
    if isinstance(model, ContinuousPriorEstimate):
        return model.u_hat, model.sigma_hat, model.features
    if isinstance(model, ContinuousPosterior):
        if model.features is None:
            raise ValueError("posterior carries no feature map")
        return model.u_hat_t, model.sigma_hat_t, model.features
    raise TypeError(f"cannot predict from {type(model).__name__}")


def predict(model, x) -> Prediction:
    """Predictive mean ``Phi(x)^T u`` and variance ``Phi(x)^T S Phi(x)``.

    ``x`` may be a single d-vector (scalar outputs) or an (n, d) array.
    Negative variances from roundoff or estimation noise are clipped to 0;
    the unclipped value is kept in ``raw_var``.
    """
    u, s, features = _weights_of(model)
    x = np.asarray(x, dtype=float)
    phi = features(x)
    if phi.ndim == 1:
        mean = float(phi @ u)
        raw = float(phi @ s @ phi)
        if raw < 0:
            log.debug("clipping negative predictive variance %.3g", raw)
        return Prediction(mean, max(raw, 0.0), raw)
    mean = phi.T @ u
    raw = np.einsum("kn,kl,ln->n", phi, s, phi)
    if np.any(raw < 0):
        log.debug("clipping %d negative predictive variances (min %.3g)", int((raw < 0).sum()), raw.min())
    return Prediction(mean, np.maximum(raw, 0.0), raw)


def bar_sigma_sq(prior: ContinuousPriorEstimate, noise_sd: float, x) -> np.ndarray | float:
    """Design-dependent effective noise ``s^2 Phi(x)^T (Phi Phi^T)^-1 Phi(x)``."""
    phi = prior.features(np.asarray(x, dtype=float))
    g = prior.design_gram_inverse
    if phi.ndim == 1:
        return max(noise_sd**2 * float(phi @ g @ phi), 0.0)
    return np.maximum(noise_sd**2 * np.einsum("kn,kl,ln->n", phi, g, phi), 0.0)


def induced_prior(u: np.ndarray, sigma: np.ndarray, features: FeatureMap, inputs: np.ndarray):
    """Mean vector and covariance matrix of ``Phi(x)^T W`` over a finite set of inputs."""
    phi = features(np.asarray(inputs, dtype=float))
    return phi.T @ np.asarray(u, dtype=float), symmetrize(phi.T @ np.asarray(sigma, dtype=float) @ phi)


# ----------------------------------------------------------------------------
# CSV: header ``task_id,x_1..x_d,y``; every task must use the same x rows.


def write_continuous_csv(design_inputs: np.ndarray, ys: np.ndarray, path) -> None:
    design_inputs = np.atleast_2d(np.asarray(design_inputs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    d = design_inputs.shape[1]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["task_id", *[f"x_{j + 1}" for j in range(d)], "y"])
        for i, row in enumerate(ys):
            for x, y in zip(design_inputs, row):
                writer.writerow([i, *[repr(float(v)) for v in x], repr(float(y))])


def read_continuous_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(design_inputs (M, d), ys (N, M))``; rejects tasks on differing grids."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        d = len(header) - 2
        if d < 1 or header[0] != "task_id" or header[-1] != "y" or header[1:-1] != [f"x_{j + 1}" for j in range(d)]:
            raise ValueError("expected header task_id,x_1..x_d,y")
        tasks: dict[int, list] = {}
        for row in reader:
            if not row:
                continue
            tasks.setdefault(int(row[0]), []).append([float(v) for v in row[1:]])
    if not tasks:
        raise ValueError("no observations in file")
    ids = sorted(tasks)
    first = np.asarray(tasks[ids[0]])
    design = first[:, :d]
    ys = np.empty((len(ids), design.shape[0]))
    for r, i in enumerate(ids):
        arr = np.asarray(tasks[i])
        if arr.shape != first.shape or not np.array_equal(arr[:, :d], design):
            raise ValueError(f"task {i} does not share the common input grid")
        ys[r] = arr[:, d]
    return design, ys
