"""The sequential BO loop and regret bookkeeping.

A *model* is anything with ``infer(history) -> (mean, var)`` returning the
(estimated) posterior mean and variance at every candidate given ``D_t``.
The loop recomputes inference from scratch at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .acquisition import AcquisitionConfig, score, select_next
from .gp_core import GpPrior, History, exact_posterior
from .prior_continuous import ContinuousPriorEstimate, estimate_posterior_continuous
from .prior_discrete import DiscretePriorEstimate, estimate_posterior_discrete
from .seeding import as_rng

Objective = Callable[[int, np.random.Generator], float]


class PosteriorModel(Protocol):
    n_candidates: int

    def infer(self, history: History) -> tuple[np.ndarray, np.ndarray]: ...


class BOAborted(RuntimeError):
    """A BO run stopped early; ``history`` holds the queries made so far."""

    def __init__(self, tag: str, history: History, cause: BaseException | None = None):
        super().__init__(f"{tag}: {cause}" if cause else tag)
        self.tag = tag
        self.history = history


class DiscreteEstimatorModel:
    """Finite-set estimator posterior."""

    def __init__(self, prior: DiscretePriorEstimate):
        self.prior = prior
        self.n_candidates = prior.size

    @property
    def max_steps(self) -> int:
        return self.prior.n_train - 2

    def infer(self, history):
        post = estimate_posterior_discrete(self.prior, history)
        return post.mean_hat_t, np.maximum(post.var_hat_t, 0.0)


class ContinuousEstimatorModel:
    """Primal-form estimator posterior evaluated on a finite candidate grid."""

    def __init__(self, prior: ContinuousPriorEstimate, candidates: np.ndarray):
        self.prior = prior
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self.n_candidates = self.candidates.shape[0]
        self._phi = prior.features(self.candidates)  # K x M, reused every step

    @property
    def max_steps(self) -> int:
        return min(self.prior.features.n_features, self.prior.n_train - 1)

    def infer(self, history):
        post = estimate_posterior_continuous(self.prior, history, self.candidates)
        mean = self._phi.T @ post.u_hat_t
        var = np.einsum("kn,kl,ln->n", self._phi, post.sigma_hat_t, self._phi)
        return mean, np.maximum(var, 0.0)


class ExactModel:
    """Known-prior GP posterior (the oracle)."""

    def __init__(self, prior: GpPrior):
        self.prior = prior
        self.n_candidates = prior.size
        self.max_steps = prior.size

    def infer(self, history):
        post = exact_posterior(self.prior, history)
        return post.mean_t, np.maximum(post.var_t, 0.0)


def run_bo(model: PosteriorModel, objective: Objective, T: int, acq: AcquisitionConfig,
           seed=0, true_f: np.ndarray | None = None) -> History:
    """Run T rounds of infer, score, argmax, observe.

    The observation noise stream is drawn from ``seed``. When ``true_f`` is
    given, the noiseless value of each query is recorded for scoring.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    limit = getattr(model, "max_steps", None)
    if limit is not None and T > limit:
        raise ValueError(f"T={T} exceeds what the model supports ({limit})")
    if T > model.n_candidates:
        raise ValueError("T exceeds the number of candidates")
    rng = as_rng(seed)
    history = History([], [], [] if true_f is not None else None)
    for t in range(1, T + 1):
        try:
            mean, var = model.infer(history)
            param = acq.zeta(t) if acq.kind == "UCB" else acq.f_star_hat
            values = score(acq.kind, mean, var, param)
            idx = select_next(values, history.queries)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise BOAborted(f"aborted at t={t}", history, exc) from exc
        y = objective(idx, rng)
        history.append(idx, y, None if true_f is None else float(true_f[idx]))
    return history


def run_random(n_candidates: int, objective: Objective, T: int, seed=0,
               true_f: np.ndarray | None = None) -> History:
    """Uniform random search without repeats (baseline)."""
    rng = as_rng(seed)
    order = rng.permutation(n_candidates)[:T]
    history = History([], [], [] if true_f is not None else None)
    for idx in order:
        y = objective(int(idx), rng)
        history.append(int(idx), y, None if true_f is None else float(true_f[idx]))
    return history


def _queried_values(true_f: np.ndarray, history: History) -> np.ndarray:
    if history.true_values is not None:
        return np.asarray(history.true_values, dtype=float)
    return np.asarray(true_f, dtype=float)[history.indices()]


def best_sample_simple_regret(true_f, history: History) -> float:
    """``max f - max_t f(x_t)``: the best query in hindsight."""
    if len(history) == 0:
        raise ValueError("empty history")
    true_f = np.asarray(true_f, dtype=float)
    return float(true_f.max() - _queried_values(true_f, history).max())


def infer_argmax(history: History):
    """The query whose noisy observation is largest (earliest on ties)."""
    if len(history) == 0:
        raise ValueError("empty history")
    return history.queries[int(np.argmax(history.y()))]


def simple_regret(true_f, history: History) -> float:
    """``max f - f(x_hat)`` with ``x_hat`` from :func:`infer_argmax`."""
    if len(history) == 0:
        raise ValueError("empty history")
    true_f = np.asarray(true_f, dtype=float)
    tau = int(np.argmax(history.y()))
    return float(true_f.max() - _queried_values(true_f, history)[tau])


@dataclass
class RegretRecord:
    """Per-iteration regret trace of one run.

    Each ``per_t`` row is ``(t, r_t, R_t, y_t, f(x_t), y_best_t)``.
    """

    per_t: list = field(default_factory=list)
    inferred_argmax: object = None

    @property
    def final_r(self) -> float:
        return self.per_t[-1][1]

    @property
    def final_R(self) -> float:
        return self.per_t[-1][2]


def regret_record(true_f, history: History) -> RegretRecord:
    true_f = np.asarray(true_f, dtype=float)
    fx = _queried_values(true_f, history)
    ys = history.y()
    f_star = float(true_f.max())
    rows = []
    for t in range(1, len(history) + 1):
        tau = int(np.argmax(ys[:t]))
        rows.append((t, f_star - float(fx[:t].max()), f_star - float(fx[tau]),
                     float(ys[t - 1]), float(fx[t - 1]), float(ys[:t].max())))
    inferred = infer_argmax(history) if len(history) else None
    return RegretRecord(rows, inferred)
