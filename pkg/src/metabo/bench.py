"""Synthetic meta-BO experiments: data generation, baselines, regret curves.

Ground truth is a zero-mean squared-exponential GP on ``[0, 1]^d``. The
offline dataset holds N noisy task draws; every trial samples a fresh test
function from the same GP and runs each method on it, so methods are
compared on identical test functions (paired trials).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import kernels
from .acquisition import AcquisitionConfig, default_pi_target, oracle_zeta
from .bo_loop import (
    BOAborted,
    ContinuousEstimatorModel,
    DiscreteEstimatorModel,
    ExactModel,
    regret_record,
    run_bo,
    run_random,
)
from .completion import CompletionConfig, complete_matrix
from .gp_core import GpPrior, History, noisy_objective, sample_functions, se_prior
from .linalg import chol_solve, safe_cholesky
from .prior_continuous import fit_prior_continuous, make_cosine_features
from .prior_discrete import OfflineMatrix, estimate_prior_discrete
from .seeding import rng_for

METHODS = ("pembo-ucb", "pembo-pi", "oracle-ucb", "plain-mle-ucb", "random")


@dataclass(frozen=True)
class ExperimentConfig:
    setting: str = "discrete"
    M: int = 300
    N: int = 100
    T: int = 50
    d: int = 2
    K: int = 80
    noise_sd: float = 0.1
    mask_rate: float = 0.0
    lengthscale: float = 0.3
    signal_var: float = 1.0
    trials: int = 40
    delta: float = 0.1
    methods: tuple = METHODS
    seed: int = 0
    # fraction of the N offline tasks handed to the estimators
    train_fraction: float = 1.0
    # random-feature bandwidth; None means use the kernel lengthscale
    bandwidth: float | None = None
    complete_rank: int = 20
    complete_shrink: float = 0.0
    pi_target: str = "inflated"

    def __post_init__(self):
        if self.setting not in ("discrete", "continuous"):
            raise ValueError(f"unknown setting {self.setting!r}")
        methods = (self.methods,) if isinstance(self.methods, str) else tuple(self.methods)
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        object.__setattr__(self, "methods", methods)
        if min(self.M, self.N, self.d, self.K) < 1 or self.T < 0:
            raise ValueError("M, N, d, K must be >= 1 and T >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.mask_rate < 1.0:
            raise ValueError("mask_rate must lie in [0, 1)")
        if self.mask_rate > 0 and self.setting != "discrete":
            raise ValueError("missing entries are only supported in the discrete setting")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")
        if self.noise_sd < 0 or self.lengthscale <= 0 or self.signal_var <= 0:
            raise ValueError("noise_sd >= 0, lengthscale > 0, signal_var > 0 required")
        if self.T > self.M:
            raise ValueError("T cannot exceed the number of candidates M")
        n_used = self.n_used
        if "pembo-ucb" in methods and n_used < 4 * math.log(6 / self.delta) + self.T + 2:
            raise ValueError(
                f"pembo-ucb needs N >= 4 log(6/delta) + T + 2 = "
                f"{4 * math.log(6 / self.delta) + self.T + 2:.2f} training tasks, got {n_used}"
            )
        if any(m.startswith("pembo") for m in methods):
            if self.setting == "discrete" and self.T > n_used - 2:
                raise ValueError("pembo needs T <= N - 2")
            if self.setting == "continuous" and not self.T < min(self.K, n_used - 1):
                raise ValueError("pembo needs T < min(K, N - 1) in the continuous setting")
            if self.setting == "continuous" and self.M < self.K:
                raise ValueError("continuous setting needs M >= K")

    @property
    def n_used(self) -> int:
        return max(1, int(math.ceil(self.train_fraction * self.N - 1e-9)))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


def discrete_preset(**overrides) -> ExperimentConfig:
    return replace(ExperimentConfig(), **overrides)


def continuous_preset(**overrides) -> ExperimentConfig:
    # 300 tasks keep the UCB schedule valid at 10% of the training tasks; at
    # bandwidth 0.3 the 80 cosine features are nearly collinear on [0,1]^2
    # (design condition number ~1e11), at 0.05 it stays below ~1e2
    base = ExperimentConfig(setting="continuous", N=300, K=80, bandwidth=0.05,
                            methods=("pembo-ucb", "oracle-ucb", "random"))
    return replace(base, **overrides)


@dataclass
class OfflineDataset:
    """Offline training data plus the ground truth used to generate it."""

    cfg: ExperimentConfig
    candidates: np.ndarray          # (M, d) BO candidate inputs
    truth: GpPrior                  # ground-truth prior over the candidates
    offline: OfflineMatrix | None = None     # discrete setting
    design_inputs: np.ndarray | None = None  # continuous setting, (M, d)
    design_values: np.ndarray | None = None  # continuous setting, (N, M)
    functions: np.ndarray | None = None      # noiseless task draws

    def sidecar(self) -> dict:
        c = self.cfg
        out = {
            "setting": c.setting,
            "kernel": {"type": "squared-exponential", "lengthscale": c.lengthscale,
                       "signal_var": c.signal_var},
            "mean": 0.0,
            "noise_sd": c.noise_sd,
            "seed": c.seed,
            "n_tasks": c.N,
            "mask_rate": c.mask_rate,
            "candidates": self.candidates.tolist(),
        }
        if self.design_inputs is not None:
            out["design_inputs"] = self.design_inputs.tolist()
        return out


def generate_offline_dataset(cfg: ExperimentConfig) -> OfflineDataset:
    """Sample N tasks from the ground-truth GP, add noise, and mask entries."""
    rng_x = rng_for(cfg.seed, "inputs")
    candidates = rng_x.uniform(0.0, 1.0, size=(cfg.M, cfg.d))
    truth = se_prior(candidates, cfg.lengthscale, cfg.signal_var, cfg.noise_sd)
    rng_f = rng_for(cfg.seed, "offline-functions")
    rng_e = rng_for(cfg.seed, "offline-noise")
    if cfg.setting == "discrete":
        funcs = sample_functions(truth, cfg.N, rng_f)
        values = funcs + cfg.noise_sd * rng_e.standard_normal(funcs.shape)
        mask = np.ones(values.shape, dtype=bool)
        if cfg.mask_rate > 0:
            n_missing = int(round(cfg.mask_rate * values.size))
            order = rng_for(cfg.seed, "mask").permutation(values.size)[:n_missing]
            mask.reshape(-1)[order] = False
        return OfflineDataset(cfg, candidates, truth, offline=OfflineMatrix(values, mask, cfg.noise_sd),
                              functions=funcs)
    design = rng_x.uniform(0.0, 1.0, size=(cfg.M, cfg.d))
    design_prior = se_prior(design, cfg.lengthscale, cfg.signal_var, cfg.noise_sd)
    funcs = sample_functions(design_prior, cfg.N, rng_f)
    values = funcs + cfg.noise_sd * rng_e.standard_normal(funcs.shape)
    return OfflineDataset(cfg, candidates, truth, design_inputs=design, design_values=values,
                          functions=funcs)


# ----------------------------------------------------------------------------
# plain BO baseline: zero mean, SE kernel, hyperparameters by grid search


class PlainMLEModel:
    """Zero-mean SE-kernel GP refit by marginal-likelihood grid search each step."""

    def __init__(self, candidates: np.ndarray, lengthscales=None, signal_vars=None, noise_sds=None):
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self.n_candidates = self.candidates.shape[0]
        self.max_steps = self.n_candidates
        self.lengthscales = np.logspace(-1.5, 0.5, 10) if lengthscales is None else np.asarray(lengthscales)
        self.signal_vars = np.logspace(-1, 1, 10) if signal_vars is None else np.asarray(signal_vars)
        self.noise_sds = np.logspace(-3, 0, 5) if noise_sds is None else np.asarray(noise_sds)
        self.chosen: list[tuple[float, float, float]] = []

    def select_hyperparameters(self, history: History) -> tuple[float, float, float]:
        if len(history) == 0:
            return (float(np.median(self.lengthscales)), float(np.median(self.signal_vars)),
                    float(np.median(self.noise_sds)))
        x = self.candidates[history.indices()]
        sq = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
        ll = kernels.grid_log_marglik(sq, history.y(), self.lengthscales, self.signal_vars,
                                      self.noise_sds**2)
        a, b, c = np.unravel_index(int(np.argmax(ll)), ll.shape)
        return float(self.lengthscales[a]), float(self.signal_vars[b]), float(self.noise_sds[c])

    def infer(self, history: History):
        ls, sv, nsd = self.select_hyperparameters(history)
        self.chosen.append((ls, sv, nsd))
        if len(history) == 0:
            return np.zeros(self.n_candidates), np.full(self.n_candidates, sv)
        idx = history.indices()
        xq = self.candidates[idx]
        cross = kernels.sq_exp_gram(self.candidates, xq, ls, sv)
        gram = kernels.sq_exp_gram(xq, xq, ls, sv) + nsd**2 * np.eye(idx.size)
        factor = safe_cholesky(gram, "plain GP gram")
        mean = cross @ chol_solve(factor, history.y())
        var = sv - np.einsum("mt,tm->m", cross, chol_solve(factor, cross.T))
        return mean, np.maximum(var, 0.0)


# ----------------------------------------------------------------------------
# experiment runner


@dataclass
class ExperimentContext:
    cfg: ExperimentConfig
    data: OfflineDataset
    models: dict = field(default_factory=dict)
    acqs: dict = field(default_factory=dict)


def _prior_model(cfg: ExperimentConfig, data: OfflineDataset):
    n_used = cfg.n_used
    if cfg.setting == "discrete":
        offline = data.offline.subset_tasks(np.arange(n_used))
        if not offline.is_complete:
            offline = complete_matrix(offline, CompletionConfig(max_rank=cfg.complete_rank,
                                                                shrink=cfg.complete_shrink))
        prior = estimate_prior_discrete(offline)
        return DiscreteEstimatorModel(prior), offline.values, np.diag(prior.cov_hat)
    features = make_cosine_features(cfg.d, cfg.K, cfg.bandwidth or cfg.lengthscale,
                                    rng_for(cfg.seed, "features"))
    ys = data.design_values[:n_used]
    prior = fit_prior_continuous(features, data.design_inputs, ys)
    model = ContinuousEstimatorModel(prior, data.candidates)
    _, var0 = model.infer(History())
    return model, ys, var0


def build_context(cfg: ExperimentConfig, data: OfflineDataset | None = None) -> ExperimentContext:
    data = data or generate_offline_dataset(cfg)
    ctx = ExperimentContext(cfg, data)
    if any(m.startswith("pembo") for m in cfg.methods):
        model, offline_values, var0 = _prior_model(cfg, data)
        if "pembo-ucb" in cfg.methods:
            ctx.models["pembo-ucb"] = model
            ctx.acqs["pembo-ucb"] = AcquisitionConfig("UCB", cfg.delta, n_train=cfg.n_used)
        if "pembo-pi" in cfg.methods:
            ctx.models["pembo-pi"] = model
            target = default_pi_target(offline_values, var0, cfg.pi_target)
            ctx.acqs["pembo-pi"] = AcquisitionConfig("PI", cfg.delta, f_star_hat=target, n_train=cfg.n_used)
    if "oracle-ucb" in cfg.methods:
        ctx.models["oracle-ucb"] = ExactModel(data.truth)
        ctx.acqs["oracle-ucb"] = AcquisitionConfig("UCB", cfg.delta, fixed_zeta=oracle_zeta(cfg.delta))
    if "plain-mle-ucb" in cfg.methods:
        ctx.models["plain-mle-ucb"] = PlainMLEModel(data.candidates)
        ctx.acqs["plain-mle-ucb"] = AcquisitionConfig("UCB", cfg.delta, n_train=cfg.N)
    return ctx


def test_function(cfg: ExperimentConfig, truth: GpPrior, trial: int) -> np.ndarray:
    return sample_functions(truth, 1, rng_for(cfg.seed, "test-function", trial))[0]


@dataclass
class TrialResult:
    method: str
    trial: int
    rows: list            # (t, y_best, r_t, R_t)
    history: History | None = None
    error: str | None = None


def run_trial(ctx: ExperimentContext, trial: int) -> list[TrialResult]:
    cfg = ctx.cfg
    f = test_function(cfg, ctx.data.truth, trial)
    objective = noisy_objective(f, cfg.noise_sd)
    out = []
    for method in cfg.methods:
        noise_seed = rng_for(cfg.seed, "observation-noise", trial)
        try:
            if method == "random":
                hist = run_random(f.size, objective, cfg.T, rng_for(cfg.seed, "random", trial), true_f=f)
            else:
                hist = run_bo(ctx.models[method], objective, cfg.T, ctx.acqs[method], noise_seed, true_f=f)
        except BOAborted as exc:
            out.append(TrialResult(method, trial, [], exc.history, exc.tag))
            continue
        except ValueError as exc:
            out.append(TrialResult(method, trial, [], None, str(exc)))
            continue
        rec = regret_record(f, hist)
        rows = [(t, yb, r, R) for (t, r, R, _y, _fx, yb) in rec.per_t]
        out.append(TrialResult(method, trial, rows, hist))
    return out


_WORKER_CTX: ExperimentContext | None = None


def _init_worker(cfg: ExperimentConfig) -> None:
    global _WORKER_CTX
    _WORKER_CTX = build_context(cfg)


def _worker_trial(trial: int) -> list[TrialResult]:
    return run_trial(_WORKER_CTX, trial)


@dataclass
class ExperimentResult:
    cfg: ExperimentConfig
    trials: list  # TrialResult, sorted by (method, trial)

    @property
    def skipped(self) -> list[TrialResult]:
        return [tr for tr in self.trials if tr.error is not None]

    def curves(self, method: str) -> np.ndarray:
        """Array (n_trials, T, 3) of (y_best, r_t, R_t) for completed trials."""
        rows = [tr.rows for tr in self.trials if tr.method == method and tr.error is None]
        if not rows:
            return np.empty((0, self.cfg.T, 3))
        return np.array([[r[1:] for r in tr] for tr in rows], dtype=float)

    def final(self, method: str, column: str = "r") -> np.ndarray:
        col = {"y_best": 0, "r": 1, "R": 2}[column]
        c = self.curves(method)
        return c[:, -1, col] if c.size else np.empty(0)

    def aggregate(self) -> list[tuple]:
        """Rows ``(method, t, mean_r, se_r, mean_R, se_R, mean_ybest, se_ybest)``."""
        out = []
        for method in sorted(self.cfg.methods):
            c = self.curves(method)
            if c.shape[0] == 0:
                continue
            n = c.shape[0]
            mean = c.mean(axis=0)
            se = c.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
            for t in range(c.shape[1]):
                out.append((method, t + 1, mean[t, 1], se[t, 1], mean[t, 2], se[t, 2], mean[t, 0], se[t, 0]))
        return out

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "trial", "t", "y_best", "r_t", "R_t"])
        for tr in self.trials:
            for t, yb, r, R in tr.rows:
                w.writerow([tr.method, tr.trial, t, repr(float(yb)), repr(float(r)), repr(float(R))])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "t", "mean_r", "se_r", "mean_R", "se_R", "mean_ybest", "se_ybest"])
        for row in self.aggregate():
            w.writerow([row[0], row[1], *[repr(float(v)) for v in row[2:]]])
        return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, data: OfflineDataset | None = None) -> ExperimentResult:
    """Run every method on ``cfg.trials`` paired test functions."""
    if jobs > 1 and data is None and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            batches = list(pool.map(_worker_trial, range(cfg.trials)))
    else:
        ctx = build_context(cfg, data)
        batches = [run_trial(ctx, i) for i in range(cfg.trials)]
    results = [tr for batch in batches for tr in batch]
    results.sort(key=lambda tr: (tr.method, tr.trial))
    return ExperimentResult(cfg, results)


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)


def write_dataset(data: OfflineDataset, out: Path) -> tuple[Path, Path]:
    """Write the dataset CSV and a JSON sidecar describing the ground truth."""
    from .prior_continuous import write_continuous_csv
    from .prior_discrete import write_offline_csv

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if data.cfg.setting == "discrete":
        write_offline_csv(data.offline, out)
    else:
        write_continuous_csv(data.design_inputs, data.design_values, out)
    sidecar = out.with_suffix(".truth.json")
    sidecar.write_text(json.dumps(data.sidecar(), indent=2, sort_keys=True) + "\n")
    return out, sidecar


def plot_svg(aggregate_rows: list[tuple], path, column: str = "r") -> None:
    """Line plot of a mean curve per method with a +-1 se band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    col = {"r": (2, 3), "R": (4, 5), "y_best": (6, 7)}[column]
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted({r[0] for r in aggregate_rows}):
        rows = [r for r in aggregate_rows if r[0] == method]
        t = np.array([r[1] for r in rows])
        m = np.array([r[col[0]] for r in rows])
        s = np.array([r[col[1]] for r in rows])
        ax.plot(t, m, label=method)
        ax.fill_between(t, m - s, m + s, alpha=0.2)
    ax.set_xlabel("iteration t")
    ax.set_ylabel({"r": "best-sample simple regret", "R": "simple regret", "y_best": "max observed y"}[column])
    ax.legend()
    fig.tight_layout()
    plt.rcParams["svg.hashsalt"] = "metabo"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
