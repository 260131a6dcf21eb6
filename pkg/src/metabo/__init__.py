"""Meta Bayesian optimization with a GP prior estimated from offline tasks."""

from ._accel import backend_name
from .acquisition import AcquisitionConfig, oracle_zeta, score, select_next, ucb_zeta
from .bo_loop import (
    ContinuousEstimatorModel,
    DiscreteEstimatorModel,
    ExactModel,
    best_sample_simple_regret,
    infer_argmax,
    regret_record,
    run_bo,
    simple_regret,
)
from .completion import CompletionConfig, complete_matrix
from .gp_core import GpPrior, History, exact_posterior, sample_function, se_prior
from .prior_continuous import (
    bar_sigma_sq,
    estimate_posterior_continuous,
    estimate_prior_continuous,
    fit_task_weights,
    make_cosine_features,
    predict,
)
from .prior_discrete import (
    OfflineMatrix,
    concentration_constants,
    estimate_posterior_discrete,
    estimate_prior_discrete,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "CompletionConfig", "ContinuousEstimatorModel", "DiscreteEstimatorModel",
    "ExactModel", "GpPrior", "History", "OfflineMatrix", "backend_name", "bar_sigma_sq",
    "best_sample_simple_regret", "complete_matrix", "concentration_constants",
    "estimate_posterior_continuous", "estimate_posterior_discrete", "estimate_prior_continuous",
    "estimate_prior_discrete", "exact_posterior", "fit_task_weights", "infer_argmax",
    "make_cosine_features", "oracle_zeta", "predict", "regret_record", "run_bo", "sample_function",
    "score", "se_prior", "select_next", "simple_regret", "ucb_zeta",
]
