import numpy as np
import pytest
from hypothesis import given, strategies as st

from metabo.acquisition import AcquisitionConfig, oracle_zeta, score
from metabo.bo_loop import (DiscreteEstimatorModel, ExactModel, best_sample_simple_regret,
                            infer_argmax, regret_record, run_bo, run_random, simple_regret)
from metabo.gp_core import GpPrior, History, exact_posterior, noisy_objective, sample_function, se_prior
from metabo.prior_discrete import OfflineMatrix, estimate_prior_discrete

ORACLE = AcquisitionConfig("UCB", 0.1, fixed_zeta=oracle_zeta(0.1))


def _grid_prior(m=25, noise=0.1):
    x = np.linspace(0, 1, m)[:, None]
    return se_prior(x, 0.2, 1.0, noise)


def test_zero_steps():
    h = run_bo(ExactModel(_grid_prior()), noisy_objective(np.zeros(25), 0.1), 0, ORACLE)
    assert len(h) == 0


def test_two_candidate_trace():
    prior = GpPrior(np.zeros(2), np.array([[1.0, 0.3], [0.3, 1.0]]), 0.0)
    f = np.array([0.0, 10.0])
    h = run_bo(ExactModel(prior), noisy_objective(f, 0.0), 2, ORACLE, seed=1)
    assert 1 in h.queries
    assert best_sample_simple_regret(f, h) == 0.0


def test_deterministic(rng):
    prior = _grid_prior()
    f = sample_function(prior, 3)
    runs = [run_bo(ExactModel(prior), noisy_objective(f, 0.1), 10, ORACLE, seed=9) for _ in range(2)]
    assert runs[0].queries == runs[1].queries and runs[0].observations == runs[1].observations


def test_history_length_and_no_repeats():
    prior = _grid_prior()
    f = sample_function(prior, 4)
    data = OfflineMatrix.complete(np.random.default_rng(0).multivariate_normal(prior.mean, prior.cov, 60))
    model = DiscreteEstimatorModel(estimate_prior_discrete(data))
    acq = AcquisitionConfig("UCB", 0.1, n_train=60)
    h = run_bo(model, noisy_objective(f, 0.1), 20, acq, seed=2, true_f=f)
    assert len(h) == 20 and len(set(h.queries)) == 20
    assert h.true_values == [float(f[i]) for i in h.queries]
    with pytest.raises(ValueError):
        run_bo(model, noisy_objective(f, 0.1), 59, acq)


def test_regret_examples():
    f = np.array([1.0, 3.0, 2.0])
    h = History([0, 2], [1.0, 2.0])
    assert best_sample_simple_regret(f, h) == 1.0
    assert best_sample_simple_regret(f, History([1], [0.0])) == 0.0
    assert best_sample_simple_regret(np.array([4.2]), History([0], [9.0])) == 0.0
    with pytest.raises(ValueError):
        best_sample_simple_regret(f, History())


def test_infer_argmax():
    assert infer_argmax(History([4, 7], [0.9, 2.5])) == 7
    assert infer_argmax(History([4, 7], [2.0, 2.0])) == 4
    with pytest.raises(ValueError):
        infer_argmax(History())
    # the inferred argmax can be a worse point than the best query
    assert simple_regret(np.array([0.0, 1.0]), History([0, 1], [2.0, 1.0])) == 1.0


def test_noiseless_regrets_coincide():
    prior = _grid_prior(noise=0.0)
    for seed in range(5):
        f = sample_function(prior, seed)
        h = run_random(prior.size, noisy_objective(f, 0.0), 10, seed=seed)
        rec = regret_record(f, h)
        for _, r, R, *_ in rec.per_t:
            assert r == R
        assert rec.inferred_argmax == infer_argmax(h)


@given(st.integers(0, 10_000))
def test_record_invariants(seed):
    prior = _grid_prior()
    f = sample_function(prior, seed)
    h = run_random(prior.size, noisy_objective(f, 0.3), 12, seed=seed, true_f=f)
    rec = regret_record(f, h)
    r = [row[1] for row in rec.per_t]
    assert all(b <= a for a, b in zip(r, r[1:]))
    assert all(row[2] >= 0 for row in rec.per_t)
    assert rec.final_r == best_sample_simple_regret(f, h)
    assert rec.final_R == simple_regret(f, h)


@given(st.integers(0, 10_000))
def test_oracle_ucb_sanity(seed):
    # the chosen point's UCB is never below the best lower bound among unqueried points
    prior = _grid_prior(m=15)
    f = sample_function(prior, seed)
    zeta = ORACLE.fixed_zeta
    h = run_bo(ExactModel(prior), noisy_objective(f, 0.1), 8, ORACLE, seed=seed)
    for t in range(len(h)):
        post = exact_posterior(prior, h.prefix(t))
        sd = np.sqrt(np.maximum(post.var_t, 0))
        free = np.setdiff1d(np.arange(prior.size), h.queries[:t])
        best_lcb = (post.mean_t - zeta * sd)[free].max()
        assert score("UCB", post.mean_t, post.var_t, zeta)[h.queries[t]] >= best_lcb - 1e-12
