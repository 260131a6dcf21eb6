import numpy as np
import pytest
from hypothesis import given, strategies as st

from metabo.gp_core import GpPrior, History, exact_posterior
from metabo.prior_continuous import (
    ContinuousPosterior,
    ContinuousPriorEstimate,
    FeatureMap,
    bar_sigma_sq,
    estimate_posterior_continuous,
    estimate_prior_continuous,
    exact_weight_posterior,
    fit_prior_continuous,
    fit_task_weights,
    induced_prior,
    make_cosine_features,
    predict,
    read_continuous_csv,
    write_continuous_csv,
)
from metabo.prior_discrete import DiscretePriorEstimate, estimate_posterior_discrete


def constant_features():
    # Phi(x) = 1 for every x
    return FeatureMap(np.zeros((1, 1)), np.zeros(1), 1.0)


def scalar_prior(n=5):
    f = constant_features()
    return ContinuousPriorEstimate(f, np.zeros(1), np.eye(1), n, np.eye(1))


def test_features_deterministic():
    a = make_cosine_features(2, 10, 0.5, 3)
    b = make_cosine_features(2, 10, 0.5, 3)
    np.testing.assert_array_equal(a.frequencies, b.frequencies)
    np.testing.assert_array_equal(a.phases, b.phases)
    assert a.scale == pytest.approx(np.sqrt(2 / 10))


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3))
def test_features_bounded(x):
    f = make_cosine_features(3, 25, 0.7, 1)
    phi = f(np.array(x))
    assert phi.shape == (25,)
    assert phi @ phi <= 2.0 + 1e-12


def test_rff_approximates_se_kernel():
    f = make_cosine_features(1, 2000, 1.0, 0)
    x = np.linspace(-1.5, 1.5, 13)[:, None]
    phi = f(x)
    approx = phi.T @ phi
    exact = np.exp(-0.5 * (x - x.T) ** 2)
    assert np.max(np.abs(approx - exact)) < 0.05


def test_fit_identity_design():
    ys = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(fit_task_weights(np.eye(3), ys), ys)


def test_fit_hand_example():
    np.testing.assert_allclose(fit_task_weights(np.array([[1.0, 1.0]]), np.array([1.0, 3.0])), [2.0])


def test_fit_rank_deficient():
    with pytest.raises(ValueError, match="design not full row rank"):
        fit_task_weights(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]), np.zeros(3))


@given(st.integers(0, 1000))
def test_fit_residual_orthogonal(seed):
    rng = np.random.default_rng(seed)
    design = rng.standard_normal((4, 12))
    ys = rng.standard_normal(12)
    w = fit_task_weights(design, ys)
    np.testing.assert_allclose(design @ (design.T @ w - ys), 0.0, atol=1e-8)


def test_prior_hand_example():
    est = estimate_prior_continuous(np.array([[1.0], [3.0]]), np.eye(1), constant_features())
    np.testing.assert_allclose(est.u_hat, [2.0])
    np.testing.assert_allclose(est.sigma_hat, [[2.0]])


def test_prior_identical_rows():
    est = estimate_prior_continuous(np.tile([1.0, 2.0], (4, 1)), np.eye(2),
                                    FeatureMap(np.zeros((2, 1)), np.zeros(2), 1.0))
    np.testing.assert_array_equal(est.sigma_hat, 0.0)


def test_prior_row_permutation_invariance(rng):
    w = rng.standard_normal((7, 3))
    f = FeatureMap(np.zeros((3, 1)), np.zeros(3), 1.0)
    a = estimate_prior_continuous(w, np.eye(3), f)
    b = estimate_prior_continuous(w[rng.permutation(7)], np.eye(3), f)
    np.testing.assert_allclose(a.u_hat, b.u_hat, atol=1e-14)
    np.testing.assert_allclose(a.sigma_hat, b.sigma_hat, atol=1e-14)


def test_prior_needs_two_tasks():
    with pytest.raises(ValueError):
        estimate_prior_continuous(np.ones((1, 2)), np.eye(2), FeatureMap(np.zeros((2, 1)), np.zeros(2), 1.0))


def test_posterior_t0_identity():
    prior = scalar_prior()
    post = estimate_posterior_continuous(prior, History())
    np.testing.assert_array_equal(post.u_hat_t, prior.u_hat)
    np.testing.assert_array_equal(post.sigma_hat_t, prior.sigma_hat)


def test_posterior_scalar_example():
    post = estimate_posterior_continuous(scalar_prior(), History([np.array([0.3])], [2.0]))
    np.testing.assert_allclose(post.u_hat_t, [2.0])
    np.testing.assert_allclose(post.sigma_hat_t, [[0.0]], atol=1e-12)
    mean, var = predict(post, np.array([0.9]))
    assert mean == pytest.approx(2.0)
    assert var == pytest.approx(0.0, abs=1e-12)


def test_posterior_rejects_t_above_k():
    with pytest.raises(ValueError):
        estimate_posterior_continuous(scalar_prior(), History([np.array([0.1]), np.array([0.2])], [1.0, 1.0]))


def test_posterior_rejects_small_training_set():
    f = FeatureMap(np.zeros((3, 1)), np.zeros(3), 1.0)
    prior = ContinuousPriorEstimate(f, np.zeros(3), np.eye(3), 3, np.eye(3))
    with pytest.raises(ValueError):
        estimate_posterior_continuous(prior, History([np.array([0.1]), np.array([0.2])], [1.0, 1.0]))


def _fitted_prior(rng, k=6, n=40, m=30, d=1):
    # a well-conditioned design keeps the interpolation checks at 1e-8
    while True:
        f = make_cosine_features(d, k, 0.1, rng.integers(1 << 30))
        x = rng.uniform(size=(m, d))
        phi = f(x)
        if np.linalg.cond(phi @ phi.T) < 1e3:
            break
    ys = rng.standard_normal((n, k)) @ f(x) + 0.1 * rng.standard_normal((n, m))
    return fit_prior_continuous(f, x, ys)


@given(st.integers(0, 1000))
def test_interpolates_queries(seed):
    rng = np.random.default_rng(seed)
    prior = _fitted_prior(rng)
    xq = rng.uniform(size=(3, 1))
    y = rng.standard_normal(3)
    post = estimate_posterior_continuous(prior, History(list(xq), list(y)))
    pred = predict(post, xq)
    np.testing.assert_allclose(pred.mean, y, atol=1e-8)
    np.testing.assert_allclose(pred.var, 0.0, atol=1e-8)
    np.testing.assert_allclose(post.sigma_hat_t, post.sigma_hat_t.T)


def test_predict_zero_sigma():
    f = constant_features()
    post = ContinuousPosterior(np.array([1.5]), np.zeros((1, 1)), 1, f)
    assert tuple(predict(post, np.array([0.2]))) == (1.5, 0.0)


def test_predict_clips_negative_variance():
    f = constant_features()
    pred = predict(ContinuousPosterior(np.zeros(1), -np.eye(1), 1, f), np.array([0.0]))
    assert pred.var == 0.0 and pred.raw_var == -1.0


def test_discrete_and_continuous_paths_agree(rng):
    prior = _fitted_prior(rng, k=6, m=30)
    cands = rng.uniform(size=(10, 1))
    phi = prior.features(cands)
    disc = DiscretePriorEstimate(phi.T @ prior.u_hat, phi.T @ prior.sigma_hat @ phi, prior.n_train)
    hist_idx = History([2, 7, 4], [0.4, -0.1, 1.2])
    d_post = estimate_posterior_discrete(disc, hist_idx)
    c_post = estimate_posterior_continuous(prior, hist_idx, candidates=cands)
    mean, var = predict(c_post, cands)
    np.testing.assert_allclose(mean, d_post.mean_hat_t, atol=1e-8)
    np.testing.assert_allclose(var, d_post.var_hat_t, atol=1e-8)


def test_exact_weight_posterior_matches_gp_core(rng):
    f = make_cosine_features(1, 5, 0.5, 2)
    u, a = rng.standard_normal(5), rng.standard_normal((5, 5))
    sigma = a @ a.T / 5
    grid = np.linspace(0, 1, 12)[:, None]
    mean, cov = induced_prior(u, sigma, f, grid)
    gp = GpPrior(mean, cov, 0.2)
    hist = History([1, 5, 9], [0.3, -0.4, 0.8])
    ref = exact_posterior(gp, hist)
    post = exact_weight_posterior(u, sigma, f, hist, 0.2, candidates=grid)
    m, v = predict(post, grid)
    np.testing.assert_allclose(m, ref.mean_t, atol=1e-8)
    np.testing.assert_allclose(v, ref.var_t, atol=1e-8)


def test_bar_sigma_sq_examples():
    f = FeatureMap(np.zeros((2, 1)), np.array([0.0, np.pi / 2]), 1.0)  # Phi = (1, 0)
    prior = ContinuousPriorEstimate(f, np.zeros(2), np.eye(2), 5, np.eye(2))
    assert bar_sigma_sq(prior, 1.0, np.array([0.3])) == pytest.approx(1.0)
    assert bar_sigma_sq(prior, 0.0, np.array([0.3])) == 0.0
    assert bar_sigma_sq(prior, 3.0, np.array([0.3])) == pytest.approx(9.0)


def test_bar_sigma_sq_homogeneous(rng):
    prior = _fitted_prior(rng)
    x = rng.uniform(size=(4, 1))
    np.testing.assert_allclose(bar_sigma_sq(prior, 0.3, x), 9 * bar_sigma_sq(prior, 0.1, x))


def test_csv_roundtrip(tmp_path, rng):
    x, ys = rng.uniform(size=(5, 2)), rng.standard_normal((3, 5))
    write_continuous_csv(x, ys, tmp_path / "c.csv")
    x2, ys2 = read_continuous_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(x, x2)
    np.testing.assert_array_equal(ys, ys2)


def test_csv_rejects_misaligned_grid(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("task_id,x_1,y\n0,0.1,1\n0,0.2,2\n1,0.1,1\n1,0.3,2\n")
    with pytest.raises(ValueError, match="common input grid"):
        read_continuous_csv(p)


def test_fit_matches_normal_equations_when_well_conditioned(rng):
    design = rng.standard_normal((4, 30))
    ys = rng.standard_normal((5, 30))
    ref = np.linalg.solve(design @ design.T, design @ ys.T).T
    np.testing.assert_allclose(fit_task_weights(design, ys), ref, atol=1e-12)


def test_fit_warns_on_ill_conditioned_design(caplog):
    x = np.linspace(0, 1, 300)[:, None]
    design = np.vstack([np.cos(x[:, 0]), np.cos(x[:, 0] + 1e-9), np.sin(3 * x[:, 0])])
    with caplog.at_level("WARNING", logger="metabo.prior_continuous"):
        fit_task_weights(design, np.ones(300))
    assert "condition number" in caplog.text
