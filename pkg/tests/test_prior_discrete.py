import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from metabo.gp_core import History
from metabo.prior_discrete import (
    DiscretePriorEstimate,
    OfflineMatrix,
    concentration_constants,
    estimate_posterior_discrete,
    estimate_prior_discrete,
    kt_ratio_bounds,
    read_offline_csv,
    write_offline_csv,
)

mp.mp.dps = 50


def mp_concentration(n, t, delta):
    l4 = mp.log(mp.mpf(4) / delta)
    a = 4 * (n - 2 + t + 2 * mp.sqrt(t * l4) + 2 * l4) / (delta * n * (n - t - 2))
    b = l4 / (n - t - 1)
    return a, b


def test_prior_hand_example():
    est = estimate_prior_discrete(OfflineMatrix.complete([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_allclose(est.mean_hat, [2.0, 3.0])
    np.testing.assert_allclose(est.cov_hat, [[2.0, 2.0], [2.0, 2.0]])
    assert est.n_train == 2


def test_identical_rows_zero_cov():
    est = estimate_prior_discrete(OfflineMatrix.complete(np.tile([1.0, -2.0, 3.0], (5, 1))))
    np.testing.assert_array_equal(est.cov_hat, np.zeros((3, 3)))


@given(hnp.arrays(float, (6, 3), elements=st.floats(-10, 10)), st.floats(-5, 5))
def test_affine_equivariance(y, c):
    a = estimate_prior_discrete(OfflineMatrix.complete(y))
    b = estimate_prior_discrete(OfflineMatrix.complete(c * y))
    np.testing.assert_allclose(b.mean_hat, c * a.mean_hat, atol=1e-9)
    np.testing.assert_allclose(b.cov_hat, c * c * a.cov_hat, atol=1e-7)


def test_insufficient_tasks():
    with pytest.raises(ValueError, match="insufficient tasks"):
        estimate_prior_discrete(OfflineMatrix.complete([[1.0, 2.0]]))


def test_masked_matrix_rejected():
    data = OfflineMatrix(np.ones((3, 2)), np.array([[True, True], [True, False], [True, True]]))
    with pytest.raises(ValueError):
        estimate_prior_discrete(data)


def test_masked_entries_are_nan():
    data = OfflineMatrix(np.ones((2, 2)), np.array([[True, False], [True, True]]))
    assert math.isnan(data.values[0, 1])
    assert not data.is_complete


def test_posterior_t0_identity():
    prior = DiscretePriorEstimate(np.array([0.5, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]), 10)
    post = estimate_posterior_discrete(prior, History())
    np.testing.assert_array_equal(post.mean_hat_t, prior.mean_hat)
    np.testing.assert_array_equal(post.var_hat_t, [2.0, 1.0])


def test_posterior_hand_example():
    prior = DiscretePriorEstimate(np.zeros(2), np.eye(2), 5)
    post = estimate_posterior_discrete(prior, History([0], [2.0]))
    np.testing.assert_allclose(post.mean_hat_t, [2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(post.var_hat_t, [0.0, 4.0 / 3.0], atol=1e-12)


@given(st.integers(0, 10_000))
def test_posterior_interpolates_at_queries(seed):
    rng = np.random.default_rng(seed)
    m, n = 8, 30
    est = estimate_prior_discrete(OfflineMatrix.complete(rng.standard_normal((n, m))))
    t = int(rng.integers(1, 6))
    idx = rng.choice(m, t, replace=False)
    y = rng.standard_normal(t)
    post = estimate_posterior_discrete(est, History(list(idx), list(y)), full_cov=True)
    np.testing.assert_allclose(post.mean_hat_t[idx], y, atol=1e-8)
    np.testing.assert_allclose(post.var_hat_t[idx], 0.0, atol=1e-8)
    assert np.all(post.var_hat_t >= -1e-8)
    np.testing.assert_allclose(np.diag(post.cov_hat_t), post.var_hat_t, atol=1e-10)


def test_posterior_permutation_equivariance(rng):
    m, n = 6, 20
    y_off = rng.standard_normal((n, m))
    perm = rng.permutation(m)
    a = estimate_prior_discrete(OfflineMatrix.complete(y_off))
    b = estimate_prior_discrete(OfflineMatrix.complete(y_off[:, perm]))
    inv = np.argsort(perm)
    pa = estimate_posterior_discrete(a, History([1, 4], [0.3, -0.2]))
    pb = estimate_posterior_discrete(b, History([int(inv[1]), int(inv[4])], [0.3, -0.2]))
    np.testing.assert_allclose(pb.mean_hat_t, pa.mean_hat_t[perm], atol=1e-10)
    np.testing.assert_allclose(pb.var_hat_t, pa.var_hat_t[perm], atol=1e-10)


def test_posterior_training_set_too_small():
    prior = DiscretePriorEstimate(np.zeros(5), np.eye(5), 4)
    with pytest.raises(ValueError, match="training set too small"):
        estimate_posterior_discrete(prior, History([0, 1, 2], [0.0, 0.0, 0.0]))


def test_posterior_rejects_repeats():
    prior = DiscretePriorEstimate(np.zeros(3), np.eye(3), 10)
    with pytest.raises(ValueError, match="repeated"):
        estimate_posterior_discrete(prior, History([1, 1], [0.0, 0.1]))


def test_concentration_anchor():
    delta = 4.0 / math.e**2
    a, b = concentration_constants(12, 2, delta)
    assert a == pytest.approx(1.5394, abs=5e-5)
    assert b == pytest.approx(2.0 / 9.0, rel=1e-12)
    ma, mb = mp_concentration(12, 2, 4 / mp.e**2)
    assert a == pytest.approx(float(ma), rel=1e-12)


def test_concentration_precondition():
    # N must be at least t + 3
    with pytest.raises(ValueError):
        concentration_constants(11, 9, 4.0 / math.e**2)
    assert concentration_constants(12, 9, 4.0 / math.e**2)[1] == pytest.approx(1.0)


def test_concentration_limits_decrease_in_n():
    vals = [concentration_constants(n, 0, 0.1) for n in (10, 100, 1000, 10_000, 1_000_000)]
    assert all(x[0] > y[0] and x[1] > y[1] for x, y in zip(vals, vals[1:]))
    assert vals[-1][0] < 1e-3 and vals[-1][1] < 1e-3


@given(st.integers(5, 5000), st.integers(0, 50), st.floats(0.01, 0.99))
def test_concentration_matches_mpmath(n, t, delta):
    if n < t + 3:
        return
    a, b = concentration_constants(n, t, delta)
    ma, mb = mp_concentration(n, t, mp.mpf(delta))
    assert a == pytest.approx(float(ma), rel=1e-12)
    assert b == pytest.approx(float(mb), rel=1e-12)


def test_kt_ratio_bounds():
    lo, hi = kt_ratio_bounds(0.25)
    assert (lo, hi) == (0.0, 2.5)


def test_csv_roundtrip(tmp_path):
    values = np.arange(6, dtype=float).reshape(2, 3) / 7
    mask = np.array([[True, False, True], [True, True, True]])
    data = OfflineMatrix(values, mask)
    write_offline_csv(data, tmp_path / "d.csv")
    back = read_offline_csv(tmp_path / "d.csv", n_inputs=3)
    np.testing.assert_array_equal(back.mask, mask)
    np.testing.assert_array_equal(back.values[mask], values[mask])


def test_csv_rejects_duplicates(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("task_id,input_index,y\n0,0,1.0\n0,0,2.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        read_offline_csv(p)


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,c\n0,0,1.0\n")
    with pytest.raises(ValueError, match="header"):
        read_offline_csv(p)
