import json

import numpy as np
import pytest

from metabo.bench import (ExperimentConfig, PlainMLEModel, continuous_preset, discrete_preset,
                          generate_offline_dataset, run_experiment, write_dataset)
from metabo.gp_core import History


def small(**kw):
    base = dict(M=40, N=30, T=8, trials=4, methods=("pembo-ucb", "oracle-ucb", "random"))
    base.update(kw)
    return discrete_preset(**base)


def test_full_mask_without_masking():
    data = generate_offline_dataset(small())
    assert data.offline.is_complete


def test_noiseless_single_task_row_is_function():
    data = generate_offline_dataset(small(N=1, noise_sd=0.0, methods=("random",)))
    np.testing.assert_array_equal(data.offline.values[0], data.functions[0])


def test_mask_fraction():
    data = generate_offline_dataset(small(mask_rate=0.4))
    assert abs((~data.offline.mask).mean() - 0.4) < 0.01


def test_column_variance_matches_kernel():
    cfg = small(M=8, N=5000, methods=("random",))
    data = generate_offline_dataset(cfg)
    vals = data.offline.values
    target = np.diag(data.truth.cov) + cfg.noise_sd**2
    var = vals.var(axis=0, ddof=1)
    # sample variance of Gaussian data has sd ~ var * sqrt(2 / (N - 1))
    se = target * np.sqrt(2.0 / (cfg.N - 1))
    assert np.all(np.abs(var - target) < 5 * se)


def test_config_validation():
    with pytest.raises(ValueError):
        discrete_preset(N=10, T=8)
    with pytest.raises(ValueError):
        discrete_preset(methods=("nope",))
    with pytest.raises(ValueError):
        continuous_preset(mask_rate=0.2)
    with pytest.raises(ValueError):
        discrete_preset(trials=0)


def test_random_noiseless_exhausts():
    cfg = small(M=20, T=20, noise_sd=0.0, trials=6, methods=("random",))
    res = run_experiment(cfg)
    r = res.curves("random")[:, :, 1].mean(axis=0)
    assert np.all(np.diff(r) <= 0)
    assert r[-1] == 0.0


def test_oracle_not_worse_than_random():
    cfg = discrete_preset(methods=("oracle-ucb", "random"))
    res = run_experiment(cfg)
    assert res.final("oracle-ucb").mean() <= res.final("random").mean()


def test_csv_is_deterministic_and_job_independent():
    cfg = small()
    a = run_experiment(cfg, jobs=1)
    b = run_experiment(cfg, jobs=1)
    c = run_experiment(cfg, jobs=2)
    assert a.rows_csv() == b.rows_csv() == c.rows_csv()
    assert a.aggregate_csv() == c.aggregate_csv()
    header = a.rows_csv().splitlines()[0]
    assert header == "method,trial,t,y_best,r_t,R_t"
    assert a.aggregate_csv().splitlines()[0] == "method,t,mean_r,se_r,mean_R,se_R,mean_ybest,se_ybest"


def test_paired_noise_across_methods():
    res = run_experiment(small(methods=("oracle-ucb", "random"), trials=2))
    assert not res.skipped
    assert res.curves("oracle-ucb").shape == (2, 8, 3)


def test_plain_mle_grid_choice():
    x = np.linspace(0, 1, 30)[:, None]
    model = PlainMLEModel(x)
    h = History(list(range(0, 30, 3)), np.sin(6 * x[::3, 0]))
    ls, sv, nsd = model.select_hyperparameters(h)
    assert ls in model.lengthscales and sv in model.signal_vars and nsd in model.noise_sds
    mean, var = model.infer(h)
    assert mean.shape == (30,) and np.all(var >= 0)


def test_write_dataset(tmp_path):
    data = generate_offline_dataset(small(mask_rate=0.25))
    csv_path, side = write_dataset(data, tmp_path / "d.csv")
    lines = csv_path.read_text().splitlines()
    assert len(lines) - 1 == data.offline.mask.sum()
    meta = json.loads(side.read_text())
    assert isinstance(meta, dict) and meta


def test_continuous_smoke():
    cfg = continuous_preset(M=60, N=40, K=20, T=5, trials=2)
    res = run_experiment(cfg)
    assert not res.skipped
    assert set(np.unique([row[0] for row in res.aggregate()])) == set(cfg.methods)


def test_train_fraction_uses_subset():
    cfg = ExperimentConfig(N=100, train_fraction=0.25, T=5, methods=("random",))
    assert cfg.n_used == 25
