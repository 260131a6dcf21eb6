"""Hot numeric kernels with numba and pure-numpy implementations.

Each public kernel ``foo`` dispatches to ``foo_numba`` or ``foo_numpy``
according to :data:`metabo._accel.USE_NUMBA`. Both variants compute the same
quantity to rounding error.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, optional_njit

# ----------------------------------------------------------------------------
# squared-exponential Gram matrix


def sq_exp_gram_numpy(a, b, lengthscale, signal_var):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(sq, 0.0, out=sq)
    return signal_var * np.exp(-0.5 * sq / (lengthscale * lengthscale))


@optional_njit(cache=True)
def _sq_exp_gram_loop(a, b, lengthscale, signal_var):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    inv = 0.5 / (lengthscale * lengthscale)
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            out[i, j] = signal_var * np.exp(-s * inv)
    return out


def sq_exp_gram_numba(a, b, lengthscale, signal_var):
    return _sq_exp_gram_loop(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        float(lengthscale),
        float(signal_var),
    )


# ----------------------------------------------------------------------------
# random cosine features, returned as a K x n matrix (one column per input)


def cosine_features_numpy(x, frequencies, phases, scale):
    x = np.asarray(x, dtype=np.float64)
    return scale * np.cos(frequencies @ x.T + phases[:, None])


@optional_njit(cache=True)
def _cosine_features_loop(x, frequencies, phases, scale):
    n, d = x.shape
    k_feat = frequencies.shape[0]
    out = np.empty((k_feat, n))
    for s in range(k_feat):
        for i in range(n):
            acc = phases[s]
            for j in range(d):
                acc += frequencies[s, j] * x[i, j]
            out[s, i] = scale * np.cos(acc)
    return out


def cosine_features_numba(x, frequencies, phases, scale):
    return _cosine_features_loop(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(frequencies, dtype=np.float64),
        np.ascontiguousarray(phases, dtype=np.float64),
        float(scale),
    )


# ----------------------------------------------------------------------------
# batched Schur-complement conditioning
#
# For each replication r: condition (mean[r], cov[r]) on exact values y at
# indices idx, with no added noise, and scale the conditional variance by
# var_factor. Returns (R, M) conditional means and variances.


def batched_condition_numpy(mean, cov, idx, y, var_factor):
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    diag = np.diagonal(cov, axis1=1, axis2=2)
    if idx.size == 0:
        return mean.copy(), var_factor * diag.copy()
    cross = cov[:, :, idx]  # (R, M, t)
    inner = cross[:, idx, :]  # (R, t, t)
    resid = np.asarray(y, dtype=np.float64)[None, :] - mean[:, idx]
    alpha = np.linalg.solve(inner, resid[:, :, None])[:, :, 0]
    gain = np.linalg.solve(inner, np.swapaxes(cross, 1, 2))  # (R, t, M)
    post_mean = mean + np.einsum("rmt,rt->rm", cross, alpha)
    post_var = diag - np.einsum("rmt,rtm->rm", cross, gain)
    return post_mean, var_factor * post_var


@optional_njit(cache=True)
def _batched_condition_loop(mean, cov, idx, y, var_factor):
    n_rep, m = mean.shape
    t = idx.shape[0]
    post_mean = np.empty((n_rep, m))
    post_var = np.empty((n_rep, m))
    inner = np.empty((t, t))
    cross = np.empty((t, m))
    resid = np.empty(t)
    for r in range(n_rep):
        for a in range(t):
            resid[a] = y[a] - mean[r, idx[a]]
            for b in range(t):
                inner[a, b] = cov[r, idx[a], idx[b]]
            for j in range(m):
                cross[a, j] = cov[r, idx[a], j]
        alpha = np.linalg.solve(inner, resid)
        gain = np.linalg.solve(inner, cross)
        for j in range(m):
            mu = mean[r, j]
            var = cov[r, j, j]
            for a in range(t):
                mu += cross[a, j] * alpha[a]
                var -= cross[a, j] * gain[a, j]
            post_mean[r, j] = mu
            post_var[r, j] = var_factor * var
    return post_mean, post_var


def batched_condition_numba(mean, cov, idx, y, var_factor):
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.size == 0:
        return batched_condition_numpy(mean, cov, idx, y, var_factor)
    return _batched_condition_loop(
        np.ascontiguousarray(mean, dtype=np.float64),
        np.ascontiguousarray(cov, dtype=np.float64),
        idx,
        np.ascontiguousarray(y, dtype=np.float64),
        float(var_factor),
    )


# ----------------------------------------------------------------------------
# zero-mean squared-exponential log marginal likelihood over a hyper grid
#
# sqdist: (t, t) squared distances between queried inputs; y: (t,) data.
# Returns an array of shape (len(lengthscales), len(signal_vars),
# len(noise_vars)); non-factorizable entries are -inf.

_LOG_2PI = float(np.log(2.0 * np.pi))


def grid_log_marglik_numpy(sqdist, y, lengthscales, signal_vars, noise_vars):
    sqdist = np.asarray(sqdist, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ls = np.asarray(lengthscales, dtype=np.float64)
    sv = np.asarray(signal_vars, dtype=np.float64)
    nv = np.asarray(noise_vars, dtype=np.float64)
    t = y.shape[0]
    if t == 0:
        return np.zeros((ls.size, sv.size, nv.size))
    base = np.exp(-0.5 * sqdist[None, :, :] / (ls[:, None, None] ** 2))  # (L, t, t)
    mats = (
        sv[None, :, None, None, None] * base[:, None, None, :, :]
        + nv[None, None, :, None, None] * np.eye(t)[None, None, None, :, :]
    )  # (L, S, Nv, t, t)
    flat = mats.reshape(-1, t, t)
    out = np.full(flat.shape[0], -np.inf)
    try:
        chol = np.linalg.cholesky(flat)
        ok = np.ones(flat.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        chol = np.zeros_like(flat)
        ok = np.zeros(flat.shape[0], dtype=bool)
        for g in range(flat.shape[0]):
            try:
                chol[g] = np.linalg.cholesky(flat[g])
                ok[g] = True
            except np.linalg.LinAlgError:
                pass
    z = np.linalg.solve(chol[ok], np.broadcast_to(y, (int(ok.sum()), t))[:, :, None])[:, :, 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol[ok], axis1=1, axis2=2)), axis=1)
    out[ok] = -0.5 * np.sum(z * z, axis=1) - 0.5 * logdet - 0.5 * t * _LOG_2PI
    return out.reshape(ls.size, sv.size, nv.size)


@optional_njit(cache=True)
def _grid_log_marglik_loop(sqdist, y, ls, sv, nv):
    t = y.shape[0]
    out = np.empty((ls.shape[0], sv.shape[0], nv.shape[0]))
    base = np.empty((t, t))
    mat = np.empty((t, t))
    lower = np.empty((t, t))
    z = np.empty(t)
    for a in range(ls.shape[0]):
        inv = 0.5 / (ls[a] * ls[a])
        for i in range(t):
            for j in range(t):
                base[i, j] = np.exp(-sqdist[i, j] * inv)
        for b in range(sv.shape[0]):
            for c in range(nv.shape[0]):
                for i in range(t):
                    for j in range(t):
                        mat[i, j] = sv[b] * base[i, j]
                    mat[i, i] += nv[c]
                # in-place Cholesky, lower triangle
                ok = True
                logdet = 0.0
                for j in range(t):
                    s = mat[j, j]
                    for k in range(j):
                        s -= lower[j, k] * lower[j, k]
                    if s <= 0.0:
                        ok = False
                        break
                    d = np.sqrt(s)
                    lower[j, j] = d
                    logdet += 2.0 * np.log(d)
                    for i in range(j + 1, t):
                        s2 = mat[i, j]
                        for k in range(j):
                            s2 -= lower[i, k] * lower[j, k]
                        lower[i, j] = s2 / d
                if not ok:
                    out[a, b, c] = -np.inf
                    continue
                quad = 0.0
                for i in range(t):
                    s3 = y[i]
                    for k in range(i):
                        s3 -= lower[i, k] * z[k]
                    z[i] = s3 / lower[i, i]
                    quad += z[i] * z[i]
                out[a, b, c] = -0.5 * quad - 0.5 * logdet - 0.5 * t * 1.8378770664093453
    return out


def grid_log_marglik_numba(sqdist, y, lengthscales, signal_vars, noise_vars):
    return _grid_log_marglik_loop(
        np.ascontiguousarray(sqdist, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(lengthscales, dtype=np.float64),
        np.ascontiguousarray(signal_vars, dtype=np.float64),
        np.ascontiguousarray(noise_vars, dtype=np.float64),
    )


if USE_NUMBA:
    sq_exp_gram = sq_exp_gram_numba
    cosine_features = cosine_features_numba
    batched_condition = batched_condition_numba
    grid_log_marglik = grid_log_marglik_numba
else:
    sq_exp_gram = sq_exp_gram_numpy
    cosine_features = cosine_features_numpy
    batched_condition = batched_condition_numpy
    grid_log_marglik = grid_log_marglik_numpy

BACKENDS = {
    "numpy": {
        "sq_exp_gram": sq_exp_gram_numpy,
        "cosine_features": cosine_features_numpy,
        "batched_condition": batched_condition_numpy,
        "grid_log_marglik": grid_log_marglik_numpy,
    },
    "numba": {
        "sq_exp_gram": sq_exp_gram_numba,
        "cosine_features": cosine_features_numba,
        "batched_condition": batched_condition_numba,
        "grid_log_marglik": grid_log_marglik_numba,
    },
}
