"""Time the numba and numpy variants of each hot kernel on desk-scale inputs.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is called once untimed (numba compiles on first call, or loads
from the on-disk cache), then timed over ``--repeat`` calls; the best time
is reported along with the max relative difference between the two outputs.
"""

import argparse
import time

import numpy as np

from metabo import kernels
from metabo._accel import HAVE_NUMBA


def cases(rng):
    x = rng.uniform(size=(300, 2))
    freqs, phases = rng.standard_normal((80, 2)) / 0.3, rng.uniform(0, 2 * np.pi, 80)
    m, r, t = 10, 1000, 3
    a = rng.standard_normal((r, 40, m))
    cov = np.einsum("rni,rnj->rij", a, a) / 39
    mean = rng.standard_normal((r, m))
    xq = rng.uniform(size=(40, 2))
    sq = np.sum((xq[:, None] - xq[None]) ** 2, axis=-1)
    return {
        "sq_exp_gram (300x300)": ("sq_exp_gram", (x, x, 0.3, 1.0)),
        "cosine_features (K=80, 300 pts)": ("cosine_features", (x, freqs, phases, np.sqrt(2 / 80))),
        "batched_condition (R=1000, M=10)": ("batched_condition",
                                             (mean, cov, np.arange(t), rng.standard_normal(t), 39 / 36)),
        "grid_log_marglik (10x10x5, t=40)": ("grid_log_marglik",
                                             (sq, rng.standard_normal(40), np.logspace(-1.5, 0.5, 10),
                                              np.logspace(-1, 1, 10), np.logspace(-3, 0, 5) ** 2)),
    }


def best_time(fn, args, repeat):
    out = fn(*args)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<36} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'rel diff':>10}")
    for label, (name, call) in cases(rng).items():
        t_np, out_np = best_time(kernels.BACKENDS["numpy"][name], call, args.repeat)
        if not HAVE_NUMBA:
            print(f"{label:<36} {1e3 * t_np:>10.3f}")
            continue
        t_nb, out_nb = best_time(kernels.BACKENDS["numba"][name], call, args.repeat)
        outs = zip(out_np, out_nb) if isinstance(out_np, tuple) else [(out_np, out_nb)]
        diff = max(float(np.max(np.abs(np.asarray(u) - np.asarray(v)) / np.maximum(np.abs(u), 1.0)))
                   for u, v in outs)
        print(f"{label:<36} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>8.2f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
