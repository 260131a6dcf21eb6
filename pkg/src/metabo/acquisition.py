"""GP-UCB and PI scores with the exploration schedule used by meta BO."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

PI_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class AcquisitionConfig:
    """Acquisition rule settings.

    ``fixed_zeta`` replaces the schedule by a constant (used by the
    known-prior oracle baseline).
    """

    kind: Literal["UCB", "PI"] = "UCB"
    delta: float = 0.1
    f_star_hat: float | None = None
    n_train: int | None = None
    fixed_zeta: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in ("UCB", "PI"):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if kind == "PI" and self.f_star_hat is None:
            raise ValueError("PI requires f_star_hat")
        if kind == "UCB" and self.fixed_zeta is None and self.n_train is None:
            raise ValueError("UCB schedule requires n_train")

    def zeta(self, t: int) -> float:
        if self.fixed_zeta is not None:
            return float(self.fixed_zeta)
        return ucb_zeta(self.n_train, t, self.delta)


def ucb_zeta(n: int, t: int, delta: float) -> float:
    """Exploration weight for the t-th GP-UCB query given N offline tasks.

    Requires ``N - t > 4 log(6 / delta)`` so that the denominator is real.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    l6 = math.log(6.0 / delta)
    l3 = math.log(3.0 / delta)
    if n - t <= 4.0 * l6 or n - t - 1 <= 0:
        raise ValueError(f"N too small for (t, delta): need N - t > 4 log(6/delta) = {4 * l6:.4g}")
    iota = math.sqrt(6.0 * (n - 3 + t + 2.0 * math.sqrt(t * l6) + 2.0 * l6) / (delta * n * (n - t - 1)))
    denom = math.sqrt(1.0 - 2.0 * math.sqrt(l6 / (n - t)))
    return (iota + math.sqrt(2.0 * l3)) / denom


def oracle_zeta(delta: float) -> float:
    """Constant exploration weight ``sqrt(2 log(3/delta))`` for a known prior."""
    return math.sqrt(2.0 * math.log(3.0 / delta))


def score(kind: str, mean_hat, var_hat, zeta_or_fstar: float):
    """Acquisition value; works elementwise on arrays.

    UCB: ``mean + zeta * sqrt(var)``. PI: ``(mean - f_star) / sqrt(var)``
    with the variance floored at ``PI_VAR_FLOOR``.
    """
    mean_hat = np.asarray(mean_hat, dtype=float)
    var_hat = np.asarray(var_hat, dtype=float)
    if np.any(var_hat < 0):
        raise ValueError("var_hat must be nonnegative")
    kind = kind.upper()
    if kind == "UCB":
        out = mean_hat + zeta_or_fstar * np.sqrt(var_hat)
    elif kind == "PI":
        out = (mean_hat - zeta_or_fstar) / np.sqrt(np.maximum(var_hat, PI_VAR_FLOOR))
    else:
        raise ValueError(f"unknown acquisition kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def select_next(scores, queried=()) -> int:
    """Index of the best unqueried score; ties go to the lowest index."""
    scores = np.asarray(scores, dtype=float)
    masked = scores.copy()
    queried = np.fromiter((int(q) for q in queried), dtype=np.int64)
    if queried.size:
        masked[queried] = -np.inf
    free = np.ones(scores.size, dtype=bool)
    free[queried] = False
    if not free.any():
        raise ValueError("candidate set exhausted")
    masked[np.isnan(masked)] = -np.inf
    best = masked[free].max()
    # np.argmax returns the first maximizer
    return int(np.flatnonzero(free & (masked == best))[0])


def default_pi_target(offline_values: np.ndarray, cov_hat_diag: np.ndarray,
                      rule: str = "inflated") -> float:
    """PI target from the offline data.

    ``"max"``: largest offline observation. ``"inflated"``: that maximum plus
    three estimated prior standard deviations.
    """
    top = float(np.nanmax(offline_values))
    if rule == "max":
        return top
    if rule == "inflated":
        return top + 3.0 * math.sqrt(max(float(np.max(cov_hat_diag)), 0.0))
    raise ValueError(f"unknown PI target rule {rule!r}")
