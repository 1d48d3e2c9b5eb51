"""Estimators for the reported statistics: survival curves, means with
confidence intervals, bound-state probability curves, and empirical
convergence orders. All estimators are pure functions of their inputs."""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

__all__ = [
    "SurvivalCurve",
    "ecdf_survival",
    "mean_ci",
    "pbound_curve",
    "convergence_report",
    "dkw_epsilon",
]


@dataclass
class SurvivalCurve:
    """Right-continuous step estimate of P[T > t]."""

    times: np.ndarray       # sorted unique event times
    survival: np.ndarray    # value of S just after each time
    n: int

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate([[1.0], self.survival])
        return vals[idx]


def ecdf_survival(samples):
    """Empirical survival S(t) = 1 - ECDF(t); ties share one step."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    s = np.sort(samples)
    times, counts = np.unique(s, return_counts=True)
    survival = 1.0 - np.cumsum(counts) / len(s)
    return SurvivalCurve(times=times, survival=survival, n=len(s))


def mean_ci(samples, level=0.95):
    """(sample mean, normal-approximation halfwidth)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError("need at least two samples")
    z = norm.ppf(0.5 + level / 2)
    return float(samples.mean()), float(z * samples.std(ddof=1) / np.sqrt(len(samples)))


def pbound_curve(bound_indicators, level=0.95):
    """Binomial proportion per time column with normal-approximation CI.

    bound_indicators: (n_realizations, n_times) booleans or 0/1.
    Returns (p, halfwidth) arrays.
    """
    ind = np.asarray(bound_indicators)
    if ind.ndim != 2 or ind.shape[1] == 0:
        raise ValueError("need a (realizations, times) indicator array")
    n = ind.shape[0]
    p = ind.mean(axis=0)
    z = norm.ppf(0.5 + level / 2)
    half = z * np.sqrt(p * (1 - p) / n)
    return p, half


def convergence_report(values, hs, ci_halfwidths=None):
    """Successive differences and empirical orders across refinement levels.

    A difference is resolvable when it exceeds the combined CI halfwidths of
    its two levels; orders involving an unresolvable difference are reported
    as noise-limited (NaN order, resolvable flag False).
    """
    v = np.asarray(values, dtype=float)
    h = np.asarray(hs, dtype=float)
    if len(v) != len(h) or len(v) < 2:
        raise ValueError("need matching values and mesh sizes, two levels minimum")
    ci = np.zeros(len(v)) if ci_halfwidths is None else np.asarray(ci_halfwidths, dtype=float)
    diffs = np.abs(np.diff(v))
    resolvable = diffs > (ci[:-1] + ci[1:])
    orders = np.full(max(len(diffs) - 1, 0), np.nan)
    ratios = np.full(max(len(diffs) - 1, 0), np.nan)
    for m in range(len(orders)):
        if diffs[m + 1] > 0:
            ratios[m] = diffs[m] / diffs[m + 1]
        if resolvable[m] and resolvable[m + 1] and diffs[m + 1] > 0:
            orders[m] = np.log(ratios[m]) / np.log(h[m] / h[m + 1])
    return {
        "differences": diffs,
        "ratios": ratios,
        "orders": orders,
        "resolvable": resolvable,
        "noise_limited": bool(not np.all(resolvable)),
    }


def dkw_epsilon(n, alpha=0.01):
    """Dvoretzky-Kiefer-Wolfowitz band halfwidth at confidence 1 - alpha."""
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * n)))
