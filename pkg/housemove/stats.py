"""Weight bookkeeping and two-sample statistics shared by the samplers."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

__all__ = [
    "normalized_weights",
    "effective_sample_size",
    "log_mean_exp",
    "ks_two_sample",
    "weighted_ks",
    "replicate_effective_size",
    "ks_noise_level",
]


def normalized_weights(log_weights: np.ndarray) -> np.ndarray:
    """Weights summing to one, exponentiated after max-log subtraction."""

    lw = np.asarray(log_weights, dtype=float)
    w = np.exp(lw - np.max(lw))
    return w / np.sum(w)


def effective_sample_size(log_weights: np.ndarray) -> float:
    """(Σw)² / Σw²."""

    lw = np.asarray(log_weights, dtype=float)
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        return 0.0
    w = np.exp(lw - np.max(lw))
    return float(np.sum(w) ** 2 / np.sum(w * w))


def log_mean_exp(log_values: np.ndarray) -> float:
    lv = np.asarray(log_values, dtype=float)
    return float(logsumexp(lv) - np.log(lv.size))


def ks_two_sample(xs, ys) -> tuple[float, float]:
    """Two-sample KS statistic with its asymptotic p-value."""

    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("ks_two_sample needs two non-empty samples")
    res = stats.ks_2samp(xs, ys, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _weighted_ecdf(values: np.ndarray, weights: np.ndarray, at: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cdf = np.cumsum(w) / np.sum(w)
    idx = np.searchsorted(v, at, side="right")
    return np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)


def weighted_ks(xs, wx, ys, wy, sizes: tuple[float, float] | None = None) -> tuple[float, float]:
    """KS distance between weighted ECDFs; p-value from effective sizes.

    Weights act as fractional counts and the asymptotic Kolmogorov law is
    evaluated at √(n_x n_y / (n_x + n_y)) · D.  ``sizes`` gives n_x, n_y
    directly (e.g. from :func:`replicate_effective_size` for resampled
    ensembles); by default the weight ESS of each side is used.
    """

    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    wx = np.asarray(wx, dtype=float).ravel()
    wy = np.asarray(wy, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("weighted_ks needs two non-empty samples")
    if np.sum(wx) <= 0 or np.sum(wy) <= 0:
        raise ValueError("weighted_ks needs positive total weight on both sides")
    grid = np.concatenate([xs, ys])
    d = float(np.max(np.abs(_weighted_ecdf(xs, wx, grid) - _weighted_ecdf(ys, wy, grid))))
    if sizes is None:
        nx = np.sum(wx) ** 2 / np.sum(wx * wx)
        ny = np.sum(wy) ** 2 / np.sum(wy * wy)
    else:
        nx, ny = sizes
        if nx <= 0 or ny <= 0:
            raise ValueError(f"effective sizes must be positive, got {sizes}")
    ne = nx * ny / (nx + ny)
    return d, float(stats.kstwobign.sf(np.sqrt(ne) * d))


def replicate_effective_size(
    samples: Sequence[tuple[np.ndarray, np.ndarray]],
    probs: Sequence[float] = tuple(i / 10 for i in range(1, 10)),
) -> float:
    """Effective sample size of pooled replicates, from their between-replicate spread.

    ``samples`` holds one ``(values, weights)`` pair per independent
    replicate.  At each pooled quantile the replicate ECDF values have a
    spread whose variance of the mean, v, gives n = F(1 − F)/v; the median
    over ``probs`` is returned, capped at the pooled sample count.
    Resampled particles share ancestors, so this is usually far below the
    weight ESS.
    """

    if len(samples) < 2:
        raise ValueError("replicate_effective_size needs at least two replicates")
    values = [np.asarray(v, dtype=float).ravel() for v, _ in samples]
    weights = [np.asarray(w, dtype=float).ravel() / np.sum(w) for _, w in samples]
    pooled_v = np.concatenate(values)
    pooled_w = np.concatenate(weights)
    cap = float(pooled_v.size)
    order = np.argsort(pooled_v, kind="stable")
    cdf = np.cumsum(pooled_w[order]) / np.sum(pooled_w)
    at = pooled_v[order][np.minimum(np.searchsorted(cdf, probs), pooled_v.size - 1)]
    per_rep = np.stack([_weighted_ecdf(v, w, at) for v, w in zip(values, weights)])
    centre = per_rep.mean(axis=0)
    var_mean = per_rep.var(axis=0, ddof=1) / len(samples)
    sizes = np.where(var_mean > 0, centre * (1.0 - centre) / np.maximum(var_mean, 1e-300), cap)
    return float(np.clip(np.median(sizes), 1.0, cap))


def ks_noise_level(ess_a: float, ess_b: float) -> float:
    """KS distance at the 5% level for two samples of the given sizes."""

    return float(1.36 * np.sqrt(1.0 / ess_a + 1.0 / ess_b))
