"""Girsanov log-weights, self-normalised estimators and estimated tables.

A conditioned Brownian ensemble becomes an ensemble for the unit diffusion
dX = μ(X)dt + dW by attaching log-weights −½N(w) (pinned paths) or
G(w(T)) − ½N(w) (free right endpoint).  Expectations are then ratios
Σwf/Σw, computed by :func:`snis`.

Estimated functions of y (densities, kernels, inner expectations) are carried
as :class:`DensityEstimate` and :class:`KernelTable`; the histogram helpers
here turn weighted endpoint samples into either.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from .conditioned import WeightedEnsemble
from .corridor import Corridor, SamplePath, TimeGrid, curve_eval
from .drift import DriftModel, eval_G, n_functional
from .errors import CompositionError, DegeneracyError, DomainError, LowESSWarning
from .stats import effective_sample_size

logger = logging.getLogger(__name__)

__all__ = [
    "Functional",
    "SnisResult",
    "DensityEstimate",
    "KernelTable",
    "logweight_bridge",
    "logweight_unpinned",
    "log_weights_bridge",
    "log_weights_unpinned",
    "snis",
    "snis_replicates",
    "kernel_y_grid",
    "histogram_density",
    "estimate_marginal_density",
    "product_estimate",
]

LOW_ESS = 10.0
TABLE_NODES = 64
TABLE_EDGE = 0.01
DENSITY_BINS = 128


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    """Bounded path functional evaluated row-wise on ``(paths, nodes)`` arrays.

    ``value_at``: w(t), optionally clipped; ``running_max``: max of w over
    the grid, clipped; ``constant``: c.
    """

    kind: str
    params: tuple[float, ...] = ()

    @classmethod
    def value_at(cls, t: float, clip: tuple[float, float] | None = None) -> "Functional":
        lo, hi = clip if clip is not None else (-math.inf, math.inf)
        return cls("value_at", (float(t), float(lo), float(hi)))

    @classmethod
    def running_max(cls, clip: tuple[float, float]) -> "Functional":
        return cls("running_max", (float(clip[0]), float(clip[1])))

    @classmethod
    def constant(cls, c: float = 1.0) -> "Functional":
        return cls("constant", (float(c),))

    @property
    def name(self) -> str:
        if self.kind == "value_at":
            return f"value_at({self.params[0]:g})"
        if self.kind == "running_max":
            return "running_max"
        return f"constant({self.params[0]:g})"

    def __call__(self, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
        vals = np.atleast_2d(values)
        if self.kind == "value_at":
            t, lo, hi = self.params
            return np.clip(vals[:, grid.index_of(t)], lo, hi)
        if self.kind == "running_max":
            return np.clip(vals.max(axis=1), *self.params)
        if self.kind == "constant":
            return np.full(vals.shape[0], self.params[0])
        raise DomainError(f"unknown functional {self.kind!r}")


# ---------------------------------------------------------------------------
# Log-weights
# ---------------------------------------------------------------------------


def log_weights_bridge(d: DriftModel, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    return -0.5 * n_functional(d, grid, values)


def log_weights_unpinned(d: DriftModel, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    vals = np.atleast_2d(values)
    return eval_G(d, vals[:, -1]) - 0.5 * n_functional(d, grid, vals)


def logweight_bridge(d: DriftModel, w: SamplePath) -> float:
    """−½ N(w)."""
    return float(log_weights_bridge(d, w.grid, w.values))


def logweight_unpinned(d: DriftModel, w: SamplePath) -> float:
    """G(w(t_end)) − ½ N(w)."""
    return float(log_weights_unpinned(d, w.grid, w.values)[0])


# ---------------------------------------------------------------------------
# Self-normalised importance sampling
# ---------------------------------------------------------------------------


class SnisResult(NamedTuple):
    estimate: float
    std_err: float
    ess: float


def snis(
    ensemble: WeightedEnsemble,
    f: Callable[[TimeGrid, np.ndarray], np.ndarray],
    extra_log_weights: np.ndarray | None = None,
) -> SnisResult:
    """Σwᵢf(pathᵢ)/Σwᵢ with its delta-method standard error.

    ``extra_log_weights`` are added to the ensemble's own; ``-inf`` entries
    drop paths.  Weights are exponentiated after subtracting the largest
    log-weight.
    """

    lw = ensemble.log_weights
    if extra_log_weights is not None:
        lw = lw + np.asarray(extra_log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegeneracyError("all importance weights are zero")
    w = np.exp(lw - np.max(lw))
    fx = np.asarray(f(ensemble.grid, ensemble.values), dtype=float)
    if fx.shape != w.shape:
        raise DomainError(f"functional returned shape {fx.shape}, expected {w.shape}")
    if not np.all(np.isfinite(fx[w > 0])):
        raise DomainError("functional returned non-finite values")
    total = np.sum(w)
    est = float(np.sum(w * fx) / total)
    se = float(math.sqrt(np.sum(w * w * (fx - est) ** 2)) / total)
    ess = effective_sample_size(lw)
    if ess < LOW_ESS:
        warnings.warn(f"snis with effective sample size {ess:.2f} < {LOW_ESS:g}", LowESSWarning, stacklevel=2)
    return SnisResult(est, se, ess)


def snis_replicates(
    ensembles: Sequence[WeightedEnsemble],
    f: Callable[[TimeGrid, np.ndarray], np.ndarray],
) -> SnisResult:
    """Mean of per-replicate :func:`snis` estimates with the between-replicate SE.

    The replicates must be independently seeded runs.  Resampled particles
    within one run are correlated, so the delta-method error of a single run
    understates the spread; the replicate error does not.  ``ess`` is the sum
    of the replicates' weight ESS.
    """

    if len(ensembles) < 2:
        raise DomainError(f"snis_replicates needs at least two replicates, got {len(ensembles)}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowESSWarning)
        parts = [snis(e, f) for e in ensembles]
    est = np.array([p.estimate for p in parts])
    ess = float(sum(p.ess for p in parts))
    if ess < LOW_ESS:
        warnings.warn(f"snis with effective sample size {ess:.2f} < {LOW_ESS:g}", LowESSWarning, stacklevel=2)
    return SnisResult(float(est.mean()), float(est.std(ddof=1) / math.sqrt(est.size)), ess)


# ---------------------------------------------------------------------------
# Estimated functions of y
# ---------------------------------------------------------------------------


def _wall_trapezoid(y: np.ndarray, v: np.ndarray, lo: float, hi: float) -> float:
    """∫ over [lo, hi] of the piecewise-linear interpolant vanishing at both walls."""
    yy = np.concatenate([[lo], y, [hi]])
    vv = np.concatenate([[0.0], v, [0.0]])
    return float(trapezoid(vv, yy))


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    """Estimated (sub-)density on a y grid.

    ``mass`` is the total probability represented, computed before any
    renormalisation; ``meta`` carries the provenance written to sidecars.
    """

    name: str
    y: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    mass: float
    mass_se: float = 0.0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        v = np.asarray(self.values, dtype=float)
        se = np.asarray(self.std_err, dtype=float)
        if not (y.shape == v.shape == se.shape) or y.ndim != 1:
            raise DomainError("density grid, values and errors must be 1-D and aligned")
        if np.any(np.diff(y) <= 0):
            raise DomainError("density grid must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError(f"{self.name}: density values must be finite and non-negative")
        for name, arr in (("y", y), ("values", v), ("std_err", se)):
            object.__setattr__(self, name, arr)

    def renormalized(self) -> "DensityEstimate":
        if self.mass <= 0:
            raise DegeneracyError(f"{self.name}: cannot renormalise a zero-mass density")
        return DensityEstimate(
            self.name, self.y, self.values / self.mass, self.std_err / self.mass, 1.0, 0.0,
            {**self.meta, "mass_before_renormalization": self.mass},
        )

    def table(self) -> "KernelTable":
        return KernelTable(self.name, self.y, self.values, self.std_err, dict(self.meta))


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Node values of an estimated function of y with monotone-cubic interpolation.

    Evaluation outside ``[y[0], y[-1]]`` raises :class:`DomainError`.  A
    single-node table answers its one value at that node.
    """

    name: str
    y: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)
    _interp: PchipInterpolator | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        v = np.asarray(self.values, dtype=float)
        se = np.asarray(self.std_err, dtype=float)
        if not (y.shape == v.shape == se.shape) or y.ndim != 1 or y.size < 1:
            raise DomainError(f"{self.name}: table needs aligned, non-empty 1-D arrays")
        if np.any(np.diff(y) <= 0):
            raise DomainError(f"{self.name}: table grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise DomainError(f"{self.name}: table values must be finite")
        for name, arr in (("y", y), ("values", v), ("std_err", se)):
            object.__setattr__(self, name, arr)
        if y.size > 1:
            object.__setattr__(self, "_interp", PchipInterpolator(y, v, extrapolate=False))

    def _check(self, y: np.ndarray) -> None:
        lo, hi = self.y[0], self.y[-1]
        if np.any(y < lo - 1e-12) or np.any(y > hi + 1e-12):
            raise DomainError(f"{self.name}: y outside the table range [{lo:.6g}, {hi:.6g}]")

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        self._check(arr)
        if self._interp is None:
            out = np.full(arr.shape, self.values[0])
        else:
            out = self._interp(np.clip(arr, self.y[0], self.y[-1]))
        return float(out) if arr.ndim == 0 else out

    def std_err_at(self, y):
        arr = np.asarray(y, dtype=float)
        self._check(arr)
        out = np.interp(arr, self.y, self.std_err)
        return float(out) if arr.ndim == 0 else out

    def contains(self, y) -> np.ndarray:
        arr = np.asarray(y, dtype=float)
        return (arr >= self.y[0] - 1e-12) & (arr <= self.y[-1] + 1e-12)

    def same_grid(self, other: "KernelTable") -> bool:
        return self.y.shape == other.y.shape and bool(np.allclose(self.y, other.y, rtol=0.0, atol=1e-12))

    def require_grid(self, other: "KernelTable") -> None:
        if not self.same_grid(other):
            raise CompositionError(f"tables {self.name} and {other.name} live on different y grids")


def kernel_y_grid(k: Corridor, t: float, nodes: int = TABLE_NODES, edge: float = TABLE_EDGE) -> np.ndarray:
    """``nodes`` points spanning (g⁻(t) + m, g⁺(t) − m), m = edge·width."""

    lo, hi = curve_eval(k.lower, t), curve_eval(k.upper, t)
    m = edge * (hi - lo)
    return np.linspace(lo + m, hi - m, nodes)


def _bin_edges(y: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if not (lo <= y[0] and y[-1] <= hi):
        raise DomainError("histogram nodes must lie between the walls")
    mids = 0.5 * (y[:-1] + y[1:])
    return np.concatenate([[lo], mids, [hi]])


def histogram_density(
    name: str,
    x: np.ndarray,
    weights: np.ndarray,
    y: np.ndarray,
    lo: float,
    hi: float,
    *,
    normalize: bool = True,
    meta: dict[str, Any] | None = None,
) -> DensityEstimate:
    """Histogram with one bin per node; bin edges at node midpoints.

    The outer bins extend to the walls ``lo``/``hi`` so every sample between
    the walls is counted and ``mass`` is the total represented probability.
    With ``normalize`` the weights are self-normalised (a probability
    density); otherwise each weight counts against the number of samples
    (a sub-density such as the survival kernel).
    """

    x = np.asarray(x, dtype=float)
    w = np.asarray(weights, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = _bin_edges(y, lo, hi)
    width = np.diff(edges)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, y.size - 1)
    inside = (x >= lo) & (x <= hi)
    onehot = np.zeros((x.size, y.size))
    rows = np.flatnonzero(inside)
    onehot[rows, idx[rows]] = 1.0
    if normalize:
        total = np.sum(w)
        if total <= 0:
            raise DegeneracyError(f"{name}: all histogram weights are zero")
        prob = (w @ onehot) / total
        se = np.sqrt(((w[:, None] * (onehot - prob)) ** 2).sum(axis=0)) / total
        in_any = onehot.sum(axis=1)
        mass = float(w @ in_any / total)
        mass_se = float(math.sqrt(np.sum((w * (in_any - mass)) ** 2)) / total)
    else:
        n = x.size
        contrib = w[:, None] * onehot
        prob = contrib.mean(axis=0)
        se = contrib.std(axis=0, ddof=1) / math.sqrt(n)
        per_path = contrib.sum(axis=1)
        mass = float(per_path.mean())
        mass_se = float(per_path.std(ddof=1) / math.sqrt(n))
    return DensityEstimate(name, y, prob / width, se / width, mass, mass_se, dict(meta or {}))


def estimate_marginal_density(
    ensemble: WeightedEnsemble,
    t: float,
    k: Corridor,
    y: np.ndarray | None = None,
    bins: int = DENSITY_BINS,
    margins: tuple[float, float] = (0.0, 0.0),
    name: str = "marginal",
) -> DensityEstimate:
    """Weighted-histogram density of the ensemble's value at time ``t``.

    Default nodes are ``bins`` equal-width bin centres across (g⁻(t), g⁺(t));
    the outer bins reach the widened walls.
    """

    lo, hi = k.bounds(np.array([t]), margins)
    lo, hi = float(lo[0]), float(hi[0])
    if y is None:
        g_lo, g_hi = curve_eval(k.lower, t), curve_eval(k.upper, t)
        step = (g_hi - g_lo) / bins
        y = g_lo + step * (np.arange(bins) + 0.5)
    x = ensemble.values[:, ensemble.grid.index_of(t)]
    w = np.exp(ensemble.log_weights - np.max(ensemble.log_weights))
    return histogram_density(name, x, w, np.asarray(y, dtype=float), lo, hi, normalize=True, meta={"t": t})


def product_estimate(
    name: str,
    y: np.ndarray,
    factors: Sequence[tuple[np.ndarray, np.ndarray]],
    scale: float,
    scale_rel_se: float,
    lo: float,
    hi: float,
    meta: dict[str, Any] | None = None,
) -> DensityEstimate:
    """scale·Πfactors node-wise, relative errors added in quadrature.

    ``factors`` are ``(values, std_err)`` pairs on ``y``; ``mass`` is the
    trapezoid integral with zero values at the walls.
    """

    y = np.asarray(y, dtype=float)
    vals = np.full(y.shape, float(scale))
    rel2 = np.zeros(y.shape)
    for v, se in factors:
        v = np.asarray(v, dtype=float)
        vals = vals * v
        with np.errstate(divide="ignore", invalid="ignore"):
            rel2 = rel2 + np.where(v != 0, (np.asarray(se, dtype=float) / v) ** 2, 0.0)
    vals = np.maximum(vals, 0.0)
    node_se = vals * np.sqrt(rel2)
    se = vals * np.sqrt(rel2 + scale_rel_se**2)
    mass = _wall_trapezoid(y, vals, lo, hi)
    # node errors independent, the scalar factor shared by all nodes
    yy = np.concatenate([[lo], y, [hi]])
    quad_w = 0.5 * (yy[2:] - yy[:-2])
    mass_se = float(math.sqrt(np.sum((quad_w * node_se) ** 2) + (mass * scale_rel_se) ** 2))
    return DensityEstimate(name, y, vals, se, mass, mass_se, dict(meta or {}))
