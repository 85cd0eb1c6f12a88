"""Kernel tables, the normalising constant C and the house-moving densities.

Building blocks estimated here:

* q↑(t, y), q↓(t, y): meander-endpoint kernels of the lower and mirrored
  corridors, as unconditional BES(3)-bridge means of Z̃⁻¹·1_{K⁻} times the
  Rayleigh endpoint density;
* C: the limit of P(bridge 0 → b stays in the widened corridor)/(η⁻η⁺)
  scaled by πn₁(b)/2, extrapolated linearly in ε;
* p: the survival sub-density of Brownian motion between the curves;
* inner weight expectations E[e^{−½N}] (and E[e^{G}e^{−½N}] for free ends)
  over conditioned pieces, giving the drift factors ζ.

Densities are products of these: h = q↑q↓/(C√t√(1−t)), h_μ = ζh, and the
meander counterparts k, k_μ.  :class:`TableBuilder` memoises every component
per configuration so that all consumers share one build, optionally backed by
the Parquet cache in :mod:`housemove.storage`.

Stream tags: every component draws from ``(seed, path id, (tag, *key))``
with the tag constants below, so components never share randomness.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

from .conditioned import (
    Anchor,
    BoundaryCase,
    EpsilonSchedule,
    Proposal,
    WeightedEnsemble,
    corridor_probability,
    nocross_prob_step,
    sample_boundary_case,
    smc_corridor_sample,
)
from .corridor import Corridor, Curve, TimeGrid, curve_eval
from .drift import DriftModel, eval_G, log_cameron_martin_Z_tilde
from .errors import DegeneracyError, DomainError, PreconditionError, StarvationError
from .pool import chunk_ids, run_tasks_sync
from .reweighting import (
    LOW_ESS,
    DensityEstimate,
    KernelTable,
    estimate_marginal_density,
    histogram_density,
    kernel_y_grid,
    log_weights_bridge,
    log_weights_unpinned,
    product_estimate,
    snis,
)
from .samplers import RngStream, bes3_bridge_rows, brownian_rows, meander_rows
from . import storage

logger = logging.getLogger(__name__)

__all__ = [
    "KernelSettings",
    "ConstantEstimate",
    "WeightExpectation",
    "MomentConstants",
    "estimate_q_up",
    "estimate_q_down",
    "estimate_C_constant",
    "estimate_p_kernel",
    "estimate_survival",
    "estimate_h",
    "estimate_h_transition",
    "estimate_h_mu",
    "estimate_h_mu_transition",
    "estimate_k",
    "estimate_k_transition",
    "estimate_k_mu",
    "estimate_k_mu_transition",
    "estimate_meander_kernel_mean",
    "weight_expectation",
    "weight_expectations",
    "moment_constants",
    "TableBuilder",
]

# stream tags
TAG_Q_UP = 1
TAG_Q_DOWN = 2
TAG_C = 3
TAG_P = 4
TAG_PIECE = 5
TAG_HOUSE_MOVING = 6
TAG_MEANDER = 7
TAG_SURVIVAL = 8
TAG_MEANDER_KERNEL = 9


@dataclass(frozen=True)
class KernelSettings:
    """Sizes and sampler choices shared by every component estimate."""

    n_steps: int = 512
    paths: int = 2000
    nodes: int = 64
    sampler: str = "smc"
    crossing_corrected: bool = True
    resample_threshold: float = 0.5
    resampling: str = "multinomial"
    replicates: int = 4
    workers: int = 1

    def __post_init__(self) -> None:
        if self.paths < 2:
            raise DomainError(f"paths must be >= 2, got {self.paths}")
        if self.nodes < 2:
            raise DomainError(f"nodes must be >= 2, got {self.nodes}")
        if self.replicates < 2:
            raise DomainError(f"replicates must be >= 2, got {self.replicates}")

    def grid(self, k: Corridor) -> TimeGrid:
        return TimeGrid(k.t_start, k.t_end, self.n_steps)

    def sampler_kwargs(self) -> dict[str, Any]:
        return {
            "paths": self.paths,
            "crossing_corrected": self.crossing_corrected,
            "resample_threshold": self.resample_threshold,
            "resampling": self.resampling,
        }


def _time_key(grid: TimeGrid, t: float) -> int:
    return grid.index_of(t)


def _per_path(fn: Callable[[range], np.ndarray], paths: int) -> np.ndarray:
    """Concatenate per-path results computed over fixed id blocks."""
    return np.concatenate([fn(ids) for ids in chunk_ids(0, paths)])


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


# ---------------------------------------------------------------------------
# q kernels
# ---------------------------------------------------------------------------


def _rayleigh(x, length: float):
    return x / length * np.exp(-x * x / (2.0 * length))


def _meander_kernel_values(
    rows: np.ndarray,
    grid: TimeGrid,
    kc: Corridor,
    crossing_corrected: bool,
) -> np.ndarray:
    """Z̃^{g⁻−g⁻(t₀)}(R)⁻¹ · 1{R ≤ g⁺ − g⁻} per row, R ≥ 0 a BES(3)-type path.

    The upper-wall crossing correction applies the Brownian-bridge formula
    between nodes.
    """

    shift = kc.lower - curve_eval(kc.lower, grid.t_start)
    log_zt = log_cameron_martin_Z_tilde(shift, grid, rows)
    width = curve_eval(kc.upper, grid.times) - curve_eval(kc.lower, grid.times)
    inside = np.all(rows <= width, axis=1)
    vals = np.where(inside, np.exp(-log_zt), 0.0)
    if crossing_corrected:
        surv = nocross_prob_step(rows[:, :-1], rows[:, 1:], grid.dt, width[:-1], width[1:], "below")
        vals = vals * np.prod(surv, axis=1)
    return vals


def _q_node(
    item: tuple[int, float],
    *,
    seed: int,
    tag: tuple[int, ...],
    kc: Corridor,
    grid: TimeGrid,
    paths: int,
    crossing_corrected: bool,
) -> tuple[float, float]:
    j, x = item

    def block(ids: range) -> np.ndarray:
        rows = bes3_bridge_rows(seed, ids, grid, 0.0, x, tag + (j,))
        return _meander_kernel_values(rows, grid, kc, crossing_corrected)

    vals = _per_path(block, paths)
    if not np.any(vals > 0):
        raise StarvationError(f"no BES(3) bridge to {x:.4g} stayed below the corridor width")
    mean, se = _mean_se(vals)
    factor = _rayleigh(x, grid.length)
    return factor * mean, factor * se


def _q_table(
    name: str,
    kc: Corridor,
    offsets: np.ndarray,
    y: np.ndarray,
    grid: TimeGrid,
    settings: KernelSettings,
    seed: int,
    tag: tuple[int, ...],
) -> KernelTable:
    if np.any(offsets <= 0):
        raise DomainError(f"{name}: y grid must lie strictly inside the corridor")
    run = partial(
        _q_node, seed=seed, tag=tag, kc=kc, grid=grid, paths=settings.paths,
        crossing_corrected=settings.crossing_corrected,
    )
    out = run_tasks_sync(run, list(enumerate(offsets.tolist())), settings.workers)
    vals = np.array([v for v, _ in out])
    ses = np.array([s for _, s in out])
    return KernelTable(name, y, vals, ses, {"paths": settings.paths})


def _check_interior(k: Corridor, t: float, y: np.ndarray, name: str) -> None:
    lo, hi = curve_eval(k.lower, t), curve_eval(k.upper, t)
    if np.any(y <= lo) or np.any(y >= hi):
        raise DomainError(f"{name}: y grid must lie in ({lo:.6g}, {hi:.6g}) at t={t:g}")


def estimate_q_up(
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    paths: int | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> KernelTable:
    """q↑ on [t_start, t] at ``y_grid`` (defaults to the 64-node kernel grid)."""

    settings = settings if paths is None else _with_paths(settings, paths)
    grid = settings.grid(k).sub_grid(k.t_start, t)
    y = kernel_y_grid(k, t, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
    _check_interior(k, t, y, "q_up")
    offsets = y - curve_eval(k.lower, t)
    tag = (TAG_Q_UP, _time_key(settings.grid(k), t))
    table = _q_table("q_up", k.restricted(k.t_start, t), offsets, y, grid, settings, seed, tag)
    table.meta["t"] = t
    return table


def estimate_q_down(
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    paths: int | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> KernelTable:
    """q↓ on [t, t_end]: the q↑ construction on the mirrored corridor at b − y."""

    settings = settings if paths is None else _with_paths(settings, paths)
    grid = settings.grid(k).sub_grid(t, k.t_end)
    y = kernel_y_grid(k, t, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
    _check_interior(k, t, y, "q_down")
    offsets = curve_eval(k.upper, t) - y
    tag = (TAG_Q_DOWN, _time_key(settings.grid(k), t))
    table = _q_table("q_down", k.mirrored(t, k.t_end), offsets, y, grid, settings, seed, tag)
    table.meta["t"] = t
    return table


def _with_paths(settings: KernelSettings, paths: int) -> KernelSettings:
    return replace(settings, paths=int(paths))


# ---------------------------------------------------------------------------
# Normalising constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantEstimate:
    """C with its fit standard error and the per-level ratios behind it.

    Iterates as ``(estimate, std_err)``.
    """

    estimate: float
    std_err: float
    eps: np.ndarray
    ratios: np.ndarray
    ratio_se: np.ndarray
    slope: float
    method: str = "weighted linear fit in eps, intercept"

    def __iter__(self):
        return iter((self.estimate, self.std_err))

    @property
    def rel_se(self) -> float:
        return self.std_err / self.estimate if self.estimate > 0 else math.inf

    @property
    def last_levels_cv(self) -> float:
        """Coefficient of variation of the two finest ratios."""
        if self.ratios.size < 2:
            return math.nan
        last = self.ratios[-2:]
        return float(np.std(last, ddof=1) / np.mean(last))


def _evidence_item(
    item: tuple[int, int],
    *,
    seed: int,
    grid: TimeGrid,
    k: Corridor,
    schedule: EpsilonSchedule,
    settings: KernelSettings,
    eta_factor: float,
) -> float:
    level, rep = item
    margins = tuple(eta_factor * m for m in schedule.margins(level))
    rng = RngStream(seed, 0, (TAG_C, level, rep))
    ens = smc_corridor_sample(
        rng, grid, None, k, margins, BoundaryCase.house_moving(), settings.paths,
        settings.resample_threshold, resampling=settings.resampling,
        crossing_corrected=settings.crossing_corrected,
    )
    return math.exp(ens.diagnostics["log_evidence"])


def _level_probabilities(
    k: Corridor,
    schedule: EpsilonSchedule,
    settings: KernelSettings,
    seed: int,
    eta_factor: float,
) -> tuple[np.ndarray, np.ndarray]:
    grid = settings.grid(k)
    b = k.b
    if settings.sampler == "rejection":
        probs, ses = [], []
        for level in range(schedule.levels):
            margins = tuple(eta_factor * m for m in schedule.margins(level))
            p, se = corridor_probability(
                RngStream(seed, 0, (TAG_C, level)), grid, Proposal("bridge", 0.0, b), k, margins,
                settings.paths * settings.replicates, settings.crossing_corrected,
            )
            probs.append(p)
            ses.append(se)
        return np.array(probs), np.array(ses)
    items = [(lvl, r) for lvl in range(schedule.levels) for r in range(settings.replicates)]
    run = partial(_evidence_item, seed=seed, grid=grid, k=k, schedule=schedule, settings=settings, eta_factor=eta_factor)
    ev = np.array(run_tasks_sync(run, items, settings.workers)).reshape(schedule.levels, settings.replicates)
    return ev.mean(axis=1), ev.std(axis=1, ddof=1) / math.sqrt(settings.replicates)


def estimate_C_constant(
    k: Corridor,
    schedule: EpsilonSchedule | None = None,
    paths_per_level: int | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
    eta_factor: float = 1.0,
) -> ConstantEstimate:
    """πn₁(b)/2 · lim P(W^{0→b} ∈ K(g⁻ − η⁻, g⁺ + η⁺))/(η⁻η⁺).

    Each level's probability is the SMC evidence averaged over
    ``settings.replicates`` independent runs (or a Rao–Blackwellised bridge
    estimate with ``sampler="rejection"``).  The ratios are fitted linearly in
    ε with weights 1/SE and the intercept is taken as the limit.
    ``eta_factor`` scales both margins at fixed ε.
    """

    if not k.is_house_moving:
        raise PreconditionError("C needs a house-moving corridor with g-(t_start) = 0")
    schedule = EpsilonSchedule.default_for(k) if schedule is None else schedule
    settings = settings if paths_per_level is None else _with_paths(settings, paths_per_level)
    probs, ses = _level_probabilities(k, schedule, settings, seed, eta_factor)
    if probs[-1] <= 0:
        raise StarvationError(f"corridor probability at the finest level is {probs[-1]:g}; increase paths")
    eta = np.array([np.prod([eta_factor * m for m in schedule.margins(j)]) for j in range(schedule.levels)])
    ratios = probs / eta
    ratio_se = np.maximum(ses / eta, 1e-300)
    eps = schedule.epsilons
    if schedule.levels >= 2:
        coef, cov = np.polyfit(eps, ratios, 1, w=1.0 / ratio_se, cov="unscaled")
        slope, intercept = float(coef[0]), float(coef[1])
        intercept_se = float(math.sqrt(cov[1, 1]))
    else:
        slope, intercept, intercept_se = 0.0, float(ratios[0]), float(ratio_se[0])
    b = k.b
    factor = math.pi * math.exp(-0.5 * b * b) / math.sqrt(2.0 * math.pi) / 2.0
    est = ConstantEstimate(factor * intercept, factor * intercept_se, eps, ratios, ratio_se, slope)
    if est.estimate <= 0:
        raise StarvationError(f"extrapolated C is non-positive ({est.estimate:g}); increase paths or levels")
    logger.info("C = %.6g +- %.2g from %d levels (ratios %s)", est.estimate, est.std_err, schedule.levels, np.round(ratios, 4))
    return est


# ---------------------------------------------------------------------------
# Survival kernels
# ---------------------------------------------------------------------------


def _survival_weights(rows: np.ndarray, grid: TimeGrid, k: Corridor, crossing_corrected: bool) -> np.ndarray:
    lo, hi = k.bounds(grid.times)
    ok = np.all((rows >= lo) & (rows <= hi), axis=1)
    if not crossing_corrected:
        return ok.astype(float)
    a, b = rows[:, :-1], rows[:, 1:]
    p = nocross_prob_step(a, b, grid.dt, lo[:-1], lo[1:], "above") * nocross_prob_step(a, b, grid.dt, hi[:-1], hi[1:], "below")
    return np.where(ok, np.prod(p, axis=1), 0.0)


def _brownian_survivors(
    k: Corridor, grid: TimeGrid, start: float, settings: KernelSettings, seed: int, tag: tuple[int, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints and Rao–Blackwellised survival weights of Brownian paths."""

    def block(ids: range) -> np.ndarray:
        rows = brownian_rows(seed, ids, grid, start, tag)
        return np.column_stack([rows[:, -1], _survival_weights(rows, grid, k, settings.crossing_corrected)])

    out = _per_path(block, settings.paths)
    return out[:, 0], out[:, 1]


def estimate_p_kernel(
    k: Corridor,
    t1: float,
    t2: float,
    y1: float,
    y_grid: np.ndarray | None = None,
    paths: int | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
    tag: int = 0,
) -> KernelTable:
    """Survival sub-density y ↦ p_{[t1,t2]}(y1, y) of Brownian motion from y1.

    Histogram of surviving endpoints normalised by the number of paths;
    ``meta["mass"]`` is the survival probability.
    """

    settings = settings if paths is None else _with_paths(settings, paths)
    full = settings.grid(k)
    grid = full.sub_grid(t1, t2)
    lo1, hi1 = curve_eval(k.lower, t1), curve_eval(k.upper, t1)
    if not lo1 < y1 < hi1:
        raise DomainError(f"p: start {y1:g} is not inside ({lo1:.6g}, {hi1:.6g}) at t={t1:g}")
    y = kernel_y_grid(k, t2, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
    key = (TAG_P, full.index_of(t1), full.index_of(t2), tag)
    ends, weights = _brownian_survivors(k, grid, y1, settings, seed, key)
    if not np.any(weights > 0):
        raise StarvationError(f"p: no Brownian path from {y1:g} survived on [{t1:g}, {t2:g}]")
    lo2, hi2 = curve_eval(k.lower, t2), curve_eval(k.upper, t2)
    est = histogram_density("p", ends, weights, y, lo2, hi2, normalize=False)
    return KernelTable("p", est.y, est.values, est.std_err, {"t1": t1, "t2": t2, "y1": y1, "mass": est.mass, "mass_se": est.mass_se})


def _p_into(
    k: Corridor, t1: float, t2: float, z: float, y: np.ndarray, settings: KernelSettings, seed: int, tag: int
) -> KernelTable:
    """y ↦ p_{[t1,t2]}(y, z), from a run started at z on the reversed corridor."""

    kr = k.reversed(t1, t2)
    table = estimate_p_kernel(kr, t1, t2, z, y, settings=settings, seed=seed, tag=tag)
    table.meta["into"] = z
    return table


def estimate_survival(
    k: Corridor,
    t: float,
    y: np.ndarray,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> KernelTable:
    """S(t, y) = P(Brownian motion from y at t stays in the corridor until t_end)."""

    full = settings.grid(k)
    grid = full.sub_grid(t, k.t_end)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    vals, ses = [], []
    for j, yj in enumerate(y.tolist()):
        p, se = corridor_probability(
            RngStream(seed, 0, (TAG_SURVIVAL, full.index_of(t), j)), grid, Proposal("brownian", yj), k,
            (0.0, 0.0), settings.paths, settings.crossing_corrected,
        )
        if p <= 0:
            raise StarvationError(f"survival from {yj:g} at t={t:g} estimated as 0")
        vals.append(p)
        ses.append(se)
    return KernelTable("survival", y, np.array(vals), np.array(ses), {"t": t})


# ---------------------------------------------------------------------------
# Inner weight expectations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightExpectation:
    value: float
    std_err: float
    ess: float

    @property
    def rel_se(self) -> float:
        return self.std_err / self.value if self.value > 0 else math.inf


def weight_expectation(
    d: DriftModel,
    k: Corridor,
    grid: TimeGrid,
    case: BoundaryCase,
    *,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
    key: tuple[int, ...] = (),
    component: str = "piece",
) -> WeightExpectation:
    """E[e^{−½N}] (pinned) or E[e^{G(w(T))}e^{−½N}] (free end) over the
    finest-level conditioned Brownian ensemble of ``case`` on ``grid``.
    """

    if d.is_zero:
        return WeightExpectation(1.0, 0.0, math.inf)
    series = sample_boundary_case(
        RngStream(seed, 0, (TAG_PIECE,) + key), grid, k, case, schedule, settings.sampler,
        finest_only=True, **settings.sampler_kwargs(),
    )
    ens = series.ensemble
    return _expectation_from(d, ens, case.pinned, component)


def _expectation_from(d: DriftModel, ens: WeightedEnsemble, pinned: bool, component: str) -> WeightExpectation:
    lw = log_weights_bridge(d, ens.grid, ens.values) if pinned else log_weights_unpinned(d, ens.grid, ens.values)
    shift = float(np.max(lw))
    res = snis(ens, lambda _g, _v: np.exp(lw - shift))
    if res.ess < LOW_ESS:
        raise DegeneracyError(f"effective sample size {res.ess:.2f} below {LOW_ESS:g}", component=component)
    scale = math.exp(shift)
    return WeightExpectation(res.estimate * scale, res.std_err * scale, res.ess)


def _expectation_node(
    item: tuple[int, BoundaryCase],
    *,
    d: DriftModel,
    k: Corridor,
    grid: TimeGrid,
    schedule: EpsilonSchedule | None,
    settings: KernelSettings,
    seed: int,
    key: tuple[int, ...],
    component: str,
) -> WeightExpectation:
    j, case = item
    return weight_expectation(
        d, k, grid, case, schedule=schedule, settings=settings, seed=seed, key=key + (j,),
        component=f"{component}[{j}]",
    )


def weight_expectations(
    d: DriftModel,
    k: Corridor,
    grid: TimeGrid,
    cases: list[BoundaryCase],
    y: np.ndarray,
    *,
    name: str,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
    key: tuple[int, ...] = (),
) -> KernelTable:
    """One :func:`weight_expectation` per node, dispatched through the pool."""

    if d.is_zero:
        return KernelTable(name, y, np.ones(len(cases)), np.zeros(len(cases)), {"drift": "zero"})
    run = partial(
        _expectation_node, d=d, k=k, grid=grid, schedule=schedule, settings=settings, seed=seed,
        key=key, component=name,
    )
    out = run_tasks_sync(run, list(enumerate(cases)), settings.workers)
    return KernelTable(
        name, y, np.array([o.value for o in out]), np.array([o.std_err for o in out]),
        {"min_ess": float(min(o.ess for o in out))},
    )


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def _require_unit_interval(k: Corridor) -> None:
    if abs(k.t_start) > 1e-12 or abs(k.t_end - 1.0) > 1e-12:
        raise PreconditionError(f"house-moving densities are defined on [0, 1], corridor domain is {k.domain}")


def estimate_h(
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    C: ConstantEstimate | tuple[float, float] | None = None,
    tables: tuple[KernelTable, KernelTable] | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """h(t, y) = C⁻¹ t^{-½} q↑(t, y) (1 − t)^{-½} q↓(t, y)."""

    _require_unit_interval(k)
    if not 0.0 < t < 1.0:
        raise DomainError(f"t must lie in (0, 1), got {t}")
    if tables is None:
        q_up = estimate_q_up(k, t, y_grid, settings=settings, seed=seed)
        q_down = estimate_q_down(k, t, q_up.y, settings=settings, seed=seed)
    else:
        q_up, q_down = tables
    q_up.require_grid(q_down)
    c, c_se = tuple(C) if C is not None else tuple(estimate_C_constant(k, settings=settings, seed=seed))
    return product_estimate(
        "h", q_up.y, [(q_up.values, q_up.std_err), (q_down.values, q_down.std_err)],
        1.0 / (c * math.sqrt(t) * math.sqrt(1.0 - t)), c_se / c,
        curve_eval(k.lower, t), curve_eval(k.upper, t), {"t": t, "C": c, "C_std_err": c_se},
    )


def _scaled_density(name: str, base: DensityEstimate, factor: np.ndarray, factor_se: np.ndarray, lo: float, hi: float, meta: dict) -> DensityEstimate:
    """base·factor node-wise; ``factor ≡ 1`` with zero error returns base's values unchanged."""
    vals = base.values * factor
    se = np.sqrt((base.std_err * factor) ** 2 + (base.values * factor_se) ** 2)
    rel = np.divide(se, vals, out=np.zeros_like(vals), where=vals > 0)
    mass_rel = base.mass_se / base.mass if base.mass > 0 else 0.0
    out = product_estimate(name, base.y, [(vals, vals * rel)], 1.0, 0.0, lo, hi, {**base.meta, **meta})
    return DensityEstimate(name, out.y, vals, se, out.mass, math.hypot(out.mass_se, out.mass * mass_rel), out.meta)


def _ratio_factor(num: list[KernelTable], den: list[WeightExpectation]) -> tuple[np.ndarray, np.ndarray]:
    vals = np.ones_like(num[0].values)
    rel2 = np.zeros_like(vals)
    for tab in num:
        vals = vals * tab.values
        rel2 += np.divide(tab.std_err, tab.values, out=np.zeros_like(vals), where=tab.values > 0) ** 2
    for e in den:
        vals = vals / e.value
        rel2 += (e.std_err / e.value) ** 2
    return vals, vals * np.sqrt(rel2)


def estimate_h_mu(
    d: DriftModel,
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    *,
    h: DensityEstimate | None = None,
    zeta: tuple[KernelTable, KernelTable, WeightExpectation] | None = None,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """h_μ(t, y) = ζ(t, y)·h(t, y), ζ = E[e^{−½N}] on [0,t] (0 → y) ×
    E[e^{−½N}] on [t,1] (y → b) / E[e^{−½N(H)}]."""

    h = estimate_h(k, t, y_grid, settings=settings, seed=seed) if h is None else h
    if d.is_zero:
        return DensityEstimate("h_mu", h.y, h.values, h.std_err, h.mass, h.mass_se, {**h.meta, "drift": "zero"})
    if zeta is None:
        zeta = _zeta_marginal(d, k, t, h.y, schedule, settings, seed)
    lower, upper, denom = zeta
    factor, factor_se = _ratio_factor([lower, upper], [denom])
    return _scaled_density("h_mu", h, factor, factor_se, curve_eval(k.lower, t), curve_eval(k.upper, t), {"drift": d.describe()})


def _zeta_marginal(
    d: DriftModel, k: Corridor, t: float, y: np.ndarray, schedule: EpsilonSchedule | None,
    settings: KernelSettings, seed: int,
) -> tuple[KernelTable, KernelTable, WeightExpectation]:
    full = settings.grid(k)
    i = full.index_of(t)
    lower = weight_expectations(
        d, k, full.sub_grid(0.0, t), [BoundaryCase(Anchor.on_lower(), Anchor.interior(v)) for v in y], y,
        name="lower_piece", schedule=schedule, settings=settings, seed=seed, key=(1, i),
    )
    upper = weight_expectations(
        d, k, full.sub_grid(t, 1.0), [BoundaryCase(Anchor.interior(v), Anchor.on_upper()) for v in y], y,
        name="upper_piece", schedule=schedule, settings=settings, seed=seed, key=(2, i),
    )
    denom = house_moving_expectation(d, k, schedule=schedule, settings=settings, seed=seed)
    return lower, upper, denom


def house_moving_expectation(
    d: DriftModel,
    k: Corridor,
    *,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> WeightExpectation:
    """E[e^{−½N(H)}] over the finest house-moving level."""

    if d.is_zero:
        return WeightExpectation(1.0, 0.0, math.inf)
    series = sample_boundary_case(
        RngStream(seed, 0, (TAG_HOUSE_MOVING,)), settings.grid(k), k, BoundaryCase.house_moving(), schedule,
        settings.sampler, finest_only=True, **settings.sampler_kwargs(),
    )
    return _expectation_from(d, series.ensemble, True, "house_moving")


def _q_down_at(k: Corridor, t: float, y: float, settings: KernelSettings, seed: int) -> tuple[float, float]:
    table = estimate_q_down(k, t, np.array([y]), settings=settings, seed=seed)
    return float(table.values[0]), float(table.std_err[0])


def estimate_h_transition(
    k: Corridor,
    t1: float,
    y1: float,
    t2: float,
    y_grid: np.ndarray | None = None,
    tables: tuple[KernelTable, KernelTable, tuple[float, float]] | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """h(t1, y1, t2, y) = p(y1, y)·(1 − t2)^{-½}q↓(t2, y) / ((1 − t1)^{-½}q↓(t1, y1)).

    ``tables`` = (p table, q↓(t2) table, (q↓(t1, y1), SE)).
    """

    _require_unit_interval(k)
    if not 0.0 <= t1 < t2 < 1.0:
        raise DomainError(f"need 0 <= t1 < t2 < 1, got t1={t1}, t2={t2}")
    if tables is None:
        y = kernel_y_grid(k, t2, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
        p = estimate_p_kernel(k, t1, t2, y1, y, settings=settings, seed=seed)
        q2 = estimate_q_down(k, t2, y, settings=settings, seed=seed)
        q1 = _q_down_at(k, t1, y1, settings, seed)
    else:
        p, q2, q1 = tables
    p.require_grid(q2)
    q1_val, q1_se = q1
    if not q1_val > 0:
        raise StarvationError(f"q_down({t1:g}, {y1:g}) estimated as {q1_val:g}")
    scale = math.sqrt(1.0 - t1) / (math.sqrt(1.0 - t2) * q1_val)
    return product_estimate(
        "h_transition", p.y, [(p.values, p.std_err), (q2.values, q2.std_err)], scale, q1_se / q1_val,
        curve_eval(k.lower, t2), curve_eval(k.upper, t2), {"t1": t1, "y1": y1, "t2": t2},
    )


def estimate_h_mu_transition(
    d: DriftModel,
    k: Corridor,
    t1: float,
    y1: float,
    t2: float,
    y_grid: np.ndarray | None = None,
    *,
    h: DensityEstimate | None = None,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """ζ(t1, y1, t2, y)·h(t1, y1, t2, y) with ζ = E(y1 → y on [t1, t2]) ·
    E(y → b on [t2, 1]) / E(y1 → b on [t1, 1])."""

    h = estimate_h_transition(k, t1, y1, t2, y_grid, settings=settings, seed=seed) if h is None else h
    if d.is_zero:
        return DensityEstimate("h_mu_transition", h.y, h.values, h.std_err, h.mass, h.mass_se, {**h.meta, "drift": "zero"})
    full = settings.grid(k)
    i1, i2 = full.index_of(t1), full.index_of(t2)
    y = h.y
    bridge = weight_expectations(
        d, k, full.sub_grid(t1, t2), [BoundaryCase(Anchor.interior(y1), Anchor.interior(v)) for v in y], y,
        name="bridge_piece", schedule=schedule, settings=settings, seed=seed, key=(3, i1, i2),
    )
    upper = weight_expectations(
        d, k, full.sub_grid(t2, 1.0), [BoundaryCase(Anchor.interior(v), Anchor.on_upper()) for v in y], y,
        name="upper_piece", schedule=schedule, settings=settings, seed=seed, key=(2, i2),
    )
    denom = weight_expectation(
        d, k, full.sub_grid(t1, 1.0), BoundaryCase(Anchor.interior(y1), Anchor.on_upper()),
        schedule=schedule, settings=settings, seed=seed, key=(4, i1), component="upper_from_start",
    )
    factor, factor_se = _ratio_factor([bridge, upper], [denom])
    return _scaled_density(
        "h_mu_transition", h, factor, factor_se, curve_eval(k.lower, t2), curve_eval(k.upper, t2), {"drift": d.describe()}
    )


# -- meander ------------------------------------------------------------------


def _meander_series(k: Corridor, schedule: EpsilonSchedule | None, settings: KernelSettings, seed: int, grid: TimeGrid | None = None, tag: int = 0):
    grid = settings.grid(k) if grid is None else grid
    return sample_boundary_case(
        RngStream(seed, 0, (TAG_MEANDER, tag)), grid, k, BoundaryCase.meander(), schedule, settings.sampler,
        symmetric=False, finest_only=True, **settings.sampler_kwargs(),
    )


def estimate_k(
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    *,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """Marginal density of the Brownian corridor meander at t (finest level histogram)."""

    series = _meander_series(k, schedule, settings, seed)
    lvl = series.finest
    y = kernel_y_grid(k, t, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
    est = estimate_marginal_density(lvl.ensemble, t, k, y, margins=lvl.margins, name="k")
    est.meta.update({"eps": lvl.eps, "paths": lvl.ensemble.count})
    return est


def estimate_k_mu(
    d: DriftModel,
    k: Corridor,
    t: float,
    y_grid: np.ndarray | None = None,
    *,
    k_density: DensityEstimate | None = None,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """k_μ(t, y) = E[e^{−½N}] on [0,t] (0 → y) · E[e^{G}e^{−½N}] on [t,T] (free from y)
    / E[e^{G}e^{−½N}] over the meander, times k(t, y)."""

    base = estimate_k(k, t, y_grid, schedule=schedule, settings=settings, seed=seed) if k_density is None else k_density
    if d.is_zero:
        return DensityEstimate("k_mu", base.y, base.values, base.std_err, base.mass, base.mass_se, {**base.meta, "drift": "zero"})
    full = settings.grid(k)
    i = full.index_of(t)
    y = base.y
    lower = weight_expectations(
        d, k, full.sub_grid(k.t_start, t), [BoundaryCase(Anchor.on_lower(), Anchor.interior(v)) for v in y], y,
        name="lower_piece", schedule=schedule, settings=settings, seed=seed, key=(1, i),
    )
    free = weight_expectations(
        d, k, full.sub_grid(t, k.t_end), [BoundaryCase.meander(v) for v in y], y,
        name="free_piece", schedule=schedule, settings=settings, seed=seed, key=(5, i),
    )
    denom = _expectation_from(d, _meander_series(k, schedule, settings, seed).ensemble, False, "meander")
    factor, factor_se = _ratio_factor([lower, free], [denom])
    return _scaled_density("k_mu", base, factor, factor_se, curve_eval(k.lower, t), curve_eval(k.upper, t), {"drift": d.describe()})


def estimate_k_transition(
    k: Corridor,
    t1: float,
    y1: float,
    t2: float,
    y_grid: np.ndarray | None = None,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    """k(t1, y1, t2, y) = p(y1, y)·S(t2, y)/S(t1, y1), S the survival to t_end."""

    if not k.t_start <= t1 < t2 <= k.t_end:
        raise DomainError(f"need t_start <= t1 < t2 <= t_end, got t1={t1}, t2={t2}")
    y = kernel_y_grid(k, t2, settings.nodes) if y_grid is None else np.asarray(y_grid, dtype=float)
    p = estimate_p_kernel(k, t1, t2, y1, y, settings=settings, seed=seed, tag=1)
    if t2 < k.t_end:
        s2 = estimate_survival(k, t2, y, settings=settings, seed=seed)
        s2_vals, s2_se = s2.values, s2.std_err
    else:
        s2_vals, s2_se = np.ones(y.size), np.zeros(y.size)
    s1 = estimate_survival(k, t1, np.array([y1]), settings=settings, seed=seed)
    return product_estimate(
        "k_transition", y, [(p.values, p.std_err), (s2_vals, s2_se)], 1.0 / s1.values[0], s1.std_err[0] / s1.values[0],
        curve_eval(k.lower, t2), curve_eval(k.upper, t2), {"t1": t1, "y1": y1, "t2": t2},
    )


def estimate_k_mu_transition(
    d: DriftModel,
    k: Corridor,
    t1: float,
    y1: float,
    t2: float,
    y_grid: np.ndarray | None = None,
    *,
    k_density: DensityEstimate | None = None,
    schedule: EpsilonSchedule | None = None,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
) -> DensityEstimate:
    base = estimate_k_transition(k, t1, y1, t2, y_grid, settings=settings, seed=seed) if k_density is None else k_density
    if d.is_zero:
        return DensityEstimate(
            "k_mu_transition", base.y, base.values, base.std_err, base.mass, base.mass_se, {**base.meta, "drift": "zero"}
        )
    full = settings.grid(k)
    i1, i2 = full.index_of(t1), full.index_of(t2)
    y = base.y
    bridge = weight_expectations(
        d, k, full.sub_grid(t1, t2), [BoundaryCase(Anchor.interior(y1), Anchor.interior(v)) for v in y], y,
        name="bridge_piece", schedule=schedule, settings=settings, seed=seed, key=(3, i1, i2),
    )
    if t2 < k.t_end:
        free = weight_expectations(
            d, k, full.sub_grid(t2, k.t_end), [BoundaryCase.meander(v) for v in y], y,
            name="free_piece", schedule=schedule, settings=settings, seed=seed, key=(5, i2),
        )
    else:
        # at T the free piece is the single point y, weighted by e^{G(y)}
        g_vals = np.exp(eval_G(d, y))
        free = KernelTable("free_piece", y, g_vals, np.zeros_like(g_vals))
    denom = weight_expectation(
        d, k, full.sub_grid(t1, k.t_end), BoundaryCase.meander(y1), schedule=schedule, settings=settings,
        seed=seed, key=(5, i1, 1), component="free_from_start",
    )
    factor, factor_se = _ratio_factor([bridge, free], [denom])
    return _scaled_density(
        "k_mu_transition", base, factor, factor_se, curve_eval(k.lower, t2), curve_eval(k.upper, t2), {"drift": d.describe()}
    )


def estimate_meander_kernel_mean(
    k: Corridor,
    t: float,
    *,
    settings: KernelSettings = KernelSettings(),
    seed: int = 0,
    tag: int = 0,
) -> WeightExpectation:
    """E[Z̃^{g⁻}(W⁺)⁻¹ · 1_{K⁻(g⁺ − g⁻)}(W⁺)] for the standard meander W⁺ on [t_start, t]."""

    full = settings.grid(k)
    grid = full.sub_grid(k.t_start, t)
    kc = k.restricted(k.t_start, t)
    key = (TAG_MEANDER_KERNEL, full.index_of(t), tag)

    def block(ids: range) -> np.ndarray:
        rows = meander_rows(seed, ids, grid, key)
        return _meander_kernel_values(rows, grid, kc, settings.crossing_corrected)

    vals = _per_path(block, settings.paths)
    if not np.any(vals > 0):
        raise StarvationError("no meander stayed below the corridor width")
    mean, se = _mean_se(vals)
    return WeightExpectation(mean, se, float(vals.size))


# ---------------------------------------------------------------------------
# Moment-bound constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentConstants:
    d1: float
    d2: float
    c_lower: float
    c_upper: float
    bound: float


def moment_constants(k: Corridor, C: float, scan: int = 4097) -> MomentConstants:
    """Analytic constants of the moment bounds for a house-moving corridor on [0, 1].

    D⁽¹⁾ = exp(max|g⁻′|·W + max|g⁻″|·W + ½max g⁻′²) with W the largest width,
    D⁽²⁾ likewise with g⁺; c_{g−}, c_{g+} are the suprema of the Gaussian
    shift factors over the corridor; the bound is 2π D⁽¹⁾D⁽²⁾c_{g−}c_{g+}/C.
    """

    _require_unit_interval(k)
    ts = np.linspace(0.0, 1.0, scan)
    lo, hi = curve_eval(k.lower, ts), curve_eval(k.upper, ts)
    width = float(np.max(hi - lo))

    def d_const(g: Curve) -> float:
        d1 = np.abs(curve_eval(g, ts, 1))
        d2 = np.abs(curve_eval(g, ts, 2))
        return math.exp(float(np.max(d1)) * width + float(np.max(d2)) * width + 0.5 * float(np.max(d1 * d1)))

    b = k.b
    r = ts[1:]
    gl = lo[1:]
    c_lower = max(
        float(np.max(np.exp((2.0 * gl * x - gl * gl) / (2.0 * r)))) for x in (lo[1:], hi[1:])
    )
    r2 = ts[:-1]
    gu = hi[:-1] - b
    c_upper = max(
        float(np.max(np.exp((2.0 * (b - x) * gu - gu * gu) / (2.0 * (1.0 - r2))))) for x in (lo[:-1], hi[:-1])
    )
    d1, d2 = d_const(k.lower), d_const(k.upper)
    return MomentConstants(d1, d2, c_lower, c_upper, 2.0 * math.pi * d1 * d2 * c_lower * c_upper / C)


# ---------------------------------------------------------------------------
# Shared builds
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TableBuilder:
    """Memoised component estimates for one configuration.

    Every consumer (density output, verification checks, RN evaluators) asks
    the builder, so each component is estimated once per config.  With
    ``cache_root`` and ``config_hash`` set, kernel tables and scalars are also
    persisted to and restored from the Parquet cache.
    """

    k: Corridor
    d: DriftModel
    settings: KernelSettings = field(default_factory=KernelSettings)
    schedule: EpsilonSchedule | None = None
    seed: int = 0
    cache_root: Path | None = None
    config_hash: str | None = None
    _memo: dict[tuple, Any] = field(default_factory=dict, init=False, repr=False)
    _cached: pd.DataFrame | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.schedule is None:
            self.schedule = EpsilonSchedule.default_for(self.k)
        if self.cache_root is not None and self.config_hash is not None:
            self._cached = storage.load_tables(self.config_hash, root=self.cache_root)
            logger.info("loaded %d cached table rows for config %s", len(self._cached), self.config_hash[:12])

    @property
    def grid(self) -> TimeGrid:
        return self.settings.grid(self.k)

    def y_grid(self, t: float) -> np.ndarray:
        return kernel_y_grid(self.k, t, self.settings.nodes)

    # -- memo / cache plumbing -----------------------------------------------

    def _memoized(self, key: tuple, build: Callable[[], Any]) -> Any:
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    def _cached_table(self, name: str, t: float) -> KernelTable | None:
        if self._cached is None or self._cached.empty:
            return None
        rows = self._cached[(self._cached["name"] == name) & np.isclose(self._cached["t"], t)]
        if rows.empty:
            return None
        rows = rows.sort_values("y")
        return KernelTable(name, rows["y"].to_numpy(), rows["value"].to_numpy(), rows["std_err"].to_numpy(), {"t": t, "cached": True})

    def _store_table(self, table: KernelTable, t: float) -> None:
        if self.cache_root is None or self.config_hash is None:
            return
        frame = pd.DataFrame({"name": table.name, "t": t, "y": table.y, "value": table.values, "std_err": table.std_err})
        storage.write_table_part(frame, config_hash=self.config_hash, root=self.cache_root)

    def _table(self, name: str, t: float, build: Callable[[], KernelTable]) -> KernelTable:
        def load_or_build() -> KernelTable:
            cached = self._cached_table(name, t)
            if cached is not None:
                return cached
            table = build()
            self._store_table(table, t)
            return table

        return self._memoized((name, round(t, 12)), load_or_build)

    def _scalar(self, name: str, t: float, build: Callable[[], tuple[float, float]]) -> tuple[float, float]:
        def load_or_build() -> tuple[float, float]:
            cached = self._cached_table(name, t)
            if cached is not None:
                return float(cached.values[0]), float(cached.std_err[0])
            value, se = build()
            if self.cache_root is not None and self.config_hash is not None:
                storage.write_table_part(
                    [{"name": name, "t": t, "y": math.nan, "value": value, "std_err": se}],
                    config_hash=self.config_hash, root=self.cache_root,
                )
            return value, se

        return self._memoized((name, round(t, 12)), load_or_build)

    # -- components ------------------------------------------------------------

    def C(self) -> ConstantEstimate | tuple[float, float]:
        if ("C_fit", 0.0) in self._memo:
            return self._memo[("C_fit", 0.0)]

        def build() -> tuple[float, float]:
            fit = estimate_C_constant(self.k, self.schedule, settings=self.settings, seed=self.seed)
            self._memo[("C_fit", 0.0)] = fit
            return fit.estimate, fit.std_err

        return self._scalar("C", 0.0, build)

    def q_up(self, t: float) -> KernelTable:
        return self._table("q_up", t, lambda: estimate_q_up(self.k, t, self.y_grid(t), settings=self.settings, seed=self.seed))

    def q_down(self, t: float) -> KernelTable:
        return self._table("q_down", t, lambda: estimate_q_down(self.k, t, self.y_grid(t), settings=self.settings, seed=self.seed))

    def lower_piece(self, t: float) -> KernelTable:
        y = self.y_grid(t)
        return self._table("lower_piece", t, lambda: weight_expectations(
            self.d, self.k, self.grid.sub_grid(self.k.t_start, t),
            [BoundaryCase(Anchor.on_lower(), Anchor.interior(v)) for v in y], y, name="lower_piece",
            schedule=self.schedule, settings=self.settings, seed=self.seed, key=(1, self.grid.index_of(t)),
        ))

    def upper_piece(self, t: float) -> KernelTable:
        y = self.y_grid(t)
        return self._table("upper_piece", t, lambda: weight_expectations(
            self.d, self.k, self.grid.sub_grid(t, self.k.t_end),
            [BoundaryCase(Anchor.interior(v), Anchor.on_upper()) for v in y], y, name="upper_piece",
            schedule=self.schedule, settings=self.settings, seed=self.seed, key=(2, self.grid.index_of(t)),
        ))

    def house_moving_mean(self) -> WeightExpectation:
        value, se = self._scalar("house_moving_mean", 0.0, lambda: _pair(house_moving_expectation(
            self.d, self.k, schedule=self.schedule, settings=self.settings, seed=self.seed,
        )))
        return WeightExpectation(value, se, math.nan)

    def meander_mean(self, t: float, tag: int = 0) -> WeightExpectation:
        """E[e^{G(W(t))}e^{−½N}] over the corridor meander on [t_start, t]."""

        def build() -> tuple[float, float]:
            if self.d.is_zero:
                return 1.0, 0.0
            grid = self.grid.sub_grid(self.k.t_start, t)
            series = _meander_series(self.k.restricted(self.k.t_start, t), self.schedule, self.settings, self.seed, grid, tag + 1)
            return _pair(_expectation_from(self.d, series.ensemble, False, "meander"))

        value, se = self._scalar(f"meander_mean_{tag}", t, build)
        return WeightExpectation(value, se, math.nan)

    def meander_kernel_mean(self, t: float, tag: int = 0) -> WeightExpectation:
        value, se = self._scalar(f"meander_kernel_{tag}", t, lambda: _pair(
            estimate_meander_kernel_mean(self.k, t, settings=self.settings, seed=self.seed, tag=tag)
        ))
        return WeightExpectation(value, se, math.nan)

    def h(self, t: float) -> DensityEstimate:
        return self._memoized(("h_density", t), lambda: estimate_h(
            self.k, t, C=self.C(), tables=(self.q_up(t), self.q_down(t)), settings=self.settings, seed=self.seed
        ))

    def h_mu(self, t: float) -> DensityEstimate:
        def build() -> DensityEstimate:
            zeta = None
            if not self.d.is_zero:
                zeta = (self.lower_piece(t), self.upper_piece(t), self.house_moving_mean())
            return estimate_h_mu(self.d, self.k, t, h=self.h(t), zeta=zeta, settings=self.settings, seed=self.seed)

        return self._memoized(("h_mu_density", t), build)

    def h_transition(self, t1: float, y1: float, t2: float) -> DensityEstimate:
        def build() -> DensityEstimate:
            y = self.y_grid(t2)
            p = estimate_p_kernel(self.k, t1, t2, y1, y, settings=self.settings, seed=self.seed)
            q1 = _q_down_at(self.k, t1, y1, self.settings, self.seed)
            return estimate_h_transition(self.k, t1, y1, t2, tables=(p, self.q_down(t2), q1), settings=self.settings)

        return self._memoized(("h_transition", t1, y1, t2), build)

    def h_mu_transition(self, t1: float, y1: float, t2: float) -> DensityEstimate:
        return self._memoized(("h_mu_transition", t1, y1, t2), lambda: estimate_h_mu_transition(
            self.d, self.k, t1, y1, t2, h=self.h_transition(t1, y1, t2), schedule=self.schedule,
            settings=self.settings, seed=self.seed,
        ))

    def k_density(self, t: float) -> DensityEstimate:
        return self._memoized(("k_density", t), lambda: estimate_k(
            self.k, t, self.y_grid(t), schedule=self.schedule, settings=self.settings, seed=self.seed
        ))

    def k_mu(self, t: float) -> DensityEstimate:
        return self._memoized(("k_mu_density", t), lambda: estimate_k_mu(
            self.d, self.k, t, k_density=self.k_density(t), schedule=self.schedule, settings=self.settings, seed=self.seed
        ))

    def k_transition(self, t1: float, y1: float, t2: float) -> DensityEstimate:
        return self._memoized(("k_transition", t1, y1, t2), lambda: estimate_k_transition(
            self.k, t1, y1, t2, self.y_grid(t2), settings=self.settings, seed=self.seed
        ))

    def k_mu_transition(self, t1: float, y1: float, t2: float) -> DensityEstimate:
        return self._memoized(("k_mu_transition", t1, y1, t2), lambda: estimate_k_mu_transition(
            self.d, self.k, t1, y1, t2, k_density=self.k_transition(t1, y1, t2), schedule=self.schedule,
            settings=self.settings, seed=self.seed,
        ))

    def p(self, t1: float, y1: float, t2: float) -> KernelTable:
        return self._memoized(("p", t1, y1, t2), lambda: estimate_p_kernel(
            self.k, t1, t2, y1, self.y_grid(t2), settings=self.settings, seed=self.seed
        ))

    def p_into(self, t1: float, t2: float, z: float, y: np.ndarray) -> KernelTable:
        return self._memoized(("p_into", t1, t2, z, tuple(np.round(y, 12))), lambda: _p_into(
            self.k, t1, t2, z, np.asarray(y, dtype=float), self.settings, self.seed, 2
        ))

    def piece_table(
        self,
        t1: float,
        t2: float,
        y: np.ndarray,
        *,
        start: Anchor | None = None,
        end: Anchor | None = None,
        name: str,
        key: tuple[int, ...],
    ) -> KernelTable:
        """Node-wise weight expectations of pieces on [t1, t2].

        Exactly one of ``start``/``end`` is given; the other end sits at each
        node of ``y``.
        """

        if (start is None) == (end is None):
            raise DomainError("piece_table needs exactly one of start and end")
        y = np.asarray(y, dtype=float)
        if end is None:
            cases = [BoundaryCase(start, Anchor.interior(v)) for v in y]
        else:
            cases = [BoundaryCase(Anchor.interior(v), end) for v in y]
        memo_key = ("piece", name, t1, t2, key, start, end, tuple(np.round(y, 12).tolist()))
        return self._memoized(memo_key, lambda: weight_expectations(
            self.d, self.k, self.grid.sub_grid(t1, t2), cases, y, name=name, schedule=self.schedule,
            settings=self.settings, seed=self.seed, key=key,
        ))

    def moment_constants(self) -> MomentConstants:
        c, _ = tuple(self.C())
        return moment_constants(self.k, c)


def _pair(e: WeightExpectation) -> tuple[float, float]:
    return e.value, e.std_err
