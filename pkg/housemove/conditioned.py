"""Samplers for corridor-conditioned Brownian paths.

Two engines produce the same conditioned laws:

* rejection: propose exact bridge / Brownian / meander paths, keep those that
  stay in the (widened) corridor at the nodes and survive a per-step Bernoulli
  with the Brownian-bridge no-crossing probability;
* sequential Monte Carlo: propagate bridge or free increments one step at a
  time, weight particles by the same per-step survival probabilities and
  resample when the ESS drops.

Boundary-anchored limits (house-moving, corridor meander, the Bessel-type and
excursion-type cases) are approximated by running either engine on a
geometric schedule of margins ε_k and reporting the finest level together
with KS distances between consecutive levels.

Streams: level k of a component keyed ``rng = RngStream(seed, base, subkey)``
uses ``subkey + (k,)``.  Rejection gives path ``i`` its own stream
``(seed, base + i, subkey + (k, attempt))``; SMC draws the whole noise matrix
from ``(seed, base, subkey + (k,))``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Sequence

import numpy as np
from scipy.special import logsumexp

from .corridor import Corridor, SamplePath, TimeGrid, contains_mask, curve_eval
from .drift import DriftModel, eval_G, n_functional
from .errors import (
    ConvergenceWarning,
    DegeneracyError,
    DomainError,
    PreconditionError,
    RejectionBudgetError,
)
from .pool import run_tasks_sync
from .samplers import (
    RngStream,
    bes3_bridge_rows,
    brownian_rows,
    bridge_rows,
    meander_rows,
    row_generators,
)
from .stats import effective_sample_size, ks_noise_level, normalized_weights, weighted_ks

logger = logging.getLogger(__name__)

__all__ = [
    "nocross_prob_step",
    "WeightedEnsemble",
    "Proposal",
    "EpsilonSchedule",
    "Anchor",
    "BoundaryCase",
    "LevelResult",
    "LevelSeries",
    "rejection_ensemble",
    "rejection_corridor_sample",
    "corridor_probability",
    "smc_corridor_sample",
    "sample_boundary_case",
    "sample_housemoving_bm",
    "sample_corridor_meander_bm",
]

DEFAULT_PROBES = (0.25, 0.5, 0.75)
DEFAULT_MAX_ATTEMPTS = 200
RESAMPLING_SCHEMES = ("multinomial", "systematic")


# ---------------------------------------------------------------------------
# Crossing correction
# ---------------------------------------------------------------------------


def nocross_prob_step(x, y, dt: float, level_start, level_end, side: str = "above"):
    """P(a Brownian bridge x → y over ``dt`` does not cross a linear level).

    ``side="above"`` means the path must stay above the level (a lower wall);
    ``"below"`` is the mirror case.  Points on or beyond the level give 0.
    """

    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if side == "above":
        d0 = np.subtract(x, level_start)
        d1 = np.subtract(y, level_end)
    elif side == "below":
        d0 = np.subtract(level_start, x)
        d1 = np.subtract(level_end, y)
    else:
        raise DomainError(f"side must be 'above' or 'below', got {side!r}")
    ok = (d0 > 0) & (d1 > 0)
    prod = np.where(ok, d0 * d1, 0.0)
    p = np.where(ok, -np.expm1(-2.0 * prod / dt), 0.0)
    return float(p) if np.ndim(p) == 0 else p


def _step_survival(prev, nxt, dt, lo0, lo1, hi0, hi1, crossing_corrected: bool) -> np.ndarray:
    """Per-step survival probability against both walls (secant boundaries)."""

    if crossing_corrected:
        return nocross_prob_step(prev, nxt, dt, lo0, lo1, "above") * nocross_prob_step(
            prev, nxt, dt, hi0, hi1, "below"
        )
    return ((nxt >= lo1) & (nxt <= hi1)).astype(float)


def _survival_matrix(values: np.ndarray, grid: TimeGrid, k: Corridor, margins, crossing_corrected: bool) -> np.ndarray:
    lo, hi = k.bounds(grid.times, margins)
    a, b = values[:, :-1], values[:, 1:]
    if not crossing_corrected:
        return np.ones_like(a)
    return _step_survival(a, b, grid.dt, lo[:-1], lo[1:], hi[:-1], hi[1:], True)


# ---------------------------------------------------------------------------
# Ensembles and proposals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    """Paths on one grid with finite log-weights."""

    grid: TimeGrid
    values: np.ndarray
    log_weights: np.ndarray
    path_ids: np.ndarray | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        lw = np.asarray(self.log_weights, dtype=float).ravel()
        if vals.shape[1] != self.grid.n_steps + 1:
            raise DomainError(f"ensemble rows have {vals.shape[1]} nodes, grid needs {self.grid.n_steps + 1}")
        if lw.shape[0] != vals.shape[0]:
            raise DomainError("one log-weight per path is required")
        if vals.shape[0] == 0:
            raise DegeneracyError("empty ensemble")
        if not np.all(np.isfinite(lw)):
            raise DomainError("ensemble log-weights must be finite")
        ids = np.arange(vals.shape[0]) if self.path_ids is None else np.asarray(self.path_ids, dtype=np.int64)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "path_ids", ids)

    @classmethod
    def from_paths(cls, paths: Sequence[SamplePath], log_weights: Sequence[float] | None = None) -> "WeightedEnsemble":
        if not paths:
            raise DegeneracyError("empty ensemble")
        grid = paths[0].grid
        if any(p.grid != grid for p in paths):
            raise DomainError("all ensemble paths must share one grid")
        lw = np.zeros(len(paths)) if log_weights is None else np.asarray(log_weights, dtype=float)
        return cls(grid, np.stack([p.values for p in paths]), lw)

    @property
    def count(self) -> int:
        return int(self.values.shape[0])

    @property
    def ess(self) -> float:
        return effective_sample_size(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        return normalized_weights(self.log_weights)

    @property
    def paths(self) -> list[SamplePath]:
        return [SamplePath(self.grid, row) for row in self.values]

    def marginal(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Values at grid time ``t`` with their normalized weights."""
        return self.values[:, self.grid.index_of(t)], self.weights

    def with_log_weights(self, extra: np.ndarray) -> "WeightedEnsemble":
        """Same paths with ``extra`` added to every log-weight."""
        return replace(self, log_weights=self.log_weights + np.asarray(extra, dtype=float))

    def restricted(self, t1: float, t2: float) -> "WeightedEnsemble":
        i1, i2 = self.grid.index_of(t1), self.grid.index_of(t2)
        return replace(self, grid=self.grid.sub_grid(t1, t2), values=self.values[:, i1 : i2 + 1])


PROPOSAL_KINDS = ("bridge", "bes3_bridge", "meander", "brownian")


@dataclass(frozen=True)
class Proposal:
    """Exact proposal law for rejection sampling.

    ``bridge``: start → end; ``bes3_bridge``: BES(3) bridge start → end;
    ``meander``: start + Brownian meander; ``brownian``: free Brownian motion
    from start.
    """

    kind: str
    start: float = 0.0
    end: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PROPOSAL_KINDS:
            raise DomainError(f"unknown proposal {self.kind!r}; expected one of {PROPOSAL_KINDS}")
        if self.kind in ("bridge", "bes3_bridge") and self.end is None:
            raise DomainError(f"{self.kind} proposal needs an end value")

    @property
    def pinned(self) -> bool:
        return self.kind in ("bridge", "bes3_bridge")

    def rows(self, seed: int, ids, grid: TimeGrid, subkey: tuple[int, ...] = ()) -> np.ndarray:
        if self.kind == "bridge":
            return bridge_rows(seed, ids, grid, self.start, self.end, subkey)
        if self.kind == "bes3_bridge":
            return bes3_bridge_rows(seed, ids, grid, self.start, self.end, subkey)
        if self.kind == "meander":
            return self.start + meander_rows(seed, ids, grid, subkey)
        return brownian_rows(seed, ids, grid, self.start, subkey)


def _check_proposal(grid: TimeGrid, proposal: Proposal, k: Corridor, margins) -> None:
    if margins[0] < 0 or margins[1] < 0:
        raise DomainError("margins must be non-negative")
    lo, hi = k.bounds(np.array([grid.t_start, grid.t_end]), margins)
    if not lo[0] <= proposal.start <= hi[0]:
        raise PreconditionError(f"proposal start {proposal.start:g} is outside the widened corridor")
    if proposal.pinned and not lo[1] <= proposal.end <= hi[1]:
        raise PreconditionError(f"proposal end {proposal.end:g} is outside the widened corridor")


# ---------------------------------------------------------------------------
# Rejection
# ---------------------------------------------------------------------------


def rejection_ensemble(
    seed: int,
    ids: Sequence[int],
    grid: TimeGrid,
    proposal: Proposal,
    k: Corridor,
    margins: tuple[float, float] = (0.0, 0.0),
    *,
    crossing_corrected: bool = True,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    subkey: tuple[int, ...] = (),
) -> WeightedEnsemble:
    """One accepted path per id, attempts drawn in vectorised rounds.

    Attempt ``a`` for id ``i`` uses stream ``(seed, i, subkey + (a,))`` for
    the proposal and ``(seed, i, subkey + (a, 1))`` for the per-step
    uniforms, so a node-only run sees exactly the proposals of a corrected
    run with the same seed.
    """

    _check_proposal(grid, proposal, k, margins)
    ids = np.asarray(ids, dtype=np.int64)
    out = np.empty((ids.size, grid.n_steps + 1))
    pending = np.arange(ids.size)
    proposed = accepted = 0
    for attempt in range(max_attempts):
        if pending.size == 0:
            break
        key = subkey + (attempt,)
        rows = proposal.rows(seed, ids[pending], grid, key)
        ok = contains_mask(k, grid, rows, *margins)
        if crossing_corrected:
            probs = _survival_matrix(rows, grid, k, margins, True)
            u = np.stack([g.random(grid.n_steps) for g in row_generators(seed, ids[pending], key + (1,))])
            ok &= np.all(u < probs, axis=1)
        out[pending[ok]] = rows[ok]
        proposed += pending.size
        accepted += int(np.count_nonzero(ok))
        pending = pending[~ok]
    rate = accepted / proposed if proposed else 0.0
    if pending.size:
        raise RejectionBudgetError(
            f"{pending.size} of {ids.size} paths still rejected; widen the margins or use the smc sampler",
            acceptance_rate=rate,
            attempts=max_attempts,
        )
    return WeightedEnsemble(
        grid,
        out,
        np.zeros(ids.size),
        ids,
        {"sampler": "rejection", "acceptance_rate": rate, "proposals": proposed},
    )


def rejection_corridor_sample(
    rng: RngStream,
    grid: TimeGrid,
    proposal: Proposal,
    k: Corridor,
    margins: tuple[float, float] = (0.0, 0.0),
    crossing_corrected: bool = True,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> SamplePath:
    ens = rejection_ensemble(
        rng.seed,
        [rng.stream_id],
        grid,
        proposal,
        k,
        margins,
        crossing_corrected=crossing_corrected,
        max_attempts=max_attempts,
        subkey=rng.subkey,
    )
    return SamplePath(grid, ens.values[0])


def corridor_probability(
    rng: RngStream,
    grid: TimeGrid,
    proposal: Proposal,
    k: Corridor,
    margins: tuple[float, float] = (0.0, 0.0),
    paths: int = 10_000,
    crossing_corrected: bool = True,
) -> tuple[float, float]:
    """Rao–Blackwellised P(proposal stays in the widened corridor) with SE.

    Each proposal contributes its node indicator times the product of its
    per-step no-crossing probabilities.
    """

    _check_proposal(grid, proposal, k, margins)
    ids = rng.stream_id + np.arange(paths)
    rows = proposal.rows(rng.seed, ids, grid, rng.subkey)
    ok = contains_mask(k, grid, rows, *margins)
    vals = np.where(ok, np.prod(_survival_matrix(rows, grid, k, margins, crossing_corrected), axis=1), 0.0)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(paths))


# ---------------------------------------------------------------------------
# Sequential Monte Carlo
# ---------------------------------------------------------------------------


def _resample(weights: np.ndarray, gen: np.random.Generator, scheme: str) -> np.ndarray:
    n = weights.size
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    if scheme == "systematic":
        u = (gen.random() + np.arange(n)) / n
    else:
        u = np.sort(gen.random(n))
    return np.searchsorted(cdf, u, side="right").clip(0, n - 1)


def smc_corridor_sample(
    rng: RngStream,
    grid: TimeGrid,
    d: DriftModel | None,
    k: Corridor,
    margins: tuple[float, float],
    case: "BoundaryCase",
    particles: int,
    resample_threshold: float = 0.5,
    *,
    resampling: str = "multinomial",
    crossing_corrected: bool = True,
) -> WeightedEnsemble:
    """Particle approximation of the corridor-conditioned law.

    Pinned ends propose Brownian-bridge increments toward the end anchor;
    free ends propose plain Brownian increments.  The incremental weight is
    the step survival probability, times exp(−½∫(μ′+μ²)) by the trapezoid
    rule when a drift is given (plus e^{G} at a free end).  Dead particles
    are dropped from the returned ensemble; ``diagnostics["log_evidence"]``
    is the log of the mean unnormalised weight.
    """

    if particles < 2:
        raise DomainError(f"smc needs at least 2 particles, got {particles}")
    if not 0.0 <= resample_threshold <= 1.0:
        raise DomainError(f"resample_threshold must lie in [0, 1], got {resample_threshold}")
    if resampling not in RESAMPLING_SCHEMES:
        raise DomainError(f"unknown resampling scheme {resampling!r}")
    alpha, beta = case.resolve(k, grid)
    _check_proposal(grid, Proposal("bridge" if beta is not None else "brownian", alpha, beta), k, margins)

    n, dt = grid.n_steps, grid.dt
    noise = rng.generator().standard_normal((particles, n))
    rs_gen = rng.child(1).generator()
    lo, hi = k.bounds(grid.times, margins)
    weighted_drift = d is not None and not d.is_zero

    def half_n(v: np.ndarray) -> np.ndarray:
        return d.dmu(v) + d.mu(v) ** 2

    x = np.empty((particles, n + 1))
    x[:, 0] = alpha
    logw = np.zeros(particles)
    log_evidence = 0.0
    ess_trajectory: list[float] = []
    resamples = 0
    f_prev = half_n(x[:, 0]) if weighted_drift else None
    for i in range(n):
        if beta is None:
            nxt = x[:, i] + math.sqrt(dt) * noise[:, i]
        elif i == n - 1:
            nxt = np.full(particles, beta)
        else:
            rem = n - i
            nxt = x[:, i] + (beta - x[:, i]) / rem + math.sqrt(dt * (rem - 1) / rem) * noise[:, i]
        x[:, i + 1] = nxt
        with np.errstate(divide="ignore"):
            inc = np.log(_step_survival(x[:, i], nxt, dt, lo[i], lo[i + 1], hi[i], hi[i + 1], crossing_corrected))
        if weighted_drift:
            f_next = half_n(nxt)
            inc = inc - 0.25 * dt * (f_prev + f_next)
            f_prev = f_next
        new_logw = logw + inc
        if not np.any(np.isfinite(new_logw)):
            raise DegeneracyError(
                f"all {particles} particles left the corridor at step {i + 1} (t={grid.times[i + 1]:.6g})",
                component=case.label,
            )
        log_evidence += float(logsumexp(new_logw) - logsumexp(logw))
        logw = new_logw
        ess = effective_sample_size(logw)
        ess_trajectory.append(ess)
        if i < n - 1 and ess < resample_threshold * particles:
            idx = _resample(normalized_weights(logw), rs_gen, resampling)
            x[:, : i + 2] = x[idx, : i + 2]
            if weighted_drift:
                f_prev = f_prev[idx]
            logw = np.zeros(particles)
            resamples += 1

    if weighted_drift and beta is None:
        logw = logw + eval_G(d, x[:, -1])
    alive = np.isfinite(logw)
    out_logw = logw[alive] - np.max(logw[alive])
    return WeightedEnsemble(
        grid,
        x[alive],
        out_logw,
        rng.stream_id + np.flatnonzero(alive),
        {
            "sampler": "smc",
            "log_evidence": log_evidence,
            "ess_trajectory": ess_trajectory,
            "resamples": resamples,
            "particles": particles,
        },
    )


# ---------------------------------------------------------------------------
# Schedules and boundary cases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonSchedule:
    """ε_k = eps0·ρ^k for k < levels; η±(ε) = scale±·ε."""

    eps0: float
    rho: float = 0.5
    levels: int = 5
    eta_minus_scale: float = 1.0
    eta_plus_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.eps0 <= 0:
            raise DomainError(f"eps0 must be positive, got {self.eps0}")
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")
        if self.levels < 1:
            raise DomainError(f"levels must be >= 1, got {self.levels}")
        if self.eta_minus_scale <= 0 or self.eta_plus_scale <= 0:
            raise DomainError("eta scales must be positive")

    @classmethod
    def default_for(cls, k: Corridor, **overrides: Any) -> "EpsilonSchedule":
        return cls(eps0=0.2 * k.min_width, **overrides)

    def eps(self, level: int) -> float:
        if not 0 <= level < self.levels:
            raise DomainError(f"level {level} outside 0..{self.levels - 1}")
        return self.eps0 * self.rho**level

    @property
    def epsilons(self) -> np.ndarray:
        return self.eps0 * self.rho ** np.arange(self.levels)

    def margins(self, level: int) -> tuple[float, float]:
        e = self.eps(level)
        return self.eta_minus_scale * e, self.eta_plus_scale * e

    @property
    def max_eta(self) -> float:
        return max(self.margins(0))

    def validate_delta(self, delta: float) -> None:
        """The drift bound band must cover every widened corridor."""
        if delta < self.max_eta:
            raise PreconditionError(f"delta {delta:g} is smaller than the largest margin {self.max_eta:g}")


ANCHOR_KINDS = ("interior", "on_lower", "on_upper", "free")


@dataclass(frozen=True)
class Anchor:
    kind: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ANCHOR_KINDS:
            raise DomainError(f"unknown anchor {self.kind!r}")
        if (self.kind == "interior") != (self.value is not None):
            raise DomainError("only interior anchors carry a value")

    @classmethod
    def interior(cls, value: float) -> "Anchor":
        return cls("interior", float(value))

    @classmethod
    def on_lower(cls) -> "Anchor":
        return cls("on_lower")

    @classmethod
    def on_upper(cls) -> "Anchor":
        return cls("on_upper")

    @classmethod
    def free(cls) -> "Anchor":
        return cls("free")

    @property
    def on_curve(self) -> bool:
        return self.kind in ("on_lower", "on_upper")

    def resolve(self, k: Corridor, t: float) -> float | None:
        if self.kind == "free":
            return None
        if self.kind == "on_lower":
            return curve_eval(k.lower, t)
        if self.kind == "on_upper":
            return curve_eval(k.upper, t)
        lo, hi = curve_eval(k.lower, t), curve_eval(k.upper, t)
        if not lo < self.value < hi:
            raise DomainError(f"interior anchor {self.value:g} is not strictly inside ({lo:g}, {hi:g}) at t={t:g}")
        return self.value


@dataclass(frozen=True)
class BoundaryCase:
    """Start and end anchors of a conditioned path.

    ``label`` names the combination: ``i`` interior to interior, ``ii`` wall to
    interior, ``iii`` interior to wall, ``iv`` and ``v`` wall to the same or the
    opposite wall, ``vi`` and ``vii`` a free end from an interior or a wall start.
    """

    start: Anchor
    end: Anchor

    def __post_init__(self) -> None:
        if self.start.kind == "free":
            raise DomainError("the start anchor cannot be free")

    @classmethod
    def house_moving(cls) -> "BoundaryCase":
        return cls(Anchor.on_lower(), Anchor.on_upper())

    @classmethod
    def meander(cls, start: float | None = None) -> "BoundaryCase":
        return cls(Anchor.on_lower() if start is None else Anchor.interior(start), Anchor.free())

    @property
    def label(self) -> str:
        s, e = self.start, self.end
        if e.kind == "free":
            return "vii" if s.on_curve else "vi"
        if not s.on_curve and not e.on_curve:
            return "i"
        if s.on_curve and not e.on_curve:
            return "ii"
        if not s.on_curve:
            return "iii"
        return "iv" if s.kind == e.kind else "v"

    @property
    def on_boundary(self) -> bool:
        """True when some anchor sits on a curve, so a margin schedule applies."""
        return self.start.on_curve or self.end.on_curve

    @property
    def pinned(self) -> bool:
        return self.end.kind != "free"

    def resolve(self, k: Corridor, grid: TimeGrid) -> tuple[float, float | None]:
        return self.start.resolve(k, grid.t_start), self.end.resolve(k, grid.t_end)

    def level_margins(self, schedule: "EpsilonSchedule | None", level: int, *, symmetric: bool = True) -> tuple[float, float]:
        """Margins of ``level``; zero for interior-only cases.

        With ``symmetric=False`` a free-end case keeps a margin only on the
        side its start anchor touches.
        """

        if not self.on_boundary or schedule is None:
            return 0.0, 0.0
        eta_minus, eta_plus = schedule.margins(level)
        if not symmetric and not self.pinned:
            if self.start.kind == "on_lower":
                return eta_minus, 0.0
            return 0.0, eta_plus
        return eta_minus, eta_plus


# ---------------------------------------------------------------------------
# Level series
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LevelResult:
    level: int
    eps: float
    margins: tuple[float, float]
    ensemble: WeightedEnsemble

    def summary(self) -> dict[str, Any]:
        diag = self.ensemble.diagnostics
        out = {
            "level": self.level,
            "eps": self.eps,
            "eta_minus": self.margins[0],
            "eta_plus": self.margins[1],
            "paths": self.ensemble.count,
            "ess": self.ensemble.ess,
            "sampler": diag.get("sampler"),
        }
        if "acceptance_rate" in diag:
            out["acceptance_rate"] = diag["acceptance_rate"]
        if "log_evidence" in diag:
            out["log_evidence"] = diag["log_evidence"]
            out["resamples"] = diag["resamples"]
            out["min_ess"] = float(min(diag["ess_trajectory"]))
        return out


@dataclass(frozen=True, eq=False)
class LevelSeries:
    """Per-level ensembles of one boundary case plus KS-by-level diagnostics.

    ``ks[p]`` holds ``(D, p_value)`` between levels j and j+1 at probe
    fraction ``p`` of the interval.
    """

    case: BoundaryCase
    levels: list[LevelResult]
    probes: tuple[float, ...]
    ks: dict[float, list[tuple[float, float]]]

    @property
    def finest(self) -> LevelResult:
        return self.levels[-1]

    @property
    def ensemble(self) -> WeightedEnsemble:
        return self.finest.ensemble

    def summary(self) -> dict[str, Any]:
        return {
            "case": self.case.label,
            "levels": [lvl.summary() for lvl in self.levels],
            "ks_by_level": {f"{p:g}": [d for d, _ in v] for p, v in self.ks.items()},
        }


def _run_level(
    level: int,
    *,
    rng: RngStream,
    grid: TimeGrid,
    k: Corridor,
    case: BoundaryCase,
    schedule: EpsilonSchedule | None,
    sampler: str,
    paths: int,
    drift: DriftModel | None,
    symmetric: bool,
    crossing_corrected: bool,
    resample_threshold: float,
    resampling: str,
    max_attempts: int,
) -> LevelResult:
    margins = case.level_margins(schedule, level, symmetric=symmetric)
    eps = schedule.eps(level) if case.on_boundary and schedule is not None else 0.0
    key = rng.subkey + (level,)
    if sampler == "smc":
        ens = smc_corridor_sample(
            RngStream(rng.seed, rng.stream_id, key),
            grid,
            drift,
            k,
            margins,
            case,
            paths,
            resample_threshold,
            resampling=resampling,
            crossing_corrected=crossing_corrected,
        )
    else:
        alpha, beta = case.resolve(k, grid)
        proposal = Proposal("brownian", alpha) if beta is None else Proposal("bridge", alpha, beta)
        ens = rejection_ensemble(
            rng.seed,
            rng.stream_id + np.arange(paths),
            grid,
            proposal,
            k,
            margins,
            crossing_corrected=crossing_corrected,
            max_attempts=max_attempts,
            subkey=key,
        )
        if drift is not None and not drift.is_zero:
            lw = -0.5 * n_functional(drift, grid, ens.values)
            if beta is None:
                lw = lw + eval_G(drift, ens.values[:, -1])
            ens = ens.with_log_weights(lw - np.max(lw))
    logger.info(
        "case %s level %d: eps=%.4g margins=(%.4g, %.4g) paths=%d ess=%.1f",
        case.label, level, eps, margins[0], margins[1], ens.count, ens.ess,
    )
    return LevelResult(level, eps, margins, ens)


def _ks_by_level(grid: TimeGrid, levels: list[LevelResult], probes: Sequence[float]) -> dict[float, list[tuple[float, float]]]:
    out: dict[float, list[tuple[float, float]]] = {}
    for p in probes:
        t = grid.snap(grid.t_start + p * grid.length)
        row = []
        for a, b in zip(levels, levels[1:]):
            xa, wa = a.ensemble.marginal(t)
            xb, wb = b.ensemble.marginal(t)
            row.append(weighted_ks(xa, wa, xb, wb))
        out[p] = row
    return out


def _warn_non_monotone(series: LevelSeries) -> None:
    levels = series.levels
    for p, row in series.ks.items():
        for j in range(len(row) - 1):
            noise = ks_noise_level(levels[j + 1].ensemble.ess, levels[j + 2].ensemble.ess)
            if row[j + 1][0] > row[j][0] + 2.0 * noise:
                warnings.warn(
                    f"case {series.case.label}: KS distance at probe {p:g} grows from {row[j][0]:.4f} "
                    f"to {row[j + 1][0]:.4f} between levels {j}->{j + 1} and {j + 1}->{j + 2}",
                    ConvergenceWarning,
                    stacklevel=3,
                )


def sample_boundary_case(
    rng: RngStream,
    grid: TimeGrid,
    k: Corridor,
    case: BoundaryCase,
    schedule: EpsilonSchedule | None = None,
    sampler: str = "smc",
    *,
    paths: int = 2000,
    drift: DriftModel | None = None,
    symmetric: bool = True,
    crossing_corrected: bool = True,
    resample_threshold: float = 0.5,
    resampling: str = "multinomial",
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    probes: Sequence[float] = DEFAULT_PROBES,
    finest_only: bool = False,
    workers: int = 1,
) -> LevelSeries:
    """ε-schedule ensembles for any anchor combination.

    Interior-only cases (i) and (vi) need no schedule and run a single level
    0 with zero margins.  With ``finest_only`` only the last level is sampled;
    its streams are those it would have in a full run.
    """

    if sampler not in ("smc", "rejection"):
        raise DomainError(f"unknown sampler {sampler!r}")
    if grid.t_start < k.t_start - 1e-12 or grid.t_end > k.t_end + 1e-12:
        raise PreconditionError(f"grid [{grid.t_start}, {grid.t_end}] leaves the corridor domain {k.domain}")
    if case.on_boundary:
        if schedule is None:
            schedule = EpsilonSchedule.default_for(k)
        level_ids = [schedule.levels - 1] if finest_only else list(range(schedule.levels))
    else:
        level_ids = [0]
    run = partial(
        _run_level,
        rng=rng,
        grid=grid,
        k=k,
        case=case,
        schedule=schedule,
        sampler=sampler,
        paths=paths,
        drift=drift,
        symmetric=symmetric,
        crossing_corrected=crossing_corrected,
        resample_threshold=resample_threshold,
        resampling=resampling,
        max_attempts=max_attempts,
    )
    levels = run_tasks_sync(run, level_ids, workers)
    series = LevelSeries(case, levels, tuple(probes), _ks_by_level(grid, levels, probes))
    _warn_non_monotone(series)
    return series


def sample_housemoving_bm(
    rng: RngStream,
    grid: TimeGrid,
    k: Corridor,
    schedule: EpsilonSchedule | None = None,
    sampler: str = "smc",
    **kwargs: Any,
) -> LevelSeries:
    """Brownian house-moving 0 = g⁻(t_start) → g⁺(t_end) on the whole domain."""

    if not k.is_house_moving:
        raise PreconditionError(f"house-moving needs g-(t_start) = 0, got {curve_eval(k.lower, k.t_start):g}")
    if abs(grid.t_start - k.t_start) > 1e-12 or abs(grid.t_end - k.t_end) > 1e-12:
        raise PreconditionError("house-moving grid must span the corridor domain")
    return sample_boundary_case(rng, grid, k, BoundaryCase.house_moving(), schedule, sampler, **kwargs)


def sample_corridor_meander_bm(
    rng: RngStream,
    grid: TimeGrid,
    k: Corridor,
    schedule: EpsilonSchedule | None = None,
    sampler: str = "smc",
    *,
    start: float | None = None,
    symmetric: bool = False,
    **kwargs: Any,
) -> LevelSeries:
    """Corridor meander from g⁻(t_start), or from an interior ``start``.

    Margins default to (η⁻(ε), 0); ``symmetric=True`` widens both walls.
    """

    return sample_boundary_case(
        rng, grid, k, BoundaryCase.meander(start), schedule, sampler, symmetric=symmetric, **kwargs
    )
