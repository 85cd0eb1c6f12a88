"""Corridor geometry, time grids, sample paths and the path algebra.

A corridor is the region between a lower curve g⁻ and an upper curve g⁺ on a
closed time interval.  Paths live on uniform time grids; the algebra offered
here (splice, reversal, shift by a curve) is what the samplers and the
decomposition checks compose paths with.

Curves carry analytic derivatives for the built-in families.  Tabulated
curves interpolate g with a cubic spline and g′, g″ linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from .errors import CompositionError, DomainError, PreconditionError

__all__ = [
    "Curve",
    "Corridor",
    "TimeGrid",
    "SamplePath",
    "curve_eval",
    "corridor_contains",
    "contains_mask",
    "splice",
    "reverse_path",
    "shift_path",
]

# Dense scan used for the positive-width invariant.
_WIDTH_SCAN = 2049
# Slack on domain boundaries (grid arithmetic produces 1e-16 overshoots).
_DOMAIN_SLACK = 1e-12

CURVE_KINDS = (
    "constant",
    "linear",
    "polynomial",
    "cosine",
    "tabulated",
    "combination",
    "reversed",
)


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Curve:
    """A C² time function with evaluable g, g′ and g″.

    Use the class-method constructors rather than the raw fields.  Curves
    are immutable and can be shared between worker processes.
    """

    kind: str
    params: tuple[float, ...] = ()
    domain: tuple[float, float] = (0.0, 1.0)
    # tabulated: (grid, g, g′, g″) arrays
    table: tuple[np.ndarray, ...] | None = field(default=None, repr=False)
    # combination: ((coef, curve), ...); reversed: ((1.0, curve),)
    parts: tuple[tuple[float, "Curve"], ...] = field(default=(), repr=False)
    tolerance: float = 1e-3
    _spline: CubicSpline | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in CURVE_KINDS:
            raise DomainError(f"unknown curve kind {self.kind!r}")
        lo, hi = self.domain
        if not lo < hi:
            raise DomainError(f"curve domain [{lo}, {hi}] is empty")
        if self.kind == "tabulated":
            self._init_table()

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, c: float) -> "Curve":
        return cls("constant", (float(c),))

    @classmethod
    def linear(cls, a: float, b: float) -> "Curve":
        """g(t) = a + b t."""
        return cls("linear", (float(a), float(b)))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "Curve":
        """Coefficients in ascending order: g(t) = c0 + c1 t + ..."""
        if len(coeffs) == 0:
            raise DomainError("polynomial curve needs at least one coefficient")
        return cls("polynomial", tuple(float(c) for c in coeffs))

    @classmethod
    def cosine(cls, amplitude: float, frequency: float, phase: float = 0.0, offset: float = 0.0) -> "Curve":
        """g(t) = offset + amplitude · cos(2π frequency t + phase)."""
        return cls("cosine", (float(amplitude), float(frequency), float(phase), float(offset)))

    @classmethod
    def tabulated(
        cls,
        grid: Sequence[float],
        values: Sequence[float],
        d1: Sequence[float],
        d2: Sequence[float],
        *,
        tolerance: float = 1e-3,
    ) -> "Curve":
        arrays = tuple(np.array(a, dtype=float) for a in (grid, values, d1, d2))
        for a in arrays:
            a.setflags(write=False)
        grid_arr = arrays[0]
        if grid_arr.ndim != 1 or grid_arr.size < 3:
            raise DomainError("tabulated curve needs a 1-D grid with at least 3 nodes")
        return cls(
            "tabulated",
            domain=(float(grid_arr[0]), float(grid_arr[-1])),
            table=arrays,
            tolerance=float(tolerance),
        )

    # -- algebra ---------------------------------------------------------------

    def _combine(self, terms: Iterable[tuple[float, "Curve"]], const: float = 0.0) -> "Curve":
        terms = tuple(terms)
        lo = max(c.domain[0] for _, c in terms)
        hi = min(c.domain[1] for _, c in terms)
        return Curve("combination", (float(const),), domain=(lo, hi), parts=terms)

    def __add__(self, other: "Curve | float") -> "Curve":
        if isinstance(other, Curve):
            return self._combine(((1.0, self), (1.0, other)))
        return self._combine(((1.0, self),), float(other))

    __radd__ = __add__

    def __neg__(self) -> "Curve":
        return self._combine(((-1.0, self),))

    def __sub__(self, other: "Curve | float") -> "Curve":
        if isinstance(other, Curve):
            return self._combine(((1.0, self), (-1.0, other)))
        return self._combine(((1.0, self),), -float(other))

    def __rsub__(self, other: float) -> "Curve":
        return self._combine(((-1.0, self),), float(other))

    def scaled(self, c: float) -> "Curve":
        return self._combine(((float(c), self),))

    def reversed(self, t1: float, t2: float) -> "Curve":
        """Time reversal on [t1, t2]: ←g(u) = g(t1 + t2 − u)."""
        if t1 < self.domain[0] - _DOMAIN_SLACK or t2 > self.domain[1] + _DOMAIN_SLACK or not t1 < t2:
            raise DomainError(f"cannot reverse on [{t1}, {t2}] outside domain {self.domain}")
        return Curve("reversed", (float(t1), float(t2)), domain=(float(t1), float(t2)), parts=((1.0, self),))

    # -- evaluation ----------------------------------------------------------

    def __call__(self, t, order: int = 0):
        return curve_eval(self, t, order)

    def _init_table(self) -> None:
        grid, g, d1, d2 = self.table
        if not (g.shape == d1.shape == d2.shape == grid.shape):
            raise DomainError("tabulated curve tables must share one grid")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("tabulated curve grid must be strictly increasing")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
            raise DomainError("tabulated curve values must be finite")
        fd1 = np.gradient(g, grid)[1:-1]
        fd2 = np.gradient(d1, grid)[1:-1]
        err = max(np.max(np.abs(fd1 - d1[1:-1])), np.max(np.abs(fd2 - d2[1:-1])))
        if err > self.tolerance:
            raise DomainError(
                f"tabulated derivatives disagree with finite differences by {err:.3g} "
                f"(tolerance {self.tolerance:.3g})"
            )
        object.__setattr__(self, "_spline", CubicSpline(grid, g))

    def _raw(self, t: np.ndarray, order: int) -> np.ndarray:
        p = self.params
        if self.kind == "constant":
            return np.full_like(t, p[0] if order == 0 else 0.0)
        if self.kind == "linear":
            if order == 0:
                return p[0] + p[1] * t
            return np.full_like(t, p[1] if order == 1 else 0.0)
        if self.kind == "polynomial":
            coeffs = np.asarray(p)
            for _ in range(order):
                coeffs = P.polyder(coeffs) if coeffs.size > 1 else np.zeros(1)
            return P.polyval(t, coeffs)
        if self.kind == "cosine":
            amp, freq, phase, offset = p
            w = 2.0 * math.pi * freq
            arg = w * t + phase
            if order == 0:
                return offset + amp * np.cos(arg)
            if order == 1:
                return -amp * w * np.sin(arg)
            return -amp * w * w * np.cos(arg)
        if self.kind == "tabulated":
            grid, g, d1, d2 = self.table
            if order == 0:
                return self._spline(t)
            return np.interp(t, grid, d1 if order == 1 else d2)
        if self.kind == "combination":
            out = np.full_like(t, p[0] if order == 0 else 0.0)
            for coef, curve in self.parts:
                out = out + coef * curve._raw(t, order)
            return out
        # reversed
        t1, t2 = p
        inner = self.parts[0][1]
        return (-1.0) ** order * inner._raw(t1 + t2 - t, order)

    def describe(self) -> str:
        """Short human-readable form, mirroring the config syntax."""

        if self.kind in ("constant", "linear", "polynomial", "cosine"):
            return " ".join([self.kind, *(f"{v:g}" for v in self.params)])
        if self.kind == "tabulated":
            return f"tabulated ({self.table[0].size} nodes on [{self.domain[0]:g}, {self.domain[1]:g}])"
        if self.kind == "reversed":
            return f"reversed[{self.params[0]:g},{self.params[1]:g}]({self.parts[0][1].describe()})"
        terms = " + ".join(f"{c:g}*({cv.describe()})" for c, cv in self.parts)
        return f"{terms} + {self.params[0]:g}"


def curve_eval(c: Curve, t, order: int = 0):
    """Return g(t), g′(t) or g″(t); scalars in, scalars out."""

    if order not in (0, 1, 2):
        raise DomainError(f"derivative order must be 0, 1 or 2, got {order}")
    arr = np.asarray(t, dtype=float)
    lo, hi = c.domain
    if np.any(arr < lo - _DOMAIN_SLACK) or np.any(arr > hi + _DOMAIN_SLACK) or np.any(np.isnan(arr)):
        raise DomainError(f"time outside curve domain [{lo}, {hi}]")
    out = c._raw(np.clip(arr, lo, hi), order)
    if arr.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Corridor
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Corridor:
    """Region between ``lower`` (g⁻) and ``upper`` (g⁺) on ``domain``."""

    lower: Curve
    upper: Curve
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        t1, t2 = self.domain
        if not t1 < t2:
            raise DomainError(f"corridor domain [{t1}, {t2}] is empty")
        ts = np.linspace(t1, t2, _WIDTH_SCAN)
        width = curve_eval(self.upper, ts) - curve_eval(self.lower, ts)
        if not np.all(np.isfinite(width)):
            raise DomainError("corridor curves must be finite on the domain")
        if width.min() <= 0.0:
            raise DomainError(
                f"corridor min width {width.min():.6g} <= 0: upper curve must stay strictly above lower"
            )

    @property
    def t_start(self) -> float:
        return self.domain[0]

    @property
    def t_end(self) -> float:
        return self.domain[1]

    @property
    def b(self) -> float:
        """End value g⁺(t_end) of the house-moving construction."""
        return curve_eval(self.upper, self.t_end)

    @property
    def min_width(self) -> float:
        ts = np.linspace(self.t_start, self.t_end, _WIDTH_SCAN)
        return float(np.min(self.width(ts)))

    @property
    def is_house_moving(self) -> bool:
        return abs(curve_eval(self.lower, self.t_start)) <= 1e-12

    @property
    def is_flat(self) -> bool:
        ts = np.linspace(self.t_start, self.t_end, 257)
        return bool(
            np.all(np.abs(curve_eval(self.lower, ts, 1)) <= 1e-12)
            and np.all(np.abs(curve_eval(self.upper, ts, 1)) <= 1e-12)
        )

    def width(self, t):
        return curve_eval(self.upper, t) - curve_eval(self.lower, t)

    def bounds(self, times, margins: tuple[float, float] = (0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
        """Widened walls ``(g⁻ − η⁻, g⁺ + η⁺)`` at ``times``."""
        eta_minus, eta_plus = margins
        return curve_eval(self.lower, times) - eta_minus, curve_eval(self.upper, times) + eta_plus

    def restricted(self, t1: float, t2: float) -> "Corridor":
        return Corridor(self.lower, self.upper, (float(t1), float(t2)))

    def reversed(self, t1: float | None = None, t2: float | None = None) -> "Corridor":
        """Corridor (←g⁻, ←g⁺) reversed on [t1, t2] (defaults to the domain)."""
        t1 = self.t_start if t1 is None else t1
        t2 = self.t_end if t2 is None else t2
        return Corridor(self.lower.reversed(t1, t2), self.upper.reversed(t1, t2), (t1, t2))

    def mirrored(self, t1: float, t2: float) -> "Corridor":
        """Corridor (c − ←g⁺, c − ←g⁻) on [t1, t2] with c = g⁺(t2).

        This is the geometry seen by ``c − w(t1 + t2 − u)``; its lower curve
        starts at 0.
        """
        c = curve_eval(self.upper, t2)
        return Corridor(c - self.upper.reversed(t1, t2), c - self.lower.reversed(t1, t2), (t1, t2))


# ---------------------------------------------------------------------------
# Time grids and paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.t_start < self.t_end:
            raise DomainError(f"grid needs t_start < t_end, got [{self.t_start}, {self.t_end}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def length(self) -> float:
        return self.t_end - self.t_start

    @property
    def times(self) -> np.ndarray:
        ts = self.t_start + self.dt * np.arange(self.n_steps + 1)
        ts[-1] = self.t_end
        return ts

    def index_of(self, t: float, *, snap: bool = False) -> int:
        """Node index of ``t``; off-node times raise unless ``snap``."""
        if t < self.t_start - _DOMAIN_SLACK or t > self.t_end + _DOMAIN_SLACK:
            raise DomainError(f"time {t} outside grid [{self.t_start}, {self.t_end}]")
        pos = (t - self.t_start) / self.dt
        i = int(round(pos))
        if not snap and abs(pos - i) > 1e-7:
            raise PreconditionError(
                f"time {t} is not a grid node (dt={self.dt:.6g}); refine n_steps"
            )
        return min(max(i, 0), self.n_steps)

    def snap(self, t: float) -> float:
        return float(self.times[self.index_of(t, snap=True)])

    def sub_grid(self, t1: float, t2: float) -> "TimeGrid":
        i1, i2 = self.index_of(t1), self.index_of(t2)
        if i2 <= i1:
            raise DomainError(f"sub-grid [{t1}, {t2}] is empty")
        ts = self.times
        return TimeGrid(float(ts[i1]), float(ts[i2]), i2 - i1)


@dataclass(frozen=True, eq=False)
class SamplePath:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_steps + 1,):
            raise DomainError(
                f"path has {vals.size} values, grid needs {self.grid.n_steps + 1}"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("path values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def value_at(self, t: float) -> float:
        return float(self.values[self.grid.index_of(t)])


def contains_mask(
    k: Corridor,
    grid: TimeGrid,
    values: np.ndarray,
    margin_lower: float = 0.0,
    margin_upper: float = 0.0,
) -> np.ndarray:
    """Row-wise node containment for a ``(paths, nodes)`` array."""

    lo, hi = k.bounds(grid.times, (margin_lower, margin_upper))
    vals = np.atleast_2d(values)
    return np.all((vals >= lo) & (vals <= hi), axis=-1)


def corridor_contains(
    k: Corridor, w: SamplePath, margin_lower: float = 0.0, margin_upper: float = 0.0
) -> bool:
    """Closed node-wise test g⁻ − η⁻ ≤ w ≤ g⁺ + η⁺."""

    if margin_lower < 0 or margin_upper < 0:
        raise DomainError("margins must be non-negative")
    return bool(contains_mask(k, w.grid, w.values, margin_lower, margin_upper)[0])


# ---------------------------------------------------------------------------
# Path algebra
# ---------------------------------------------------------------------------


def _check_adjacent(left: TimeGrid, right: TimeGrid) -> None:
    if abs(left.t_end - right.t_start) > 1e-9:
        raise CompositionError(
            f"cannot splice [{left.t_start}, {left.t_end}] with [{right.t_start}, {right.t_end}]: "
            "intervals must share a boundary time"
        )
    if abs(left.dt - right.dt) > 1e-12 * max(1.0, left.dt):
        raise CompositionError(f"cannot splice grids with steps {left.dt} and {right.dt}")


def splice(parts: Sequence[SamplePath]) -> SamplePath:
    """Concatenate adjacent paths; the later part wins at each junction."""

    if not parts:
        raise CompositionError("nothing to splice")
    if len(parts) == 1:
        return parts[0]
    for left, right in zip(parts, parts[1:]):
        _check_adjacent(left.grid, right.grid)
    values = np.concatenate([p.values[:-1] for p in parts[:-1]] + [parts[-1].values])
    grid = TimeGrid(parts[0].grid.t_start, parts[-1].grid.t_end, sum(p.grid.n_steps for p in parts))
    return SamplePath(grid, values)


def splice_values(grids: Sequence[TimeGrid], blocks: Sequence[np.ndarray]) -> tuple[TimeGrid, np.ndarray]:
    """Batched :func:`splice` for ``(paths, nodes)`` arrays sharing row order."""

    for left, right in zip(grids, grids[1:]):
        _check_adjacent(left, right)
    values = np.concatenate([b[:, :-1] for b in blocks[:-1]] + [blocks[-1]], axis=1)
    grid = TimeGrid(grids[0].t_start, grids[-1].t_end, sum(g.n_steps for g in grids))
    return grid, values


def reverse_path(w: SamplePath) -> SamplePath:
    """output(t) = input(t1 + t2 − t) on the same grid."""

    return SamplePath(w.grid, w.values[::-1])


def shift_path(w: SamplePath, g: Curve) -> SamplePath:
    """Pointwise w + g."""

    return SamplePath(w.grid, w.values + curve_eval(g, w.grid.times))
