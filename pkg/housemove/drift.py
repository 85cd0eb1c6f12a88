"""Drift models and the scalar functionals used for Girsanov reweighting.

G(y) = ∫₀^y μ,  N(w) = ∫ (μ′ + μ²)(w(u)) du  and the Cameron–Martin factors
Z, Z̃ of a deterministic curve shift.  Exponential quantities are handled in
log space; only the thin public ``cameron_martin_*`` wrappers exponentiate.

The Lamperti map reduces dU = ν(U)dt + σ(U)dW to unit diffusion
dX = μ(X)dt + dW with X = L(U), L(y) = ∫₀^y du/σ(u).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.integrate import quad, trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

from .corridor import Corridor, Curve, SamplePath, TimeGrid, curve_eval
from .errors import DomainError, ModelError, NumericError

logger = logging.getLogger(__name__)

__all__ = [
    "DriftModel",
    "SdeModel",
    "ScaleMap",
    "eval_G",
    "eval_N",
    "n_functional",
    "c_mu_bound",
    "log_cameron_martin_Z",
    "log_cameron_martin_Z_tilde",
    "cameron_martin_Z",
    "cameron_martin_Z_tilde",
    "lamperti_transform",
    "lamperti_curve",
]

DRIFT_KINDS = ("zero", "constant", "linear", "polynomial", "tabulated", "lamperti")

QUAD_EPSABS = 1e-10
C_MU_SCAN = 4096
DEFAULT_DELTA = 0.5


# ---------------------------------------------------------------------------
# Drift models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DriftModel:
    """Drift μ of dX = μ(X)dt + dW with its derivative μ′."""

    kind: str
    params: tuple[float, ...] = ()
    table: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    scale_map: "ScaleMap | None" = field(default=None, repr=False)
    _spline: CubicSpline | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in DRIFT_KINDS:
            raise DomainError(f"unknown drift kind {self.kind!r}")
        if self.kind == "tabulated":
            x, mu, dmu = self.table
            if not (x.shape == mu.shape == dmu.shape) or x.size < 3 or np.any(np.diff(x) <= 0):
                raise DomainError("tabulated drift needs matching, increasing tables with >= 3 nodes")
            object.__setattr__(self, "_spline", CubicSpline(x, mu))

    @classmethod
    def zero(cls) -> "DriftModel":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "DriftModel":
        return cls("constant", (float(c),))

    @classmethod
    def linear(cls, a: float, b: float) -> "DriftModel":
        """μ(x) = a + b x."""
        return cls("linear", (float(a), float(b)))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "DriftModel":
        """Ascending coefficients; collapses to the simplest matching kind."""
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if c.size == 0:
            return cls.zero()
        if c.size == 1:
            return cls.constant(c[0])
        if c.size == 2:
            return cls.linear(c[0], c[1])
        return cls("polynomial", tuple(float(v) for v in c))

    @classmethod
    def tabulated(cls, x: Sequence[float], mu: Sequence[float], dmu: Sequence[float]) -> "DriftModel":
        arrays = tuple(np.array(a, dtype=float) for a in (x, mu, dmu))
        return cls("tabulated", table=arrays)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def is_constant(self) -> bool:
        return self.kind in ("zero", "constant")

    @property
    def coefficients(self) -> np.ndarray | None:
        """Ascending polynomial coefficients for analytic kinds."""
        if self.kind == "zero":
            return np.zeros(1)
        if self.kind in ("constant", "linear", "polynomial"):
            return np.asarray(self.params)
        return None

    def _check_table_range(self, x: np.ndarray) -> None:
        lo, hi = self.table[0][0], self.table[0][-1]
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError(f"drift evaluated outside its table [{lo}, {hi}]")

    def mu(self, x):
        arr = np.asarray(x, dtype=float)
        coeffs = self.coefficients
        if coeffs is not None:
            out = P.polyval(arr, coeffs) if self.kind != "zero" else np.zeros_like(arr)
        elif self.kind == "tabulated":
            self._check_table_range(arr)
            out = self._spline(arr)
        else:
            out = self.scale_map.transformed_drift(arr)
        return float(out) if arr.ndim == 0 else out

    def dmu(self, x):
        arr = np.asarray(x, dtype=float)
        coeffs = self.coefficients
        if coeffs is not None:
            out = P.polyval(arr, P.polyder(coeffs)) if coeffs.size > 1 else np.zeros_like(arr)
        elif self.kind == "tabulated":
            self._check_table_range(arr)
            out = np.interp(arr, self.table[0], self.table[2])
        else:
            out = self.scale_map.transformed_drift_derivative(arr)
        return float(out) if arr.ndim == 0 else out

    def describe(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind in ("constant", "linear", "polynomial"):
            return " ".join([self.kind, *(f"{v:.10g}" for v in self.params)])
        if self.kind == "tabulated":
            return f"tabulated ({self.table[0].size} nodes)"
        return f"lamperti({self.scale_map.model.describe()})"


# ---------------------------------------------------------------------------
# G and N
# ---------------------------------------------------------------------------


def _quad_G(d: DriftModel, y: float) -> float:
    result = quad(d.mu, 0.0, y, epsabs=QUAD_EPSABS, limit=200, full_output=1)
    if len(result) > 3:
        raise NumericError(f"quadrature for G({y}) did not converge: {result[3]}")
    return float(result[0])


def eval_G(d: DriftModel, y):
    """G(y) = ∫₀^y μ(z) dz, analytic for polynomial kinds."""

    arr = np.asarray(y, dtype=float)
    coeffs = d.coefficients
    if coeffs is not None:
        out = P.polyval(arr, P.polyint(coeffs)) if d.kind != "zero" else np.zeros_like(arr)
    else:
        out = np.vectorize(lambda v: _quad_G(d, v), otypes=[float])(arr)
    return float(out) if arr.ndim == 0 else out


def n_functional(d: DriftModel, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """Trapezoidal N over the last axis of ``values`` (shape ``(..., nodes)``)."""

    vals = np.asarray(values, dtype=float)
    if d.is_zero:
        return np.zeros(vals.shape[:-1])
    integrand = d.dmu(vals) + d.mu(vals) ** 2
    return trapezoid(integrand, dx=grid.dt, axis=-1)


def eval_N(d: DriftModel, w: SamplePath) -> float:
    """N_{[t1,t2]}(w) = ∫ {μ′(w) + μ²(w)} du on the path grid."""

    return float(n_functional(d, w.grid, w.values))


def c_mu_bound(d: DriftModel, k: Corridor, delta: float = DEFAULT_DELTA) -> float:
    """0 ∨ sup of −(μ′ + μ²) over [min g⁻ − δ, max g⁺ + δ]."""

    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if d.is_zero:
        return 0.0
    ts = np.linspace(k.t_start, k.t_end, C_MU_SCAN)
    lo = float(np.min(curve_eval(k.lower, ts))) - delta
    hi = float(np.max(curve_eval(k.upper, ts))) + delta

    def objective(y):
        return -(d.dmu(y) + d.mu(y) ** 2)

    ys = np.linspace(lo, hi, C_MU_SCAN)
    vals = objective(ys)
    i = int(np.argmax(vals))
    best = float(vals[i])
    a, b = ys[max(i - 1, 0)], ys[min(i + 1, C_MU_SCAN - 1)]
    refined = minimize_scalar(lambda y: -objective(y), bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    if refined.success and np.isfinite(refined.fun):
        best = max(best, float(-refined.fun))
    return max(0.0, best)


# ---------------------------------------------------------------------------
# Cameron–Martin factors
# ---------------------------------------------------------------------------


def _linear_part(g: Curve, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """g′(t2)x(t2) − g′(t1)x(t1) − ∫ x g″ (trapezoid)."""

    ts = grid.times
    d1_start = curve_eval(g, grid.t_start, 1)
    d1_end = curve_eval(g, grid.t_end, 1)
    d2 = curve_eval(g, ts, 2)
    vals = np.asarray(values, dtype=float)
    return d1_end * vals[..., -1] - d1_start * vals[..., 0] - trapezoid(vals * d2, dx=grid.dt, axis=-1)


def _energy(g: Curve, grid: TimeGrid) -> float:
    return float(trapezoid(curve_eval(g, grid.times, 1) ** 2, dx=grid.dt))


def log_cameron_martin_Z(g: Curve, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """log Z^g(x) row-wise."""

    return _linear_part(g, grid, values) - 0.5 * _energy(g, grid)


def log_cameron_martin_Z_tilde(g: Curve, grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    """log Z̃^g(x) = log Z^g(x + g), exact at the level of the discretisation."""

    g_vals = curve_eval(g, grid.times)
    return _linear_part(g, grid, values) + _linear_part(g, grid, g_vals) - 0.5 * _energy(g, grid)


def cameron_martin_Z(g: Curve, w: SamplePath) -> float:
    return math.exp(float(log_cameron_martin_Z(g, w.grid, w.values)))


def cameron_martin_Z_tilde(g: Curve, w: SamplePath) -> float:
    return math.exp(float(log_cameron_martin_Z_tilde(g, w.grid, w.values)))


# ---------------------------------------------------------------------------
# Lamperti transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SdeModel:
    """dU = ν(U)dt + σ(U)dW with polynomial ν, σ on a declared range."""

    nu: tuple[float, ...]
    sigma: tuple[float, ...]
    u_range: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self) -> None:
        lo, hi = self.u_range
        if not lo < hi:
            raise ModelError(f"SDE range [{lo}, {hi}] is empty")
        if not self.sigma:
            raise ModelError("sigma needs at least one coefficient")
        us = np.linspace(min(lo, 0.0), max(hi, 0.0), 4097)
        s = self.sigma_poly(us)
        if np.min(s) <= 0.0:
            bad = float(us[int(np.argmin(s))])
            raise ModelError(f"sigma({bad:.6g}) = {float(np.min(s)):.6g} <= 0 on the declared range")

    @property
    def nu_poly(self) -> Polynomial:
        return Polynomial(self.nu or (0.0,))

    @property
    def sigma_poly(self) -> Polynomial:
        return Polynomial(self.sigma)

    @property
    def sigma_is_constant(self) -> bool:
        return np.trim_zeros(np.asarray(self.sigma, dtype=float), "b").size <= 1

    def describe(self) -> str:
        nu = " ".join(f"{c:g}" for c in self.nu) or "0"
        sig = " ".join(f"{c:g}" for c in self.sigma)
        return f"nu=[{nu}] sigma=[{sig}]"


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_N_ANCHORS = 257


@dataclass(frozen=True, eq=False)
class ScaleMap:
    """L(u) = ∫₀^u dv/σ(v) and its inverse."""

    model: SdeModel
    kind: str  # identity | linear | numeric
    _anchors_u: np.ndarray | None = field(default=None, repr=False)
    _anchors_L: np.ndarray | None = field(default=None, repr=False)
    _inverse_guess: PchipInterpolator | None = field(default=None, repr=False)

    @classmethod
    def build(cls, model: SdeModel) -> "ScaleMap":
        sig = np.trim_zeros(np.asarray(model.sigma, dtype=float), "b")
        if sig.size == 1 and sig[0] == 1.0:
            return cls(model, "identity")
        if sig.size <= 1:
            return cls(model, "linear")
        lo, hi = model.u_range
        us = np.linspace(min(lo, 0.0), max(hi, 0.0), _N_ANCHORS)
        recip = lambda v: 1.0 / model.sigma_poly(v)  # noqa: E731
        Ls = np.empty_like(us)
        for j, u in enumerate(us):
            val, _err, *rest = quad(recip, 0.0, float(u), epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1)
            if rest and len(rest) > 1:
                raise NumericError(f"quadrature for L({u}) did not converge")
            Ls[j] = val
        return cls(model, "numeric", us, Ls, PchipInterpolator(Ls, us))

    @property
    def sigma0(self) -> float:
        return float(self.model.sigma[0])

    @property
    def u_bounds(self) -> tuple[float, float]:
        lo, hi = self.model.u_range
        return min(lo, 0.0), max(hi, 0.0)

    @property
    def y_bounds(self) -> tuple[float, float]:
        lo, hi = self.u_bounds
        return float(self.L(lo)), float(self.L(hi))

    def _check_u(self, u: np.ndarray) -> None:
        lo, hi = self.u_bounds
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            raise DomainError(f"state outside the SDE range [{lo}, {hi}]")

    def L(self, u):
        arr = np.asarray(u, dtype=float)
        self._check_u(arr)
        if self.kind == "identity":
            out = arr.copy()
        elif self.kind == "linear":
            out = arr / self.sigma0
        else:
            j = np.clip(np.searchsorted(self._anchors_u, arr) - 1, 0, _N_ANCHORS - 2)
            a = self._anchors_u[j]
            half = 0.5 * (arr - a)
            nodes = a[..., None] + half[..., None] * (_GL_NODES + 1.0)
            out = self._anchors_L[j] + half * np.sum(_GL_WEIGHTS / self.model.sigma_poly(nodes), axis=-1)
        return float(out) if arr.ndim == 0 else out

    def L_inv(self, y):
        arr = np.asarray(y, dtype=float)
        if self.kind == "identity":
            out = arr.copy()
        elif self.kind == "linear":
            out = arr * self.sigma0
        else:
            ylo, yhi = self._anchors_L[0], self._anchors_L[-1]
            if np.any(arr < ylo - 1e-12) or np.any(arr > yhi + 1e-12):
                raise DomainError(f"value outside the transformed range [{ylo:.6g}, {yhi:.6g}]")
            lo, hi = self.u_bounds
            u = np.clip(self._inverse_guess(arr), lo, hi)
            for _ in range(4):
                # L′ = 1/σ, so a Newton step is u -= (L(u) − y)·σ(u)
                u = np.clip(u - (self.L(u) - arr) * self.model.sigma_poly(u), lo, hi)
            out = u
        return float(out) if arr.ndim == 0 else out

    # μ = (ν/σ − ½σ′)∘L⁻¹ and μ′ = f′(L⁻¹)·σ(L⁻¹)

    def _f_parts(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nu, sig = self.model.nu_poly, self.model.sigma_poly
        s, ds, d2s = sig(u), sig.deriv(1)(u), sig.deriv(2)(u)
        n, dn = nu(u), nu.deriv(1)(u)
        f = n / s - 0.5 * ds
        df = (dn * s - n * ds) / (s * s) - 0.5 * d2s
        return f, df

    def transformed_drift(self, y: np.ndarray) -> np.ndarray:
        f, _ = self._f_parts(np.asarray(self.L_inv(y)))
        return f

    def transformed_drift_derivative(self, y: np.ndarray) -> np.ndarray:
        u = np.asarray(self.L_inv(y))
        _, df = self._f_parts(u)
        return df * self.model.sigma_poly(u)


def lamperti_transform(m: SdeModel) -> tuple[DriftModel, ScaleMap]:
    """Unit-diffusion drift μ and the scale map L for an SDE model."""

    scale = ScaleMap.build(m)
    if scale.kind == "identity":
        drift = DriftModel.polynomial(m.nu or (0.0,))
    elif scale.kind == "linear":
        b = scale.sigma0
        coeffs = [c * b**k / b for k, c in enumerate(m.nu or (0.0,))]
        drift = DriftModel.polynomial(coeffs)
    else:
        drift = DriftModel("lamperti", scale_map=scale)
    logger.info("lamperti transform of %s -> %s", m.describe(), drift.describe())
    return drift, scale


def lamperti_curve(scale: ScaleMap, g: Curve, n_nodes: int = 1025) -> Curve:
    """L∘g as a tabulated curve with exact first and second derivatives."""

    if scale.kind == "identity":
        return g
    ts = np.linspace(g.domain[0], g.domain[1], n_nodes)
    u, du, d2u = (curve_eval(g, ts, k) for k in (0, 1, 2))
    sig = scale.model.sigma_poly
    s, ds = sig(u), sig.deriv(1)(u)
    return Curve.tabulated(
        ts,
        scale.L(u),
        du / s,
        d2u / s - du * du * ds / (s * s),
    )
