"""Radon–Nikodym derivatives of the drifted house-moving restricted to [0, t].

Three evaluators, all plug-in compositions of tables from
:class:`housemove.kernels.TableBuilder`:

``rn_cor3``
    density with respect to the shifted BES(3) process R + g⁻ on [0, t];
``rn_hm_mea``
    density with respect to the drifted corridor meander on [0, t];
``rn_chain``
    ``rn_hm_mea`` times the density of the corridor meander with respect to
    R + g⁻, which must agree with ``rn_cor3``.

Everything is accumulated in log space and exponentiated at the end.  Each
value carries a flag:

* ``ok``
* ``outside``: the path leaves the corridor on [0, t]; the value is 0
* ``singular``: w(t) = g⁻(t) where the BES(3) density has a zero
  denominator; the value is +inf
* ``off_table``: w(t) falls in the edge band not covered by the kernel
  tables; the value is NaN and callers exclude the path
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .corridor import Corridor, SamplePath, TimeGrid, curve_eval
from .drift import DriftModel, eval_G, log_cameron_martin_Z, n_functional
from .errors import DomainError
from .kernels import TableBuilder, WeightExpectation
from .reweighting import KernelTable

logger = logging.getLogger(__name__)

__all__ = [
    "FLAGS",
    "RNValue",
    "RNBatch",
    "RadonTables",
    "radon_tables",
    "chain_factor",
    "rn_cor3",
    "rn_hm_mea",
    "rn_chain",
    "rn_cor3_batch",
    "rn_hm_mea_batch",
    "rn_chain_batch",
]

FLAGS = ("ok", "outside", "singular", "off_table")
_HALF_LOG_PI_2 = 0.5 * math.log(math.pi / 2.0)


class RNValue(NamedTuple):
    value: float
    std_err: float
    flag: str


@dataclass(frozen=True, eq=False)
class RNBatch:
    """Row-wise evaluator output; ``std_err`` is NaN where the value is not finite."""

    values: np.ndarray
    std_err: np.ndarray
    flags: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, i: int) -> RNValue:
        return RNValue(float(self.values[i]), float(self.std_err[i]), str(self.flags[i]))

    @property
    def usable(self) -> np.ndarray:
        return self.flags != "off_table"

    def counts(self) -> dict[str, int]:
        return {f: int(np.count_nonzero(self.flags == f)) for f in FLAGS}


@dataclass(frozen=True, eq=False)
class RadonTables:
    """Everything the evaluators read at one time ``t``.

    ``upper_piece`` is y ↦ E[e^{−½N}] over corridor pieces y → b on [t, 1];
    ``house_moving`` the same expectation over the whole house-moving;
    ``meander`` / ``meander_kernel`` the drifted corridor-meander mean
    E[e^{G(W(t))}e^{−½N}] and the standard-meander mean E[Z̃⁻¹·1_{K⁻}] on
    [0, t]; the ``chain_*`` pair are independent re-estimates of the same two
    quantities used for the meander density in :func:`rn_chain`.
    """

    t: float
    C: float
    C_se: float
    q_down: KernelTable
    upper_piece: KernelTable
    house_moving: WeightExpectation
    meander: WeightExpectation
    meander_kernel: WeightExpectation
    chain_meander: WeightExpectation
    chain_meander_kernel: WeightExpectation

    def __post_init__(self) -> None:
        self.q_down.require_grid(self.upper_piece)
        if not 0.0 < self.t < 1.0:
            raise DomainError(f"t must lie in (0, 1), got {self.t}")


def radon_tables(builder: TableBuilder, t: float) -> RadonTables:
    """Collect (building when needed) the tables for time ``t`` from ``builder``."""

    c, c_se = tuple(builder.C())
    return RadonTables(
        t=t,
        C=c,
        C_se=c_se,
        q_down=builder.q_down(t),
        upper_piece=builder.upper_piece(t),
        house_moving=builder.house_moving_mean(),
        meander=builder.meander_mean(t, tag=0),
        meander_kernel=builder.meander_kernel_mean(t, tag=0),
        chain_meander=builder.meander_mean(t, tag=1),
        chain_meander_kernel=builder.meander_kernel_mean(t, tag=1),
    )


def chain_factor(tables: RadonTables) -> tuple[float, float]:
    """(A·M)/(A′·M′) and its relative standard error; rn_chain = rn_cor3 × this."""

    parts = (tables.meander, tables.meander_kernel, tables.chain_meander, tables.chain_meander_kernel)
    a, m, a2, m2 = (p.value for p in parts)
    rel = math.sqrt(sum((p.std_err / p.value) ** 2 for p in parts))
    return a * m / (a2 * m2), rel


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------


def _check_grid(tables: RadonTables, grid: TimeGrid) -> None:
    if abs(grid.t_start) > 1e-12 or abs(grid.t_end - tables.t) > 1e-12:
        raise DomainError(f"paths must live on [0, {tables.t:g}], got [{grid.t_start:g}, {grid.t_end:g}]")


def _classify(
    k: Corridor, grid: TimeGrid, rows: np.ndarray, table: KernelTable, *, singular_at_lower: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Flags per row and the mask of rows whose value must be computed."""

    lo = curve_eval(k.lower, grid.times)
    hi = curve_eval(k.upper, grid.times)
    inside = np.all((rows >= lo) & (rows <= hi), axis=1)
    end = rows[:, -1]
    flags = np.full(rows.shape[0], "ok", dtype=object)
    flags[~inside] = "outside"
    if singular_at_lower:
        flags[inside & (end <= lo[-1])] = "singular"
    off = inside & (flags == "ok") & ~table.contains(end)
    flags[off] = "off_table"
    return flags, flags == "ok"


def _finish(log_vals: np.ndarray, rel_se: np.ndarray, flags: np.ndarray) -> RNBatch:
    n = flags.size
    values = np.full(n, math.nan)
    se = np.full(n, math.nan)
    ok = flags == "ok"
    values[ok] = np.exp(log_vals[ok])
    se[ok] = values[ok] * rel_se[ok]
    values[flags == "outside"] = 0.0
    se[flags == "outside"] = 0.0
    values[flags == "singular"] = math.inf
    return RNBatch(values, se, flags.astype(str))


def _log_table(table: KernelTable, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = table(y)
    ses = table.std_err_at(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_v = np.log(vals)
        rel = np.where(vals > 0, ses / vals, 0.0)
    return log_v, rel


def _rows(values) -> np.ndarray:
    return np.atleast_2d(np.asarray(values, dtype=float))


def _log_cor3(
    d: DriftModel, k: Corridor, tables: RadonTables, grid: TimeGrid, rows: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """log rn_cor3 and its relative SE for rows already known to be ``ok``."""

    t = tables.t
    end = rows[:, -1]
    log_q, rel_q = _log_table(tables.q_down, end)
    log_b, rel_b = _log_table(tables.upper_piece, end)
    d_hm = tables.house_moving
    log_v = (
        _HALF_LOG_PI_2
        + log_q
        - math.log(tables.C)
        - 0.5 * math.log(1.0 - t)
        - np.log(end - curve_eval(k.lower, t))
        - log_cameron_martin_Z(k.lower, grid, rows)
        + log_b
        - math.log(d_hm.value)
        - 0.5 * n_functional(d, grid, rows)
    )
    rel = np.sqrt(rel_q**2 + rel_b**2 + (tables.C_se / tables.C) ** 2 + (d_hm.std_err / d_hm.value) ** 2)
    return log_v, rel


# ---------------------------------------------------------------------------
# Evaluators
# ---------------------------------------------------------------------------


def rn_cor3_batch(d: DriftModel, k: Corridor, tables: RadonTables, grid: TimeGrid, values) -> RNBatch:
    """√(π/2)·q↓(w(t)) / (C√(1−t)(w(t) − g⁻(t))·Z^{g⁻}(w)) · 1_K(w) · B(w(t))/D · e^{−½N(w)}."""

    _check_grid(tables, grid)
    rows = _rows(values)
    flags, ok = _classify(k, grid, rows, tables.q_down, singular_at_lower=True)
    log_v = np.zeros(rows.shape[0])
    rel = np.zeros(rows.shape[0])
    if np.any(ok):
        log_v[ok], rel[ok] = _log_cor3(d, k, tables, grid, rows[ok])
    return _finish(log_v, rel, flags)


def rn_hm_mea_batch(d: DriftModel, k: Corridor, tables: RadonTables, grid: TimeGrid, values) -> RNBatch:
    """e^{−G(w(t))}·A·B(w(t))/D · M·q↓(w(t)) / (C√t√(1−t)).

    A is the drifted corridor-meander mean and M the standard-meander kernel
    mean on [0, t]; the value depends on the path only through w(t) and its
    corridor indicator.
    """

    _check_grid(tables, grid)
    rows = _rows(values)
    flags, ok = _classify(k, grid, rows, tables.q_down, singular_at_lower=False)
    log_v = np.zeros(rows.shape[0])
    rel = np.zeros(rows.shape[0])
    if np.any(ok):
        t = tables.t
        end = rows[ok, -1]
        log_q, rel_q = _log_table(tables.q_down, end)
        log_b, rel_b = _log_table(tables.upper_piece, end)
        a, m, dd = tables.meander, tables.meander_kernel, tables.house_moving
        log_v[ok] = (
            -eval_G(d, end)
            + math.log(a.value)
            + log_b
            - math.log(dd.value)
            + math.log(m.value)
            + log_q
            - math.log(tables.C)
            - 0.5 * math.log(t)
            - 0.5 * math.log(1.0 - t)
        )
        fixed = sum((e.std_err / e.value) ** 2 for e in (a, m, dd)) + (tables.C_se / tables.C) ** 2
        rel[ok] = np.sqrt(rel_q**2 + rel_b**2 + fixed)
    return _finish(log_v, rel, flags)


def rn_chain_batch(d: DriftModel, k: Corridor, tables: RadonTables, grid: TimeGrid, values) -> RNBatch:
    """``rn_hm_mea`` times the corridor-meander density with respect to R + g⁻.

    The meander density is e^{G(w(t))}e^{−½N(w)}/A′ · Z^{g⁻}(w)⁻¹·1_K(w)/M′ ·
    √(πt/2)/(w(t) − g⁻(t)), with A′ and M′ estimated independently of the
    A and M inside ``rn_hm_mea``.
    """

    _check_grid(tables, grid)
    rows = _rows(values)
    flags, ok = _classify(k, grid, rows, tables.q_down, singular_at_lower=True)
    first = rn_hm_mea_batch(d, k, tables, grid, rows)
    log_v = np.zeros(rows.shape[0])
    rel = np.zeros(rows.shape[0])
    if np.any(ok):
        t = tables.t
        sub = rows[ok]
        end = sub[:, -1]
        a2, m2 = tables.chain_meander, tables.chain_meander_kernel
        log_density = (
            eval_G(d, end)
            - 0.5 * n_functional(d, grid, sub)
            - math.log(a2.value)
            - log_cameron_martin_Z(k.lower, grid, sub)
            - math.log(m2.value)
            + 0.5 * math.log(math.pi * t / 2.0)
            - np.log(end - curve_eval(k.lower, t))
        )
        fv, fs = first.values[ok], first.std_err[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            log_v[ok] = np.log(fv) + log_density
            first_rel = np.where(fv > 0, fs / fv, 0.0)
        rel[ok] = np.sqrt(first_rel**2 + (a2.std_err / a2.value) ** 2 + (m2.std_err / m2.value) ** 2)
    return _finish(log_v, rel, flags)


def _single(batch_fn, d: DriftModel, k: Corridor, tables: RadonTables, w: SamplePath) -> RNValue:
    return batch_fn(d, k, tables, w.grid, w.values)[0]


def rn_cor3(d: DriftModel, k: Corridor, t: float, w: SamplePath, tables: RadonTables) -> RNValue:
    _require_time(tables, t)
    return _single(rn_cor3_batch, d, k, tables, w)


def rn_hm_mea(d: DriftModel, k: Corridor, t: float, w: SamplePath, tables: RadonTables) -> RNValue:
    _require_time(tables, t)
    return _single(rn_hm_mea_batch, d, k, tables, w)


def rn_chain(d: DriftModel, k: Corridor, t: float, w: SamplePath, tables: RadonTables) -> RNValue:
    _require_time(tables, t)
    return _single(rn_chain_batch, d, k, tables, w)


def _require_time(tables: RadonTables, t: float) -> None:
    if abs(t - tables.t) > 1e-12:
        raise DomainError(f"tables were built for t={tables.t:g}, not t={t:g}")
