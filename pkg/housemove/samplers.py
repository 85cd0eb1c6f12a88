"""Exact samplers for the unconditioned building blocks.

Brownian motion, Brownian bridge, BES(3) bridge and process, Brownian meander
and Euler–Maruyama diffusion paths on arbitrary uniform grids.

Every path row draws from its own PCG64 stream keyed by ``(seed, path id,
*subkey)``, so an ensemble is bit-identical however its ids are split between
workers.  The single-path functions take an :class:`RngStream`; the ``*_rows``
variants take a seed plus an id array and return a ``(paths, nodes)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from .corridor import SamplePath, TimeGrid
from .drift import DriftModel, n_functional
from .errors import DomainError, NumericError

__all__ = [
    "RngStream",
    "row_generators",
    "bridge_from_normals",
    "bridge_rows",
    "bes3_bridge_rows",
    "bes3_rows",
    "meander_rows",
    "brownian_rows",
    "diffusion_rows",
    "sample_bridge",
    "sample_bes3_bridge",
    "sample_bes3",
    "sample_meander",
    "sample_brownian",
    "sample_diffusion",
    "sample_diffusion_bridge",
]


@dataclass(frozen=True)
class RngStream:
    """Independent random substream ``(seed, stream_id, *subkey)``."""

    seed: int
    stream_id: int
    subkey: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0 or any(k < 0 for k in self.subkey):
            raise DomainError("seed, stream id and subkeys must be non-negative integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id), *map(int, self.subkey)))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RngStream":
        return replace(self, subkey=self.subkey + tuple(int(k) for k in key))


def row_generators(seed: int, ids: Sequence[int], subkey: tuple[int, ...] = ()) -> Iterator[np.random.Generator]:
    for i in ids:
        yield RngStream(seed, int(i), subkey).generator()


def _rows(seed: int, ids: Sequence[int], subkey: tuple[int, ...], draw: Callable[[np.random.Generator], np.ndarray]) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise DomainError("at least one path id is required")
    return np.stack([draw(gen) for gen in row_generators(seed, ids, subkey)])


# ---------------------------------------------------------------------------
# Deterministic constructions from normals
# ---------------------------------------------------------------------------


def bridge_from_normals(z: np.ndarray, grid: TimeGrid, a, b) -> np.ndarray:
    """Forward conditional-Gaussian bridge recursion.

    ``z`` has shape ``(rows, n_steps)``; ``a`` and ``b`` are scalars or
    per-row arrays.  Both endpoints are set exactly.
    """

    n, dt = grid.n_steps, grid.dt
    rows = z.shape[0]
    a = np.broadcast_to(np.asarray(a, dtype=float), (rows,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (rows,))
    x = np.empty((rows, n + 1))
    x[:, 0] = a
    for i in range(n - 1):
        rem = n - i
        x[:, i + 1] = x[:, i] + (b - x[:, i]) / rem + math.sqrt(dt * (rem - 1) / rem) * z[:, i]
    x[:, n] = b
    return x


def _bes3_bridge_from_normals(z3: np.ndarray, grid: TimeGrid, c, d) -> np.ndarray:
    x1 = bridge_from_normals(z3[:, 0], grid, c, d)
    x2 = bridge_from_normals(z3[:, 1], grid, 0.0, 0.0)
    x3 = bridge_from_normals(z3[:, 2], grid, 0.0, 0.0)
    r = np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
    rows = r.shape[0]
    r[:, 0] = np.broadcast_to(np.asarray(c, dtype=float), (rows,))
    r[:, -1] = np.broadcast_to(np.asarray(d, dtype=float), (rows,))
    return r


def _check_nonnegative(c, d) -> None:
    if np.any(np.asarray(c) < 0) or np.any(np.asarray(d) < 0):
        raise DomainError("BES(3) bridge endpoints must be non-negative")


# ---------------------------------------------------------------------------
# Row samplers
# ---------------------------------------------------------------------------


def bridge_rows(seed, ids, grid: TimeGrid, a, b, subkey: tuple[int, ...] = ()) -> np.ndarray:
    z = _rows(seed, ids, subkey, lambda g: g.standard_normal(grid.n_steps))
    return bridge_from_normals(z, grid, a, b)


def bes3_bridge_rows(seed, ids, grid: TimeGrid, c, d, subkey: tuple[int, ...] = ()) -> np.ndarray:
    _check_nonnegative(c, d)
    z = _rows(seed, ids, subkey, lambda g: g.standard_normal((3, grid.n_steps)))
    return _bes3_bridge_from_normals(z, grid, c, d)


def bes3_rows(seed, ids, grid: TimeGrid, c: float = 0.0, subkey: tuple[int, ...] = ()) -> np.ndarray:
    """BES(3) process from ``c``: norm of a 3-D Brownian motion."""

    _check_nonnegative(c, 0.0)
    z = _rows(seed, ids, subkey, lambda g: g.standard_normal((3, grid.n_steps)))
    steps = math.sqrt(grid.dt) * z
    paths = np.zeros((z.shape[0], 3, grid.n_steps + 1))
    paths[:, 0, 0] = c
    paths[:, :, 1:] = paths[:, :, :1] + np.cumsum(steps, axis=-1)
    return np.sqrt(np.sum(paths * paths, axis=1))


def meander_rows(seed, ids, grid: TimeGrid, subkey: tuple[int, ...] = ()) -> np.ndarray:
    """Brownian meander from 0: BES(3) bridge to a Rayleigh(√T) endpoint."""

    scale = math.sqrt(grid.length)

    def draw(g: np.random.Generator) -> np.ndarray:
        out = np.empty((3, grid.n_steps + 1))
        out[0, 0] = g.rayleigh(scale)
        out[:, 1:] = g.standard_normal((3, grid.n_steps))
        return out

    raw = _rows(seed, ids, subkey, draw)
    ends = raw[:, 0, 0]
    return _bes3_bridge_from_normals(raw[:, :, 1:], grid, 0.0, ends)


def brownian_rows(seed, ids, grid: TimeGrid, a=0.0, subkey: tuple[int, ...] = ()) -> np.ndarray:
    z = _rows(seed, ids, subkey, lambda g: g.standard_normal(grid.n_steps))
    x = np.empty((z.shape[0], grid.n_steps + 1))
    x[:, 0] = a
    x[:, 1:] = np.asarray(a, dtype=float).reshape(-1, 1) + np.cumsum(math.sqrt(grid.dt) * z, axis=1)
    return x


def diffusion_rows(seed, ids, grid: TimeGrid, d: DriftModel, a=0.0, subkey: tuple[int, ...] = ()) -> np.ndarray:
    """Euler–Maruyama paths of dX = μ(X)dt + dW from ``a``."""

    z = _rows(seed, ids, subkey, lambda g: g.standard_normal(grid.n_steps))
    dt, sq = grid.dt, math.sqrt(grid.dt)
    x = np.empty((z.shape[0], grid.n_steps + 1))
    x[:, 0] = a
    ts = grid.times
    for i in range(grid.n_steps):
        x[:, i + 1] = x[:, i] + d.mu(x[:, i]) * dt + sq * z[:, i]
        if not np.all(np.isfinite(x[:, i + 1])):
            raise NumericError(f"Euler-Maruyama state became non-finite at step {i + 1} (t={ts[i + 1]:.6g})")
    return x


# ---------------------------------------------------------------------------
# Single-path API
# ---------------------------------------------------------------------------


def _one(rows: np.ndarray, grid: TimeGrid) -> SamplePath:
    return SamplePath(grid, rows[0])


def sample_bridge(rng: RngStream, grid: TimeGrid, a: float, b: float) -> SamplePath:
    return _one(bridge_rows(rng.seed, [rng.stream_id], grid, a, b, rng.subkey), grid)


def sample_bes3_bridge(rng: RngStream, grid: TimeGrid, c: float, d: float) -> SamplePath:
    return _one(bes3_bridge_rows(rng.seed, [rng.stream_id], grid, c, d, rng.subkey), grid)


def sample_bes3(rng: RngStream, grid: TimeGrid, c: float = 0.0) -> SamplePath:
    return _one(bes3_rows(rng.seed, [rng.stream_id], grid, c, rng.subkey), grid)


def sample_meander(rng: RngStream, grid: TimeGrid) -> SamplePath:
    return _one(meander_rows(rng.seed, [rng.stream_id], grid, rng.subkey), grid)


def sample_brownian(rng: RngStream, grid: TimeGrid, a: float = 0.0) -> SamplePath:
    return _one(brownian_rows(rng.seed, [rng.stream_id], grid, a, rng.subkey), grid)


def sample_diffusion(rng: RngStream, grid: TimeGrid, d: DriftModel, a: float = 0.0) -> SamplePath:
    return _one(diffusion_rows(rng.seed, [rng.stream_id], grid, d, a, rng.subkey), grid)


def sample_diffusion_bridge(
    rng: RngStream,
    grid: TimeGrid,
    d: DriftModel,
    a: float,
    b_target: float,
    tol: float = 0.0,
) -> tuple[SamplePath, float]:
    """Brownian bridge ``a → b_target`` with its log-weight −½N.

    Self-normalised averages over such pairs estimate X-bridge expectations.
    ``tol`` bounds the admissible endpoint error; the bridge is pinned
    exactly, so any non-negative value is met.
    """

    if tol < 0:
        raise DomainError(f"tol must be non-negative, got {tol}")
    path = sample_bridge(rng, grid, a, b_target)
    return path, float(-0.5 * n_functional(d, grid, path.values))
