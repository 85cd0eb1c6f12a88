import math

import numpy as np
import pytest

from housemove.corridor import TimeGrid
from housemove.drift import DriftModel
from housemove.errors import DomainError, NumericError
from housemove.samplers import (
    RngStream,
    bes3_bridge_rows,
    bes3_rows,
    bridge_rows,
    brownian_rows,
    diffusion_rows,
    meander_rows,
    sample_bridge,
    sample_diffusion_bridge,
)

N = 4000
GRID = TimeGrid(0.0, 1.0, 32)


def _se(x):
    return x.std(ddof=1) / math.sqrt(x.size)


def test_stream_keys_must_be_nonnegative():
    with pytest.raises(DomainError):
        RngStream(1, 0, (-1,))
    a = RngStream(3, 2, (1,)).generator().random()
    b = RngStream(3, 2, (1,)).generator().random()
    c = RngStream(3, 2, (2,)).generator().random()
    assert a == b and a != c


def test_rows_do_not_depend_on_id_blocks():
    whole = bridge_rows(7, range(10), GRID, 0.0, 1.0)
    parts = np.vstack([bridge_rows(7, range(5), GRID, 0.0, 1.0), bridge_rows(7, range(5, 10), GRID, 0.0, 1.0)])
    assert np.array_equal(whole, parts)
    single = sample_bridge(RngStream(7, 3), GRID, 0.0, 1.0)
    assert np.array_equal(single.values, whole[3])


def test_bridge_marginal_moments():
    rows = bridge_rows(1, range(N), GRID, 0.5, 2.0)
    assert np.all(rows[:, 0] == 0.5) and np.all(rows[:, -1] == 2.0)
    x = rows[:, GRID.index_of(0.25)]
    assert abs(x.mean() - (0.5 + 1.5 * 0.25)) < 4 * _se(x)
    assert x.var() == pytest.approx(0.25 * 0.75, rel=0.1)


def test_bes3_bridge_is_nonnegative_with_exact_ends():
    rows = bes3_bridge_rows(2, range(500), GRID, 0.0, 0.8)
    assert np.all(rows >= 0.0)
    assert np.all(rows[:, 0] == 0.0) and np.allclose(rows[:, -1], 0.8)
    with pytest.raises(DomainError):
        bes3_bridge_rows(2, range(3), GRID, -0.1, 0.8)


def test_bes3_second_moment():
    rows = bes3_rows(3, range(N), GRID)
    r2 = rows[:, GRID.index_of(0.5)] ** 2
    assert abs(r2.mean() - 1.5) < 4 * _se(r2)


def test_meander_endpoint_is_rayleigh():
    grid = TimeGrid(0.0, 0.5, 16)
    ends = meander_rows(4, range(N), grid)[:, -1]
    assert abs(ends.mean() - math.sqrt(math.pi / 2 * 0.5)) < 4 * _se(ends)
    assert np.all(meander_rows(4, range(50), grid) >= 0.0)


def test_zero_drift_diffusion_is_brownian_motion():
    a = brownian_rows(5, range(20), GRID, 0.3)
    b = diffusion_rows(5, range(20), GRID, DriftModel.zero(), 0.3)
    assert np.allclose(a, b, atol=1e-12)


def test_constant_drift_diffusion_mean():
    rows = diffusion_rows(6, range(N), GRID, DriftModel.constant(1.5))
    x = rows[:, -1]
    assert abs(x.mean() - 1.5) < 4 * _se(x)


def test_exploding_diffusion_raises():
    d = DriftModel.polynomial([0.0, 0.0, 0.0, 10.0])
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericError):
            diffusion_rows(0, range(2), TimeGrid(0.0, 1.0, 10), d, 100.0)


def test_diffusion_bridge_log_weight():
    path, lw = sample_diffusion_bridge(RngStream(1, 0), GRID, DriftModel.constant(2.0), 0.0, 1.0)
    assert path.values[-1] == 1.0
    assert lw == pytest.approx(-0.5 * 4.0)
    with pytest.raises(DomainError):
        sample_diffusion_bridge(RngStream(1, 0), GRID, DriftModel.zero(), 0.0, 1.0, tol=-1.0)
