import math

import numpy as np
import pytest

from housemove.corridor import SamplePath, TimeGrid
from housemove.drift import DriftModel
from housemove.errors import CompositionError, DomainError
from housemove.kernels import WeightExpectation
from housemove.radon import (
    RadonTables,
    chain_factor,
    rn_chain,
    rn_chain_batch,
    rn_cor3,
    rn_cor3_batch,
    rn_hm_mea_batch,
)
from housemove.reweighting import KernelTable

T = 0.5
GRID = TimeGrid(0.0, T, 4)
Y = np.linspace(0.05, 0.95, 10)


def _tables(chain_meander=None, chain_kernel=None, upper=None):
    meander = WeightExpectation(0.8, 0.01, 100.0)
    kernel = WeightExpectation(0.6, 0.01, 100.0)
    return RadonTables(
        t=T,
        C=2.0,
        C_se=0.02,
        q_down=KernelTable("q_down", Y, 1.0 + Y, np.full(Y.size, 0.01)),
        upper_piece=upper or KernelTable("upper_piece", Y, np.ones(Y.size), np.zeros(Y.size)),
        house_moving=WeightExpectation(1.0, 0.0, math.inf),
        meander=meander,
        meander_kernel=kernel,
        chain_meander=chain_meander or meander,
        chain_meander_kernel=chain_kernel or kernel,
    )


ROWS = np.array(
    [
        [0.0, 0.2, 0.4, 0.3, 0.5],  # ok
        [0.0, 0.2, 1.2, 0.3, 0.5],  # leaves the corridor
        [0.0, 0.2, 0.4, 0.3, 0.0],  # ends on the lower wall
        [0.0, 0.2, 0.4, 0.3, 0.98],  # ends in the untabulated edge band
    ]
)


def test_flags_and_special_values(flat):
    batch = rn_cor3_batch(DriftModel.zero(), flat, _tables(), GRID, ROWS)
    assert batch.flags.tolist() == ["ok", "outside", "singular", "off_table"]
    assert batch.values[1] == 0.0
    assert math.isinf(batch.values[2])
    assert math.isnan(batch.values[3])
    assert batch.usable.tolist() == [True, True, True, False]
    assert batch.counts() == {"ok": 1, "outside": 1, "singular": 1, "off_table": 1}


def test_cor3_closed_form_for_flat_corridor_without_drift(flat):
    value = rn_cor3_batch(DriftModel.zero(), flat, _tables(), GRID, ROWS[:1]).values[0]
    expected = math.sqrt(math.pi / 2) * 1.5 / (2.0 * math.sqrt(1 - T) * 0.5)
    assert value == pytest.approx(expected, rel=1e-9)


def test_hm_mea_depends_on_the_endpoint_only(flat):
    d = DriftModel.linear(0.5, -1.0)
    rows = np.array([[0.0, 0.2, 0.4, 0.3, 0.5], [0.0, 0.7, 0.1, 0.9, 0.5]])
    batch = rn_hm_mea_batch(d, flat, _tables(), GRID, rows)
    assert batch.values[0] == pytest.approx(batch.values[1])
    assert batch.flags.tolist() == ["ok", "ok"]


def test_chain_agrees_with_cor3_when_the_meander_means_agree(flat):
    d = DriftModel.linear(0.5, -1.0)
    tables = _tables()
    chain = rn_chain_batch(d, flat, tables, GRID, ROWS)
    cor3 = rn_cor3_batch(d, flat, tables, GRID, ROWS)
    assert chain.flags.tolist() == cor3.flags.tolist()
    assert chain.values[0] == pytest.approx(cor3.values[0], rel=1e-9)
    assert chain.values[1] == 0.0


def test_chain_factor_tracks_independent_estimates(flat):
    d = DriftModel.constant(0.3)
    tables = _tables(chain_meander=WeightExpectation(0.4, 0.01, 50.0))
    factor, rel = chain_factor(tables)
    assert factor == pytest.approx(2.0)
    assert rel > 0
    chain = rn_chain_batch(d, flat, tables, GRID, ROWS[:1]).values[0]
    cor3 = rn_cor3_batch(d, flat, tables, GRID, ROWS[:1]).values[0]
    assert chain == pytest.approx(factor * cor3, rel=1e-9)


def test_single_path_wrappers_check_time_and_grid(flat):
    tables = _tables()
    w = SamplePath(GRID, ROWS[0])
    value = rn_cor3(DriftModel.zero(), flat, T, w, tables)
    assert value.flag == "ok" and value.value > 0 and value.std_err > 0
    assert rn_chain(DriftModel.zero(), flat, T, w, tables).flag == "ok"
    with pytest.raises(DomainError):
        rn_cor3(DriftModel.zero(), flat, 0.25, w, tables)
    with pytest.raises(DomainError):
        rn_cor3_batch(DriftModel.zero(), flat, tables, TimeGrid(0.0, 1.0, 4), ROWS)


def test_tables_must_share_a_grid():
    upper = KernelTable("upper_piece", np.linspace(0.1, 0.9, 5), np.ones(5), np.zeros(5))
    with pytest.raises(CompositionError):
        _tables(upper=upper)
