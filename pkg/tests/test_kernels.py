import dataclasses
import math

import numpy as np
import pytest

from housemove.conditioned import Anchor, BoundaryCase
from housemove.corridor import Corridor, Curve, TimeGrid
from housemove.drift import DriftModel
from housemove.errors import DomainError, PreconditionError
from housemove import kernels
from housemove.kernels import (
    KernelSettings,
    TableBuilder,
    estimate_C_constant,
    estimate_h,
    estimate_h_mu,
    estimate_k,
    estimate_k_transition,
    estimate_meander_kernel_mean,
    estimate_p_kernel,
    estimate_q_up,
    estimate_survival,
    moment_constants,
    weight_expectation,
)
from housemove.reweighting import KernelTable

# P(Brownian motion from the middle of a unit corridor survives a quarter of time)
MID_SURVIVAL = 4.0 / math.pi * (math.exp(-math.pi**2 / 8.0) - math.exp(-9.0 * math.pi**2 / 8.0) / 3.0)

WIDE = Corridor(Curve.constant(-10.0), Curve.constant(10.0))
SETTINGS = KernelSettings(n_steps=64, paths=4000, nodes=16, replicates=2)


def test_settings_validation():
    with pytest.raises(DomainError):
        KernelSettings(replicates=1)
    with pytest.raises(DomainError):
        KernelSettings(paths=1)


def test_q_up_without_an_upper_wall_is_rayleigh(small_settings):
    k = Corridor(Curve.constant(0.0), Curve.constant(10.0))
    y = np.linspace(0.1, 2.0, 8)
    table = estimate_q_up(k, 0.5, y, settings=small_settings)
    assert np.allclose(table.values, y / 0.5 * np.exp(-y * y), rtol=1e-6)
    assert table.meta["t"] == 0.5


def test_q_up_rejects_grid_on_the_wall(flat, small_settings):
    with pytest.raises(DomainError):
        estimate_q_up(flat, 0.5, np.array([0.0, 0.5]), settings=small_settings)


def test_p_kernel_without_walls_is_gaussian():
    y = np.linspace(-1.5, 1.5, 13)
    p = estimate_p_kernel(WIDE, 0.25, 0.5, 0.0, y, settings=SETTINGS)
    assert p.meta["mass"] == pytest.approx(1.0, abs=1e-3)
    assert p(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi * 0.25), abs=0.1)


def test_p_kernel_mass_is_survival_probability(flat):
    p = estimate_p_kernel(flat, 0.25, 0.5, 0.5, settings=SETTINGS)
    assert p.meta["mass"] == pytest.approx(MID_SURVIVAL, abs=0.03)
    with pytest.raises(DomainError):
        estimate_p_kernel(flat, 0.25, 0.5, 1.0, settings=SETTINGS)


def test_survival_single_node_table(flat):
    s = estimate_survival(flat, 0.75, np.array([0.5]), settings=SETTINGS)
    assert s.y.tolist() == [0.5]
    assert s(0.5) == pytest.approx(MID_SURVIVAL, abs=0.03)
    assert s.std_err_at(0.5) == s.std_err[0]
    with pytest.raises(DomainError):
        s(0.6)


def test_meander_transition_to_the_end_is_a_probability_density(flat):
    est = estimate_k_transition(flat, 0.75, 0.5, 1.0, settings=SETTINGS)
    assert est.mass == pytest.approx(1.0, abs=0.12)


def test_meander_density_mass(flat, small_settings):
    est = estimate_k(flat, 0.5, settings=small_settings)
    assert est.mass == pytest.approx(1.0)
    assert est.meta["paths"] > 0


def test_h_is_the_scaled_kernel_product(flat, small_settings):
    y = np.linspace(0.1, 0.9, 5)
    up = KernelTable("q_up", y, np.ones(5), np.zeros(5))
    down = KernelTable("q_down", y, np.full(5, 2.0), np.zeros(5))
    h = estimate_h(flat, 0.5, C=(2.0, 0.0), tables=(up, down), settings=small_settings)
    assert np.allclose(h.values, 2.0)
    assert h.meta["C"] == 2.0
    hmu = estimate_h_mu(DriftModel.zero(), flat, 0.5, h=h)
    assert np.array_equal(hmu.values, h.values)
    with pytest.raises(DomainError):
        estimate_h(flat, 1.0, C=(2.0, 0.0), tables=(up, down))


def test_C_needs_house_moving_corridor(small_settings):
    k = Corridor(Curve.constant(0.2), Curve.constant(1.0))
    with pytest.raises(PreconditionError):
        estimate_C_constant(k, settings=small_settings)


def test_weight_expectation_for_constant_drift_is_exact(flat, small_settings):
    grid = TimeGrid(0.0, 0.5, 32)
    case = BoundaryCase(Anchor.interior(0.3), Anchor.interior(0.6))
    e = weight_expectation(DriftModel.constant(1.0), flat, grid, case, settings=small_settings)
    assert e.value == pytest.approx(math.exp(-0.25), rel=1e-9)
    assert weight_expectation(DriftModel.zero(), flat, grid, case).value == 1.0


def test_meander_kernel_mean_without_walls():
    k = Corridor(Curve.constant(0.0), Curve.constant(10.0))
    e = estimate_meander_kernel_mean(k, 0.5, settings=KernelSettings(n_steps=64, paths=200, replicates=2))
    assert e.value == pytest.approx(1.0, rel=1e-6)


def test_moment_constants_for_flat_corridor(flat):
    m = moment_constants(flat, 2.0)
    assert (m.d1, m.d2, m.c_lower, m.c_upper) == pytest.approx((1.0, 1.0, 1.0, 1.0))
    assert m.bound == pytest.approx(math.pi)


def test_builder_memoizes_and_reuses_the_cache(flat, small_settings, tmp_path):
    builder = TableBuilder(flat, DriftModel.zero(), small_settings, cache_root=tmp_path, config_hash="abc")
    first = builder.q_up(0.5)
    assert builder.q_up(0.5) is first
    assert list((tmp_path / "config=abc").glob("part-*"))

    again = TableBuilder(flat, DriftModel.zero(), small_settings, cache_root=tmp_path, config_hash="abc")
    cached = again.q_up(0.5)
    assert cached.meta["cached"] is True
    assert np.allclose(cached.values, first.values)
    assert again.lower_piece(0.5).values.tolist() == [1.0] * small_settings.nodes


def test_piece_table_needs_one_anchor(flat, small_settings):
    builder = TableBuilder(flat, DriftModel.constant(1.0), small_settings)
    with pytest.raises(DomainError):
        builder.piece_table(0.0, 0.5, np.array([0.5]), name="x", key=(9,))


def test_piece_table_memo_tells_anchors_and_nodes_apart(flat, small_settings, monkeypatch):
    calls = []

    def fake(d, k, grid, cases, y, **kwargs):
        calls.append(cases[0].end)
        return KernelTable(kwargs["name"], y, np.full(y.size, float(len(calls))), np.zeros(y.size))

    monkeypatch.setattr(kernels, "weight_expectations", fake)
    builder = TableBuilder(flat, DriftModel.constant(1.0), small_settings)
    y = np.array([0.2, 0.4])
    a = builder.piece_table(0.25, 0.5, y, end=Anchor.interior(0.3), name="bridge_into", key=(10, 1, 2))
    b = builder.piece_table(0.25, 0.5, y, end=Anchor.interior(0.7), name="bridge_into", key=(10, 1, 2))
    c = builder.piece_table(0.25, 0.5, y + 0.1, end=Anchor.interior(0.7), name="bridge_into", key=(10, 1, 2))
    again = builder.piece_table(0.25, 0.5, y, end=Anchor.interior(0.3), name="bridge_into", key=(10, 1, 2))
    assert [e.value for e in calls] == [0.3, 0.7, 0.7]
    assert a.values[0] == 1.0 and b.values[0] == 2.0 and c.values[0] == 3.0
    assert again is a


def test_tables_do_not_depend_on_the_worker_count(flat, small_settings):
    y = np.linspace(0.1, 0.9, 5)
    pooled = dataclasses.replace(small_settings, workers=3)
    one = estimate_q_up(flat, 0.5, y, settings=small_settings, seed=11)
    many = estimate_q_up(flat, 0.5, y, settings=pooled, seed=11)
    assert np.array_equal(one.values, many.values)
    assert np.array_equal(one.std_err, many.std_err)
    c_one = estimate_C_constant(flat, settings=small_settings, seed=11)
    c_many = estimate_C_constant(flat, settings=pooled, seed=11)
    assert (c_one.estimate, c_one.std_err) == (c_many.estimate, c_many.std_err)
