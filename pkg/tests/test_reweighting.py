import math

import numpy as np
import pytest

from housemove.conditioned import WeightedEnsemble
from housemove.corridor import TimeGrid
from housemove.drift import DriftModel
from housemove.errors import CompositionError, DegeneracyError, DomainError, LowESSWarning
from housemove.reweighting import (
    DensityEstimate,
    Functional,
    KernelTable,
    estimate_marginal_density,
    histogram_density,
    kernel_y_grid,
    log_weights_bridge,
    log_weights_unpinned,
    product_estimate,
    snis,
    snis_replicates,
)
from housemove.samplers import bridge_rows, brownian_rows

GRID = TimeGrid(0.0, 1.0, 16)


def test_functionals():
    vals = np.array([[0.0, 2.0, 1.0], [0.0, -3.0, 0.5]])
    g = TimeGrid(0.0, 1.0, 2)
    assert Functional.value_at(0.5, (-1.0, 1.0))(g, vals).tolist() == [1.0, -1.0]
    assert Functional.running_max((0.0, 1.5))(g, vals).tolist() == [1.5, 0.5]
    assert Functional.constant(2.0)(g, vals).tolist() == [2.0, 2.0]
    assert Functional.value_at(0.5).name == "value_at(0.5)"


def test_bridge_log_weight_for_constant_drift():
    rows = bridge_rows(0, range(3), GRID, 0.0, 1.0)
    assert np.allclose(log_weights_bridge(DriftModel.constant(3.0), GRID, rows), -4.5)


def test_unpinned_log_weight_adds_G():
    rows = brownian_rows(0, range(3), GRID, 0.0)
    d = DriftModel.constant(0.5)
    assert np.allclose(log_weights_unpinned(d, GRID, rows), 0.5 * rows[:, -1] - 0.125)


def test_girsanov_reweighting_recovers_drifted_mean():
    c = 0.5
    rows = brownian_rows(11, range(4000), GRID, 0.0)
    ens = WeightedEnsemble(GRID, rows, np.zeros(4000))
    res = snis(ens, Functional.value_at(1.0), log_weights_unpinned(DriftModel.constant(c), GRID, rows))
    assert abs(res.estimate - c) < 4 * res.std_err
    assert 1000 < res.ess < 4000


def test_snis_equal_weights_is_plain_mean():
    vals = np.array([[0.0, 1.0], [0.0, 3.0]] * 10)
    ens = WeightedEnsemble(TimeGrid(0.0, 1.0, 1), vals, np.zeros(20))
    res = snis(ens, Functional.value_at(1.0))
    assert res.estimate == pytest.approx(2.0)
    assert res.ess == pytest.approx(20.0)


def test_snis_warns_on_low_ess_and_fails_on_no_weight():
    vals = np.array([[0.0, 1.0], [0.0, 3.0]])
    ens = WeightedEnsemble(TimeGrid(0.0, 1.0, 1), vals, np.zeros(2))
    with pytest.warns(LowESSWarning):
        snis(ens, Functional.constant())
    with pytest.raises(DegeneracyError):
        snis(ens, Functional.constant(), np.array([-np.inf, -np.inf]))


def test_snis_replicates_uses_the_spread_between_runs():
    grid = TimeGrid(0.0, 1.0, 1)
    runs = [WeightedEnsemble(grid, np.tile([0.0, level], (20, 1)), np.zeros(20)) for level in (1.0, 3.0)]
    res = snis_replicates(runs, Functional.value_at(1.0))
    assert res.estimate == pytest.approx(2.0)
    # each run alone has zero delta-method error
    assert res.std_err == pytest.approx(1.0)
    assert res.ess == pytest.approx(40.0)
    with pytest.raises(DomainError):
        snis_replicates(runs[:1], Functional.value_at(1.0))


def test_density_estimate_rules():
    with pytest.raises(DomainError):
        DensityEstimate("h", np.array([0.0, 1.0]), np.array([1.0, -0.1]), np.zeros(2), 1.0)
    est = DensityEstimate("h", np.array([0.0, 1.0]), np.array([1.0, 3.0]), np.array([0.1, 0.1]), 2.0, 0.2)
    norm = est.renormalized()
    assert norm.values.tolist() == [0.5, 1.5] and norm.mass == 1.0
    assert norm.meta["mass_before_renormalization"] == 2.0
    with pytest.raises(DegeneracyError):
        DensityEstimate("h", est.y, np.zeros(2), np.zeros(2), 0.0).renormalized()


def test_kernel_table_interpolates_and_guards_its_range():
    y = np.linspace(0.0, 1.0, 11)
    t = KernelTable("q", y, y**2, np.full(11, 0.01))
    assert t(0.3) == pytest.approx(0.09)
    assert t.std_err_at(0.35) == pytest.approx(0.01)
    assert t.contains(np.array([-0.1, 0.5])).tolist() == [False, True]
    with pytest.raises(DomainError):
        t(1.2)
    other = KernelTable("r", np.linspace(0.0, 1.0, 5), np.zeros(5), np.zeros(5))
    with pytest.raises(CompositionError):
        t.require_grid(other)


def test_single_node_table_is_a_constant_lookup():
    t = KernelTable("s", np.array([0.4]), np.array([0.7]), np.array([0.02]))
    assert t(0.4) == pytest.approx(0.7)
    assert t(np.array([0.4, 0.4])).tolist() == [0.7, 0.7]
    assert t.std_err_at(0.4) == pytest.approx(0.02)
    with pytest.raises(DomainError):
        t(0.41)
    with pytest.raises(DomainError):
        KernelTable("e", np.array([]), np.array([]), np.array([]))


def test_kernel_y_grid_keeps_off_the_walls(flat):
    assert np.allclose(kernel_y_grid(flat, 0.5, nodes=5), np.linspace(0.01, 0.99, 5))


def test_histogram_density_of_uniform_samples():
    rng = np.random.default_rng(3)
    x = rng.random(20000)
    y = np.linspace(0.05, 0.95, 10)
    est = histogram_density("u", x, np.ones_like(x), y, 0.0, 1.0)
    assert est.mass == pytest.approx(1.0)
    assert np.allclose(est.values, 1.0, atol=0.1)
    sub = histogram_density("u", x, np.full_like(x, 0.5), y, 0.0, 1.0, normalize=False)
    assert sub.mass == pytest.approx(0.5)


def test_marginal_density_of_bridge(flat):
    rows = bridge_rows(2, range(2000), TimeGrid(0.0, 0.25, 16), 0.5, 0.5)
    ens = WeightedEnsemble(TimeGrid(0.0, 0.25, 16), rows, np.zeros(2000))
    est = estimate_marginal_density(ens, 0.125, flat, bins=20)
    assert est.meta["t"] == 0.125
    assert 0.9 < est.mass <= 1.0
    assert est.y[np.argmax(est.values)] == pytest.approx(0.5, abs=0.15)


def test_product_estimate_combines_errors():
    y = np.array([0.25, 0.5, 0.75])
    est = product_estimate("p", y, [(np.full(3, 2.0), np.full(3, 0.2)), (np.full(3, 1.0), np.zeros(3))], 0.5, 0.0, 0.0, 1.0)
    assert est.values.tolist() == [1.0, 1.0, 1.0]
    assert np.allclose(est.std_err, 0.1)
    # tent with zero walls: 0.25·½ + 0.5·1 + 0.25·½
    assert est.mass == pytest.approx(0.75)
