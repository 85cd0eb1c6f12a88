import math

import numpy as np
import pytest

from housemove.conditioned import WeightedEnsemble
from housemove.corridor import Corridor, Curve, TimeGrid
from housemove.drift import DriftModel
from housemove.errors import ConfigError, DomainError, PreconditionError
from housemove.kernels import TableBuilder
from housemove.reweighting import Functional
from housemove.samplers import brownian_rows
from housemove.verify import (
    SUITES,
    TestReport,
    check_bessel_case,
    check_boundary_avoidance,
    check_chapman_kolmogorov,
    check_decomposition,
    check_degeneration,
    check_moment_bounds,
    check_reversal,
    check_rn_chain,
    estimate_holder_exponent,
    girsanov_consistency,
    resolve_suite,
)


def test_report_verdicts():
    probe = TestReport("x", {"d": 0.1}, {}, None, {"paths": 5}, 1)
    assert probe.verdict == "probe" and not probe.failed
    soft = TestReport("x", {}, {}, False, {}, 1, asserted=False)
    assert soft.verdict == "fail" and not soft.failed
    hard = TestReport("y", {"ks": 0.25, "levels": [1, 2]}, {"p_value_min": 0.01}, False, {"paths": 5}, 3, notes="n")
    assert hard.failed
    row = hard.row()
    assert row["test"] == "y" and row["stat_ks"] == 0.25 and "stat_levels" not in row
    assert row["threshold_p_value_min"] == 0.01 and row["n_paths"] == 5
    assert hard.text().startswith("y: FAIL [ks=0.25, levels=[1, 2]]")
    assert hard.text().endswith("(n)")


def test_resolve_suite():
    assert resolve_suite("all") == list(SUITES)
    assert resolve_suite("reversal, holder") == ["reversal", "holder"]
    with pytest.raises(ConfigError):
        resolve_suite("reversal,nonsense")
    with pytest.raises(ConfigError):
        resolve_suite("")


def test_holder_exponent_of_brownian_motion():
    grid = TimeGrid(0.0, 1.0, 1024)
    ens = WeightedEnsemble(grid, brownian_rows(8, range(300), grid, 0.0), np.zeros(300))
    report = estimate_holder_exponent(ens, (4, 10), seed=8)
    assert report.passed
    assert report.statistics["median_raw_exponent"] < report.statistics["median_exponent"]
    with pytest.raises(PreconditionError):
        estimate_holder_exponent(WeightedEnsemble(TimeGrid(0.0, 1.0, 100), np.zeros((2, 101)), np.zeros(2)))


def test_girsanov_unpinned_without_corridor():
    report = girsanov_consistency(DriftModel.constant(0.7), None, 0.0, None, Functional.value_at(0.5), 4000, n_steps=64, seed=2)
    assert report.passed
    assert report.statistics["direct"] == pytest.approx(0.35, abs=0.06)


def test_girsanov_ou_bridge():
    d = DriftModel.linear(0.0, -1.0)
    report = girsanov_consistency(d, None, 0.0, 0.0, Functional.value_at(0.5, (-2.0, 2.0)), 4000, n_steps=64, seed=3)
    assert report.passed
    assert report.statistics["accepted"] >= 100


def test_bessel_case_matches_bes3_bridge():
    k = Corridor(Curve.constant(0.0), Curve.constant(3.0))
    report = check_bessel_case(k, 1.0, 0.5, 400, n_steps=64, seed=4)
    assert report.passed
    with pytest.raises(PreconditionError):
        check_bessel_case(Corridor(Curve.linear(0.0, 0.1), Curve.constant(2.0)), n_steps=64)


def test_reversal_needs_flat_corridor(wavy, small_settings):
    with pytest.raises(PreconditionError):
        check_reversal(TableBuilder(wavy, DriftModel.zero(), small_settings), paths=10)


def test_boundary_avoidance(flat, small_settings):
    builder = TableBuilder(flat, DriftModel.zero(), small_settings, seed=5)
    with pytest.raises(DomainError):
        check_boundary_avoidance(builder, flat.upper, "inside")
    mid = check_boundary_avoidance(builder, (flat.lower + flat.upper).scaled(0.5), paths=300)
    assert mid.passed and mid.statistics["finest_fraction"] == 0.0
    assert len(mid.statistics["fraction_by_level"]) == builder.schedule.levels
    wall = check_boundary_avoidance(builder, flat.upper, window=(0.05, 0.95), paths=300, asserted=False)
    assert wall.passed is None and not wall.failed
    assert wall.statistics["finest_fraction"] > mid.statistics["finest_fraction"]


def test_degeneration_for_zero_drift(flat, small_settings):
    builder = TableBuilder(flat, DriftModel.linear(0.2, -0.5), small_settings, seed=6)
    report = check_degeneration(builder, 0.5, probes=10)
    assert report.passed, report.text()
    assert report.statistics["h_equal"] and report.statistics["k_equal"]


@pytest.fixture
def brownian(flat, small_settings):
    return TableBuilder(flat, DriftModel.zero(), small_settings, seed=12)


def test_chapman_kolmogorov_at_desk_scale(brownian):
    report = check_chapman_kolmogorov(brownian)
    assert report.passed, report.text()
    assert report.statistics["mass"] == pytest.approx(1.0, abs=0.2)
    with pytest.raises(DomainError):
        check_chapman_kolmogorov(brownian, (0.5, 0.25, 0.75))


def test_decomposition_at_the_midpoint(brownian):
    report = check_decomposition(brownian, 0.5, paths=400, paths_per_node=40, replicates=4)
    assert report.passed, report.text()
    # the flat corridor is symmetric about its middle
    assert report.statistics["direct"] == pytest.approx(0.5, abs=0.1)
    assert report.sizes["replicates"] == 4
    with pytest.raises(DomainError):
        check_decomposition(brownian, 0.5, paths=400, replicates=1)


def test_reversal_of_flat_house_moving(brownian):
    report = check_reversal(brownian, 0.25, paths=400, replicates=4)
    assert report.passed, report.text()
    # resampled particles count for less than the raw path total
    assert 1.0 <= report.statistics["n_eff_a"] <= 400.0
    assert report.sizes == {"paths": 400, "replicates": 4}


def test_moment_constants_are_stable_under_refinement(brownian):
    report = check_moment_bounds(brownian, paths=400)
    assert report.passed, report.text()
    for m0 in (1, 2, 3):
        for label in ("m1", "m2", "m3"):
            assert report.statistics[f"C_hat_{label}_m{m0}"] > 0
            assert report.statistics[f"refine_{label}_m{m0}"] >= 1.0
    assert report.sizes["fine_nodes"] > report.sizes["nodes"]
    assert "unasserted" in report.notes


def test_rn_chain_at_desk_scale(brownian):
    report = check_rn_chain(brownian, 0.5, 20, paths=400, replicates=4)
    s = report.statistics
    assert s["chain_max_z"] <= 3.0
    for side in ("bessel_weighted", "meander_weighted"):
        assert abs(s["direct"] - s[side]) <= 5.0 * math.hypot(s["direct_se"], s[f"{side}_se"]), report.text()
    assert s["direct_se"] > 0 and s["meander_weighted_se"] > 0
