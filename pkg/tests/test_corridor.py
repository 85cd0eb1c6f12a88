import math

import numpy as np
import pytest

from housemove.corridor import (
    Corridor,
    Curve,
    SamplePath,
    TimeGrid,
    corridor_contains,
    curve_eval,
    reverse_path,
    shift_path,
    splice,
    splice_values,
)
from housemove.errors import CompositionError, DomainError, PreconditionError


def test_cosine_curve_derivatives_match_closed_form():
    g = Curve.cosine(0.1, 1.0, 0.0, 1.2)
    t = 0.3
    w = 2 * math.pi
    assert g(t) == pytest.approx(1.2 + 0.1 * math.cos(w * t))
    assert g(t, 1) == pytest.approx(-0.1 * w * math.sin(w * t))
    assert g(t, 2) == pytest.approx(-0.1 * w * w * math.cos(w * t))


def test_curve_outside_domain_raises():
    with pytest.raises(DomainError):
        curve_eval(Curve.constant(1.0), 1.5)


def test_reversed_curve_flips_time_and_first_derivative():
    g = Curve.polynomial([0.0, 1.0, 2.0])  # t + 2t²
    r = g.reversed(0.2, 0.8)
    u = 0.3
    assert r(u) == pytest.approx(g(0.7))
    assert r(u, 1) == pytest.approx(-g(0.7, 1))
    assert r(u, 2) == pytest.approx(g(0.7, 2))


def test_curve_algebra_combines_values():
    a, b = Curve.linear(0.0, 1.0), Curve.constant(2.0)
    assert (a + b)(0.5) == pytest.approx(2.5)
    assert (b - a)(0.25) == pytest.approx(1.75)
    assert (1.0 - a)(0.25) == pytest.approx(0.75)
    assert (a + b).scaled(0.5)(1.0) == pytest.approx(1.5)


def test_tabulated_curve_rejects_inconsistent_derivatives():
    ts = np.linspace(0, 1, 11)
    with pytest.raises(DomainError):
        Curve.tabulated(ts, ts**2, np.zeros_like(ts), np.zeros_like(ts))


def test_corridor_rejects_crossing_curves():
    with pytest.raises(DomainError, match="min width"):
        Corridor(Curve.constant(0.0), Curve.linear(0.5, -1.0))


def test_corridor_properties(flat, wavy):
    assert flat.is_flat and flat.is_house_moving
    assert flat.b == pytest.approx(1.0)
    assert flat.min_width == pytest.approx(1.0)
    assert not wavy.is_flat
    assert wavy.b == pytest.approx(1.3)
    assert wavy.min_width == pytest.approx(1.1, abs=1e-4)


def test_mirrored_corridor_starts_at_zero(wavy):
    m = wavy.mirrored(0.5, 1.0)
    assert curve_eval(m.lower, 0.5) == pytest.approx(0.0)
    assert curve_eval(m.upper, 1.0) == pytest.approx(wavy.b - 0.0)


def test_grid_index_and_snap():
    g = TimeGrid(0.0, 1.0, 8)
    assert g.index_of(0.25) == 2
    with pytest.raises(PreconditionError):
        g.index_of(0.3)
    assert g.snap(0.3) == pytest.approx(0.25)
    sub = g.sub_grid(0.25, 0.75)
    assert sub.n_steps == 4 and sub.dt == pytest.approx(g.dt)


def test_corridor_contains_is_closed(flat):
    g = TimeGrid(0.0, 1.0, 4)
    touching = SamplePath(g, [0.0, 0.5, 1.0, 0.5, 1.0])
    outside = SamplePath(g, [0.0, 0.5, 1.01, 0.5, 1.0])
    assert corridor_contains(flat, touching)
    assert not corridor_contains(flat, outside)
    assert corridor_contains(flat, outside, 0.0, 0.02)


def test_splice_requires_adjacent_parts():
    a = SamplePath(TimeGrid(0.0, 0.5, 2), [0.0, 1.0, 2.0])
    b = SamplePath(TimeGrid(0.5, 1.0, 2), [2.5, 3.0, 4.0])
    c = SamplePath(TimeGrid(0.6, 1.0, 2), [0.0, 0.0, 0.0])
    w = splice([a, b])
    assert w.grid.n_steps == 4
    # later part wins at the junction
    assert list(w.values) == [0.0, 1.0, 2.5, 3.0, 4.0]
    with pytest.raises(CompositionError):
        splice([a, c])


def test_splice_values_matches_single_splice():
    g1, g2 = TimeGrid(0.0, 0.5, 2), TimeGrid(0.5, 1.0, 2)
    left = np.array([[0.0, 1.0, 2.0], [0.0, -1.0, -2.0]])
    right = np.array([[2.0, 3.0, 4.0], [-2.0, -3.0, -4.0]])
    grid, vals = splice_values([g1, g2], [left, right])
    assert grid == TimeGrid(0.0, 1.0, 4)
    single = splice([SamplePath(g1, left[1]), SamplePath(g2, right[1])])
    assert np.array_equal(vals[1], single.values)


def test_reverse_is_an_involution_and_shift_adds_curve():
    g = TimeGrid(0.0, 1.0, 4)
    w = SamplePath(g, [0.0, 0.1, 0.4, 0.2, 0.3])
    assert np.array_equal(reverse_path(reverse_path(w)).values, w.values)
    shifted = shift_path(w, Curve.linear(1.0, 1.0))
    assert np.allclose(shifted.values, w.values + 1.0 + g.times)
