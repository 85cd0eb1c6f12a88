import math

import numpy as np
import pytest

from housemove.corridor import Corridor, Curve, SamplePath, TimeGrid
from housemove.drift import (
    DriftModel,
    SdeModel,
    c_mu_bound,
    cameron_martin_Z,
    cameron_martin_Z_tilde,
    eval_G,
    eval_N,
    lamperti_curve,
    lamperti_transform,
    n_functional,
)
from housemove.errors import DomainError, ModelError


def test_polynomial_collapses_to_simplest_kind():
    assert DriftModel.polynomial([0.0, 0.0]).is_zero
    assert DriftModel.polynomial([1.5]).kind == "constant"
    assert DriftModel.polynomial([0.0, -1.0, 0.0]).kind == "linear"


def test_G_is_antiderivative_of_mu():
    d = DriftModel.linear(1.0, -2.0)  # μ = 1 − 2x
    assert eval_G(d, 0.5) == pytest.approx(0.5 - 0.25)
    assert eval_G(DriftModel.zero(), 3.0) == 0.0


def test_G_by_quadrature_for_tabulated_drift():
    x = np.linspace(-2, 2, 81)
    d = DriftModel.tabulated(x, np.sin(x), np.cos(x))
    assert eval_G(d, 1.0) == pytest.approx(1.0 - math.cos(1.0), abs=1e-5)


def test_N_for_constant_drift_is_c_squared_times_length():
    g = TimeGrid(0.0, 0.5, 10)
    w = SamplePath(g, np.linspace(0, 1, 11))
    assert eval_N(DriftModel.constant(2.0), w) == pytest.approx(4.0 * 0.5)


def test_N_is_batched_over_rows():
    g = TimeGrid(0.0, 1.0, 4)
    rows = np.array([[0.0, 0.1, 0.2, 0.3, 0.4], [1.0, 1.0, 1.0, 1.0, 1.0]])
    d = DriftModel.linear(0.0, -1.0)  # μ′ + μ² = −1 + x²
    n = n_functional(d, g, rows)
    assert n.shape == (2,)
    assert n[1] == pytest.approx(0.0)
    assert n[0] == pytest.approx(eval_N(d, SamplePath(g, rows[0])))


def test_c_mu_bound():
    k = Corridor(Curve.constant(0.0), Curve.constant(1.0))
    # −(μ′ + μ²) = 1 − x² for μ = −x peaks at x = 0
    assert c_mu_bound(DriftModel.linear(0.0, -1.0), k) == pytest.approx(1.0, abs=1e-8)
    assert c_mu_bound(DriftModel.constant(3.0), k) == 0.0
    with pytest.raises(DomainError):
        c_mu_bound(DriftModel.zero(), k, delta=0.0)


def test_cameron_martin_for_linear_shift():
    # g(t) = a t: Z^g(x) = exp(a(x(1) − x(0)) − a²/2)
    a = 0.7
    g = Curve.linear(0.0, a)
    grid = TimeGrid(0.0, 1.0, 8)
    w = SamplePath(grid, np.linspace(0.2, 1.0, 9))
    assert cameron_martin_Z(g, w) == pytest.approx(math.exp(a * 0.8 - 0.5 * a * a))
    # Z̃(x) = Z(x + g)
    shifted = SamplePath(grid, w.values + a * grid.times)
    assert cameron_martin_Z_tilde(g, w) == pytest.approx(cameron_martin_Z(g, shifted))


def test_lamperti_identity_and_constant_sigma():
    drift, scale = lamperti_transform(SdeModel((0.3, -1.0), (1.0,)))
    assert scale.kind == "identity"
    assert drift.mu(0.5) == pytest.approx(0.3 - 0.5)
    drift, scale = lamperti_transform(SdeModel((2.0,), (4.0,)))
    assert drift.mu(0.1) == pytest.approx(0.5)
    assert scale.L(2.0) == pytest.approx(0.5)


def test_lamperti_numeric_round_trip():
    model = SdeModel((0.0, -1.0), (1.0, 0.0, 0.5), u_range=(-1.0, 2.0))
    drift, scale = lamperti_transform(model)
    assert scale.kind == "numeric"
    u = np.linspace(-1.0, 2.0, 31)
    assert np.allclose(scale.L_inv(scale.L(u)), u, atol=1e-8)
    # L′ = 1/σ
    h = 1e-5
    assert (scale.L(1.0 + h) - scale.L(1.0 - h)) / (2 * h) == pytest.approx(1.0 / 1.5, rel=1e-6)


def test_lamperti_curve_derivative():
    model = SdeModel((0.0,), (1.0, 0.5), u_range=(-0.5, 2.0))
    _, scale = lamperti_transform(model)
    g = Curve.linear(0.0, 1.0)
    lg = lamperti_curve(scale, g)
    # (L∘g)′ = g′/σ(g)
    assert lg(0.5, 1) == pytest.approx(1.0 / 1.25, rel=1e-3)


def test_sigma_must_be_positive():
    with pytest.raises(ModelError):
        SdeModel((0.0,), (0.0, 1.0), u_range=(-1.0, 1.0))
