from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from desitter_kg.models import (
    X,
    Family,
    MetricModel,
    mode_operator_exprs,
    mode_operator_taylor,
    sphere_eigenvalue,
)
from desitter_kg.scattering import mode_equation
from desitter_kg.spectral import compute_spectral


@pytest.mark.parametrize("n", [2, 3, 4])
def test_boundary_operator_matches_time_equation(n):
    # x = 1/t on the future end: the theta-form operator is minus the separated time equation
    t = sp.Symbol("t", positive=True)
    mu, lam = sp.symbols("mu lam")
    f = sp.Function("f")
    A, B, D = mode_operator_exprs(MetricModel.exact(n))
    g = f(1 / X)
    theta = lambda e: X * sp.diff(e, X)
    x_form = (A * theta(theta(g)) + B * theta(g) + (mu * D - lam) * g).subs(X, 1 / t)
    F = f(t)
    t_form = (1 + t**2) ** (-sp.Rational(n - 2, 2)) * sp.diff((1 + t**2) ** sp.Rational(n, 2) * sp.diff(F, t), t) \
        + (mu / (1 + t**2) + lam) * F
    assert sp.simplify(x_form + t_form) == 0


def test_arctan_solves_mode_zero():
    eq = mode_equation(0, compute_spectral(2, 0))
    t = np.linspace(-5, 5, 41)
    f = np.arctan(t)
    df = 1 / (1 + t**2)
    d2f = -2 * t / (1 + t**2) ** 2
    assert np.max(np.abs(eq.residual(f, df, d2f, t))) < 1e-14
    assert np.max(np.abs(eq.residual(np.ones_like(t), 0 * t, 0 * t, t))) == 0


@pytest.mark.parametrize("model", [MetricModel.exact(2), MetricModel.product(3), MetricModel.warped(0.1)])
def test_normal_form_at_boundary(model):
    A, B, D = mode_operator_taylor(model, 4)
    assert A[0] == -1 and B[0] == model.n - 1 and D[0] == 0 and D[1] == 0


def test_boundary_metric_positive_and_tangential():
    m = MetricModel.warped(0.2)
    y = np.array([0.6, 0.8])
    h = m.boundary_metric(0.0, y)
    assert np.allclose(h @ y, 0)
    t = np.array([-0.8, 0.6])
    assert t @ h @ t > 0


def test_warp_consistent_between_charts():
    m = MetricModel.warped(0.3)
    x = 0.4
    rho = np.arcsinh(1 / x)
    beta, _, _ = m.beta_rho(rho)
    assert float(m.b(x)) == pytest.approx((1 + x * x) * float(beta), rel=1e-14)


def test_perturbation_parameters_validated():
    with pytest.raises(ValueError):
        MetricModel(2, Family.EXACT_DE_SITTER, eps=0.1)
    with pytest.raises(ValueError):
        MetricModel.warped(1.5)
    with pytest.raises(ValueError):
        MetricModel.warped(0.1, n=3, eps_angular=0.1)


def test_sphere_eigenvalues():
    assert sphere_eigenvalue(2, -3) == 9
    assert sphere_eigenvalue(4, 2) == 2 * 4
    with pytest.raises(ValueError):
        sphere_eigenvalue(3, -1)
