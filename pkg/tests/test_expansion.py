from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from desitter_kg.errors import OrderClash
from desitter_kg.expansion import build_series, series_residual, truncate
from desitter_kg.models import MetricModel
from desitter_kg.spectral import compute_spectral

P316 = compute_spectral(2, Fraction(3, 16))


def test_exact_second_coefficient_product_model():
    s = build_series({}, {1: 1}, P316, MetricModel.product(2), N=4, exact=True)
    a2 = s.coefficient("minus", 2, 0, 1)
    assert isinstance(a2, sp.Basic)
    assert a2 == sp.Rational(-1, 3)
    assert s.coefficient("minus", 1, 0, 1) == 0


def test_residual_slope_reaches_order():
    model = MetricModel.product(2)
    s = build_series({1: 1.0}, {1: 1.0}, P316, model, N=4)
    fit = series_residual(s, model)
    assert fit.status == "fit"
    assert fit.slope >= 0.25 + 5 - 0.1
    assert fit.passed


@pytest.mark.parametrize("model", [MetricModel.product(2), MetricModel.warped(0.2)])
def test_dropping_an_order_costs_slope(model):
    s = build_series({2: 1.0}, {2: 1.0}, P316, model, N=4)
    full = series_residual(s, model).slope
    short = series_residual(truncate(s, 3), model).slope
    assert full - short > 0.8


def test_constant_solution_reported_exact():
    p = compute_spectral(2, 0)
    s = build_series({}, {0: 1.0}, p, MetricModel.exact(2), N=3)
    assert s.coefficient("minus", 0, 0, 0) == 1
    fit = series_residual(s)
    assert fit.status == "exact" and fit.passed


def test_threshold_series_carries_logs():
    p = compute_spectral(2, Fraction(1, 4))
    s = build_series({0: 1.0, 1: 0.5}, {0: 1.0, 1: 2.0}, p, MetricModel.exact(2), N=4)
    assert s.max_log_power() >= 1
    assert series_residual(s).passed


def test_even_operator_leaves_odd_resonance_unobstructed():
    # gap 1 on the circle: the operator is even in x, so the j = 1 resonance needs no log
    p = compute_spectral(2, 0)
    s = build_series({}, {1: 1.0}, p, MetricModel.exact(2), N=4)
    assert s.max_log_power() == 0
    assert s.coefficient("minus", 1, 0, 1) == 0
    assert series_residual(s).passed


def test_zero_data_gives_zero_series():
    s = build_series({3: 0.0}, {3: 0.0}, P316, N=3)
    assert all(v == 0 for *_, v in s.terms())
    x = np.geomspace(1e-3, 0.5, 7)
    assert np.all(s.evaluate_mode(x, 3) == 0)


def test_rejects_mismatched_dimension():
    with pytest.raises(ValueError):
        build_series({0: 1.0}, None, P316, MetricModel.exact(3))


def test_exact_mode_needs_rational_roots():
    p = compute_spectral(2, Fraction(1, 8))
    with pytest.raises((OrderClash, ValueError, TypeError)):
        build_series({0: 1}, {}, p, N=2, exact=True)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_series_linear_in_data(a, b, c, d):
    model = MetricModel.warped(0.1)
    x = np.geomspace(1e-2, 0.3, 5)
    u1 = build_series({1: a}, {1: b}, P316, model, N=3).evaluate_mode(x, 1)
    u2 = build_series({1: c}, {1: d}, P316, model, N=3).evaluate_mode(x, 1)
    u12 = build_series({1: a + c}, {1: b + d}, P316, model, N=3).evaluate_mode(x, 1)
    assert np.allclose(u12, u1 + u2, rtol=1e-10, atol=1e-12)
