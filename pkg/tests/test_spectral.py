from __future__ import annotations

import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from desitter_kg.spectral import (
    Regime,
    WeightRegime,
    compute_spectral,
    indicial_derivative,
    indicial_polynomial,
    is_elliptic,
    symbol_ratio,
    weight_regime,
)


def test_lambda_zero_circle():
    p = compute_spectral(2, 0)
    assert (p.s_plus, p.s_minus, p.l_lambda) == (1, 0, 0.5)
    assert p.regime is Regime.INTEGER_GAP


def test_threshold_double_root():
    p = compute_spectral(2, Fraction(1, 4))
    assert p.s_plus == p.s_minus == 0.5
    assert p.regime is Regime.THRESHOLD
    assert indicial_derivative(0.5, p) == 0


def test_noninteger_gap():
    p = compute_spectral(2, "3/16")
    assert p.s_plus == pytest.approx(0.75) and p.s_minus == pytest.approx(0.25)
    assert p.gap == pytest.approx(0.5)
    assert p.regime is Regime.NON_INTEGER_GAP


def test_shifted_roots_n4():
    p = compute_spectral(4, 0)
    assert (p.s_plus, p.s_minus, p.s_hat_plus, p.s_hat_minus) == (3, 0, 0, -3)
    assert p.regime is Regime.INTEGER_GAP


def test_complex_roots_carry_imaginary_part():
    p = compute_spectral(2, 1)
    assert p.regime is Regime.COMPLEX_ROOTS
    assert p.s_plus.real == pytest.approx(0.5)
    assert p.s_plus.imag == pytest.approx(math.sqrt(0.75))
    assert p.l_lambda == 0.0


def test_rejects_small_dimension():
    with pytest.raises(ValueError):
        compute_spectral(1, 0)


def test_float_noise_does_not_break_integer_gap():
    assert compute_spectral(2, 1e-15).regime is Regime.INTEGER_GAP


def test_indicial_polynomial_examples():
    p = compute_spectral(2, Fraction(3, 16))
    assert indicial_polynomial(Fraction(9, 4), p) == -3
    assert abs(indicial_polynomial(p.s_plus, p)) < 1e-15
    assert abs(indicial_polynomial(p.s_minus, p)) < 1e-15


def test_weight_regime_examples():
    p = compute_spectral(2, 0)
    assert weight_regime(3, p) is WeightRegime.ALL_POSITIVE
    assert weight_regime(-1, p) is WeightRegime.ALL_NEGATIVE
    assert weight_regime(2, p) is WeightRegime.DEGENERATE


def test_symbol_ratio_examples():
    assert symbol_ratio(compute_spectral(2, Fraction(3, 16))) == pytest.approx(1j)
    assert symbol_ratio(compute_spectral(4, 0)) == pytest.approx(-1)
    assert not is_elliptic(compute_spectral(3, 0))


def test_json_flat_fields():
    doc = json.loads(compute_spectral(2, 0).to_json())
    assert set(doc) == {"n", "lambda", "s_plus", "s_minus", "s_hat_plus", "s_hat_minus", "l_lambda", "regime"}
    assert doc["regime"] == "IntegerGap"


dims = st.integers(min_value=2, max_value=9)
lams = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


@settings(max_examples=10_000, deadline=None)
@given(dims, lams)
def test_vieta_relations(n, lam):
    p = compute_spectral(n, lam)
    scale = max(1.0, abs(lam), (n - 1) ** 2)
    assert abs(p.s_plus + p.s_minus - (n - 1)) <= 1e-12 * scale
    assert abs(p.s_plus * p.s_minus - lam) <= 1e-12 * scale
    assert p.s_hat_plus == p.s_plus - (n - 1)


@settings(max_examples=500, deadline=None)
@given(dims, lams, lams)
def test_l_lambda_monotone(n, a, b):
    lo, hi = sorted((a, b))
    assert compute_spectral(n, lo).l_lambda >= compute_spectral(n, hi).l_lambda
    if lo >= (n - 1) ** 2 / 4:
        assert compute_spectral(n, lo).l_lambda == 0


@settings(max_examples=500, deadline=None)
@given(dims, lams, st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_weight_regimes_disjoint(n, lam, r):
    p = compute_spectral(n, lam)
    l = p.l_lambda
    positive = r > max(0.0, 1 - 2 * l) and abs(r - (1 + 2 * l)) > 1e-12
    negative = r < min(0.0, 1 - 2 * l)
    assert not (positive and negative)
    got = weight_regime(r, p)
    assert (got is WeightRegime.ALL_POSITIVE) == positive
    assert (got is WeightRegime.ALL_NEGATIVE) == negative


@settings(max_examples=500, deadline=None)
@given(dims, lams)
def test_symbol_ratio_unimodular_below_threshold(n, lam):
    p = compute_spectral(n, lam)
    if lam <= (n - 1) ** 2 / 4:
        assert abs(abs(symbol_ratio(p)) - 1) < 1e-12


@settings(max_examples=300, deadline=None)
@given(dims, st.fractions(min_value=-20, max_value=20, max_denominator=64))
def test_regime_partition_exact(n, lam):
    p = compute_spectral(n, lam)
    thr = Fraction((n - 1) ** 2, 4)
    assert (p.regime is Regime.THRESHOLD) == (lam == thr)
    assert (p.regime is Regime.COMPLEX_ROOTS) == (lam > thr)
    if p.regime is Regime.INTEGER_GAP:
        assert p.integer_gap >= 1
