from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from desitter_kg.errors import GridTooCoarse, QuadratureDivergence
from desitter_kg.psigma import (
    BallField,
    apply_psigma,
    bump,
    check_intertwining,
    check_weighted_intertwining,
    conjugation_order,
    null_vector_residual,
    quadratic_form,
    quadratic_form_energy,
    radial_derivatives,
)
from desitter_kg.spectral import compute_spectral


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("lam", [Fraction(0), Fraction(3, 16)])
def test_null_vector(n, lam):
    assert null_vector_residual(compute_spectral(n, lam), 1024) < 1e-8


def test_null_vector_large_exponent():
    assert null_vector_residual(compute_spectral(2, -2), 1024) < 1e-8


def test_constant_killed_at_zero_exponent():
    # s_hat_plus = 0 for n = 3, lam = 0: constants are annihilated exactly
    p = compute_spectral(3, 0)
    f = BallField.from_function(lambda r: np.ones_like(r), 128, n=3)
    assert np.max(np.abs(apply_psigma(0, f, p).values)) == 0


def test_conjugation_fourth_order():
    p = compute_spectral(2, Fraction(3, 16))
    f, _ = bump(0.45, 0.3)
    res, orders = conjugation_order(0.7, -1.3, f, p)
    assert min(orders) >= 3.5
    assert res[-1] < res[0]


def test_polynomial_intertwining_exact():
    assert check_intertwining(sp.Rational(3, 7), 4, n=3, lam=0) == 0
    assert check_intertwining(sp.Rational(5, 2), 4, n=2, lam=sp.Rational(3, 16)) == 0
    assert check_weighted_intertwining(None, 4, n=3, lam=sp.Rational(3, 16)) == 0
    assert check_intertwining(0.37, 4, n=3, lam=0.2, exact=False) < 1e-10


@pytest.mark.parametrize("n, mode", [(2, 0), (3, 0), (4, 1)])
def test_quadratic_form_matches_energy(n, mode):
    p = compute_spectral(n, Fraction(3, 16))
    sigma = float(p.s_hat_plus.real) + 0.6
    f, df = bump(0.5, 0.3)
    field = BallField.from_function(f, 2048, n=n, mode=mode)
    got = quadratic_form(sigma, field, p)
    ref = quadratic_form_energy(sigma, f, df, (0.2, 0.8), p, mode)
    assert got == pytest.approx(ref, rel=1e-7)
    assert got > 0


def test_rim_divergence_detected():
    p = compute_spectral(2, 0)
    field = BallField.from_function(lambda r: np.ones_like(r), 256)
    with pytest.raises(QuadratureDivergence):
        quadratic_form(1.2, field, p)


def test_coarse_grid_rejected():
    p = compute_spectral(2, 0)
    with pytest.raises(GridTooCoarse):
        apply_psigma(0.3, BallField.from_function(np.cos, 16), p)


def test_tanh_grid_derivatives():
    f = BallField.from_function(lambda r: np.cos(2 * r), 1024, grid="tanh", r_max=0.95)
    d1, d2 = radial_derivatives(f)
    r = f.r
    assert np.max(np.abs(d1 + 2 * np.sin(2 * r))) < 1e-6
    assert np.max(np.abs(d2 + 4 * np.cos(2 * r))) < 1e-5


def test_odd_sector_parity():
    f = BallField.from_function(lambda r: r**3, 512, mode=1)
    d1, d2 = radial_derivatives(f)
    assert np.max(np.abs(d1 - 3 * f.r**2)) < 1e-9
    assert np.max(np.abs(d2 - 6 * f.r)) < 1e-8


def test_field_validation():
    with pytest.raises(ValueError):
        BallField(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        BallField(np.linspace(0, 1, 4), np.zeros(4), grid="chebyshev")
