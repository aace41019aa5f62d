from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import j0

from desitter_kg.errors import QuadratureDivergence, ZeroPairing
from desitter_kg.poisson import (
    KernelBranch,
    KernelSpec,
    apply_poisson,
    kernel_value,
    pairing_constant,
    poisson_multiplier,
    sphere_area,
)
from desitter_kg.spectral import compute_spectral


def quadrature_pairing(n, s):
    val, _ = quad(lambda r: (1 - r * r) ** s * r ** (n - 2), 0, 1, epsabs=0.0, epsrel=1e-13, limit=200)
    return sphere_area(n - 2) * val


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("s", [0.0, 0.3, 1.0, 2.5])
def test_pairing_matches_quadrature(n, s):
    assert abs(pairing_constant(s, n) - quadrature_pairing(n, s)) < 1e-12


def test_pairing_reference_values():
    assert pairing_constant(0.0, 2) == pytest.approx(2.0, abs=1e-15)
    assert pairing_constant(0.0, 3) == pytest.approx(math.pi, abs=1e-13)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_pairing_zero_raises(n):
    with pytest.raises(ZeroPairing):
        pairing_constant(-(n - 1) / 2 - 1, n)


def test_delta_branch_is_circle_average():
    spec = KernelSpec.from_exponent(-1, 3)
    assert spec.branch is KernelBranch.DELTA_DERIVATIVE
    y = np.array([[0.0, 0.0], [1.0, 2.0], [-0.4, 3.0]])
    x = 0.1
    out = apply_poisson(spec, {(1, 0): 1.0}, x, y, leading=True)
    assert np.allclose(out, j0(x) * np.exp(1j * y[:, 0]), atol=1e-12)
    with pytest.raises(ValueError):
        kernel_value(spec, x, 0.0)


def test_leading_coefficient_error_quadratic_in_x():
    spec = KernelSpec.from_params(compute_spectral(2, Fraction(3, 16)), "+")
    xs = np.array([0.1, 0.05, 0.025, 0.0125])
    err = [abs(poisson_multiplier(spec, 1.0, x) - 1) for x in xs]
    slope = np.polyfit(np.log(xs), np.log(err), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_regularization_required_below_minus_one():
    spec = KernelSpec.from_exponent(-1.5, 3)
    assert spec.branch is KernelBranch.POWER_LAW
    y = np.zeros((1, 2))
    with pytest.raises(QuadratureDivergence):
        apply_poisson(spec, {(1, 0): 1.0}, 0.1, y, regularize=False)
    out = apply_poisson(spec, {(1, 0): 1.0}, 0.01, y, leading=True)
    assert abs(out[0] - 1) < 1e-3


def test_injectivity_radius_enforced():
    spec = KernelSpec.from_exponent(0.5, 2)
    with pytest.raises(ValueError):
        apply_poisson(spec, {1: 1.0}, 4.0, [0.0])


def test_power_law_matches_direct_quadrature():
    spec = KernelSpec.from_exponent(0.5, 2)
    x, y0 = 0.3, 0.7
    direct, _ = quad(lambda d: (kernel_value(spec, x, d)[0] * np.cos(y0 - d)).real, -x, x, epsabs=1e-14)
    out = apply_poisson(spec, {1: 0.5, -1: 0.5}, x, [y0])
    assert out[0].real == pytest.approx(direct, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.integers(-4, 4))
def test_translation_equivariance(shift, k):
    spec = KernelSpec.from_exponent(0.25, 2)
    y = np.linspace(0, 2 * np.pi, 9)
    g = {k: 1.0}
    g_shift = {k: np.exp(-1j * k * shift)}
    a = apply_poisson(spec, g, 0.2, y - shift)
    b = apply_poisson(spec, g_shift, 0.2, y)
    assert np.allclose(a, b, atol=1e-12)
