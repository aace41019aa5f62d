from __future__ import annotations

import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from desitter_kg.errors import NonConvergence
from desitter_kg.geometry import (
    PhasePoint,
    angular_shift_reference,
    circle_points,
    classical_scattering_map,
    hamilton_field,
    integrate_bicharacteristic,
    reverse_scattering_map,
)
from desitter_kg.models import MetricModel

EXACT = MetricModel.exact(2)


def wrap(a):
    return np.angle(np.exp(1j * np.asarray(a)))


def test_boundary_field_moves_inward_at_speed_two():
    pt = PhasePoint.on_circle(0.0, 0.3, 1.0, 1.0)
    w = hamilton_field(pt, EXACT)
    assert w.dx == 2.0
    assert np.linalg.norm(w.dy) == pytest.approx(2.0)


def test_field_odd_under_covector_negation():
    pt = PhasePoint.on_circle(0.2, 0.3, 1.3, 0.7)
    neg = PhasePoint(pt.x, pt.y, -pt.xi, -pt.eta)
    a, b = hamilton_field(pt, EXACT), hamilton_field(neg, EXACT)
    assert a.dx == -b.dx
    assert np.allclose(a.dy, -b.dy)


def test_xi_zero_at_boundary_rejected():
    with pytest.raises(ValueError):
        hamilton_field(PhasePoint.on_circle(0.0, 0.0, 0.0, 1.0), EXACT)


def test_antipodal_map_sixteen_points_fast():
    th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    y, eta = circle_points(th)
    t0 = time.perf_counter()
    out = classical_scattering_map((y, eta), EXACT)
    assert time.perf_counter() - t0 < 1.0
    assert np.max(np.abs(np.abs(wrap(out.theta - th)) - math.pi)) < 1e-6
    assert np.max(np.abs(out.y + y)) < 1e-6
    assert out.side == -1 and out.sign_xi == -1


def test_trajectory_stays_on_characteristic_set():
    traj = integrate_bicharacteristic(PhasePoint.on_circle(0.0, 1.0, 1.0, 1.0), EXACT)
    assert traj.max_residual() < 1e-8
    assert abs(abs(wrap(traj.end.theta - 1.0)) - math.pi) < 1e-6


def test_reverse_map_returns_start():
    th = np.array([0.1, 1.7, 4.0])
    y, eta = circle_points(th)
    back = reverse_scattering_map(classical_scattering_map((y, eta), EXACT), EXACT)
    assert np.max(np.abs(back.y - y)) < 1e-8
    assert np.max(np.abs(back.eta_hat - eta)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_rotation_equivariance(theta, phi):
    y, eta = circle_points([theta, theta + phi])
    out = classical_scattering_map((y, eta), EXACT)
    assert abs(wrap(out.theta[1] - out.theta[0] - phi)) < 1e-8


def test_higher_dimension_antipodal():
    rng = np.random.default_rng(3)
    y = rng.normal(size=(6, 3))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    out = classical_scattering_map((y, rng.normal(size=(6, 3))), MetricModel.exact(3))
    assert np.max(np.abs(out.y + y)) < 1e-8


def test_rotation_commutes_in_three_dimensions():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    y = rng.normal(size=(4, 3))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    eta = rng.normal(size=(4, 3))
    model = MetricModel.exact(3)
    a = classical_scattering_map((y @ q.T, eta @ q.T), model)
    b = classical_scattering_map((y, eta), model)
    assert np.max(np.abs(a.y - b.y @ q.T)) < 1e-8
    assert np.max(np.abs(a.eta_hat - b.eta_hat @ q.T)) < 1e-8


def test_warped_shift_matches_quadrature():
    model = MetricModel.warped(0.1)
    ref = angular_shift_reference(model)
    assert ref < math.pi
    y, eta = circle_points([0.3])
    out = classical_scattering_map((y, eta), model)
    # the angle decreases when the angular covector component is positive
    assert abs(wrap(out.theta[0] - 0.3) + ref) < 1e-7


def test_trajectory_csv(tmp_path):
    traj = integrate_bicharacteristic(PhasePoint.on_circle(0.0, 0.0, 1.0, 1.0), EXACT)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    head = path.read_text().splitlines()[0].split(",")
    assert head[:4] == ["param", "chart", "tau", "x"] and head[-1] == "p_residual"


def test_step_budget_exhaustion_reported():
    from desitter_kg.geometry import integrate_projected

    rhs = lambda t, y, d: d * np.stack([y[:, 1], -y[:, 0]], axis=1)
    y0 = np.array([[1.0, 0.0]])
    with pytest.raises(NonConvergence):
        integrate_projected(rhs, 0.0, 100.0, y0, lambda t, y: y, max_steps=3)
    out = integrate_projected(rhs, 0.0, np.pi, y0, lambda t, y: y)
    assert np.allclose(out, [[-1.0, 0.0]], atol=1e-8)
