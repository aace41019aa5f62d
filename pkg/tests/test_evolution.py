from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from desitter_kg.errors import BlowUp, CFLViolation, RankDeficient
from desitter_kg.evolution import (
    CFL_LIMIT,
    MeshSpec,
    decay_uniqueness_probe,
    evolve_cauchy,
    evolve_from_boundary,
    fit_asymptotics,
    mode_leakage,
    scattering_via_cauchy,
)
from desitter_kg.models import MetricModel
from desitter_kg.spectral import compute_spectral

DS = MetricModel.exact(2)
P0 = compute_spectral(2, 0)
P316 = compute_spectral(2, Fraction(3, 16))


def arctan_field(n_theta=256):
    # u = arctan(sinh rho) solves the mode-0 equation with lam = 0
    return evolve_cauchy(0.0, 1.0, 0.0, DS, P0, MeshSpec(n_theta))


def test_constants_are_stationary():
    fld = evolve_cauchy(1.0, 0.0, 0.3, DS, P0, MeshSpec(64))
    assert np.max(np.abs(fld.u - 1)) < 1e-13


def test_arctan_oracle_converges():
    errs = []
    for m in (128, 256):
        fld = arctan_field(m)
        errs.append(np.max(np.abs(fld.u - np.arctan(np.sinh(fld.rho))[:, None])))
    assert errs[1] < 1e-9
    assert errs[0] / errs[1] >= 4


def test_arctan_boundary_data():
    fit = fit_asymptotics(arctan_field(), 1, P0, modes=[0])
    assert abs(fit[0].g_plus + 1) < 1e-4
    assert abs(fit[0].g_minus - math.pi / 2) < 1e-4
    past = fit_asymptotics(arctan_field(), -1, P0, modes=[0])
    assert abs(past[0].g_plus - 1) < 1e-4
    assert abs(past[0].g_minus + math.pi / 2) < 1e-4


def test_rotation_invariant_metric_keeps_modes_apart():
    fld = evolve_cauchy(lambda th: np.cos(2 * th), lambda th: np.sin(3 * th), 0.0,
                        MetricModel.warped(0.1), P316, MeshSpec(128))
    assert mode_leakage(fld, [2, 3]) < 1e-6


def test_free_exponents_stable_over_random_data():
    rng = np.random.default_rng(7)
    e1, e2 = [], []
    for _ in range(10):
        a, b = rng.normal(size=3), rng.normal(size=3)
        psi0 = lambda th, a=a: a[0] + a[1] * np.cos(th) + a[2] * np.sin(2 * th)
        psi1 = lambda th, b=b: b[0] + b[1] * np.sin(th) + b[2] * np.cos(2 * th)
        fit = fit_asymptotics(evolve_cauchy(psi0, psi1, 0.0, DS, P316, MeshSpec(64)), 1)
        for r in fit.reports.values():
            e1.append(r.exp_plus_fit)
            e2.append(r.exp_minus_fit)
            assert not r.log_flag
    assert np.ptp(e1) < 1e-2 and np.ptp(e2) < 1e-2
    assert np.mean(e1) == pytest.approx(0.75, abs=1e-2)
    assert np.mean(e2) == pytest.approx(0.25, abs=1e-2)


def test_boundary_to_boundary_mode_zero():
    mesh = MeshSpec(64)
    a = scattering_via_cauchy({}, {0: 1.0}, P0, mesh=mesh)[0]
    assert abs(a[0]) < 1e-3 and abs(a[1] - 1) < 1e-3
    b = scattering_via_cauchy({0: 1.0}, {}, P0, mesh=mesh)[0]
    assert abs(b[0] + 1) < 1e-3 and abs(b[1] - math.pi) < 1e-3


def test_angular_warp_couples_modes():
    model = MetricModel.warped(0.1, eps_angular=0.1)
    fld = evolve_cauchy(lambda th: np.cos(th), 0.0, 0.0, model, P316, MeshSpec(128))
    assert mode_leakage(fld, [1]) > 1e-6
    fit = fit_asymptotics(fld, 1, modes=[1])
    assert fit[1].exp_plus_fit == pytest.approx(0.75, abs=2e-2)
    assert fit[1].exp_minus_fit == pytest.approx(0.25, abs=2e-2)


def test_courant_bound_enforced():
    with pytest.raises(CFLViolation):
        evolve_cauchy(1.0, 0.0, 0.0, DS, P0, MeshSpec(64, cfl=CFL_LIMIT + 0.05))


def test_growth_guard():
    with pytest.raises(BlowUp):
        evolve_cauchy(lambda th: np.cos(th), 0.0, 0.0, DS, compute_spectral(2, -30), MeshSpec(32))


def test_energy_finite():
    fld = evolve_cauchy(lambda th: np.cos(th), lambda th: np.sin(2 * th), 0.0, DS, P316, MeshSpec(64))
    e = fld.energy()
    assert np.all(np.isfinite(e))
    assert e[len(e) // 2] > 0


def test_tiny_window_rank_deficient():
    fld = arctan_field(64)
    with pytest.raises(RankDeficient):
        fit_asymptotics(fld, 1, P0, window=(1e-3, 1.0001e-3))


def test_boundary_seed_recovers_data():
    fld = evolve_from_boundary({1: 0.3}, {1: -0.7}, P316, mesh=MeshSpec(64))
    fit = fit_asymptotics(fld, 1, modes=[1], free_exponents=False)
    assert abs(fit[1].g_plus - 0.3) < 1e-6
    assert abs(fit[1].g_minus + 0.7) < 1e-6


def test_decay_probe_control_is_order_one():
    rep = decay_uniqueness_probe(P316, 2, mesh=MeshSpec(64))
    assert 0.01 < rep.control_sup < 100
    assert all(np.isfinite(rep.interior_sup))
    assert rep.interior_sup[-1] < rep.interior_sup[0]


def test_csv_export(tmp_path):
    fld = arctan_field(32)
    path = tmp_path / "u.csv"
    fld.write_csv(path, every=10)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("rho,T,u_0")
    assert len(lines) - 1 == math.ceil(len(fld.rho) / 10)
