from __future__ import annotations

import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from desitter_kg.scattering import (
    assemble_scattering,
    connection_matrix,
    renormalize,
    reverse_connection_matrix,
)
from desitter_kg.spectral import compute_spectral

P0 = compute_spectral(2, 0)
P316 = compute_spectral(2, Fraction(3, 16))


def test_mode_zero_oracle():
    # u = arctan t has boundary data (-1, pi/2) in the past and (1, pi/2) in the future
    c = connection_matrix(0, P0)
    assert np.max(np.abs(c.matrix - np.array([[-1, 0], [math.pi, 1]]))) < 1e-8
    assert c.experimental


def test_tolerance_converged():
    a = connection_matrix(0, P316).matrix
    b = connection_matrix(0, P316, rtol=1e-14 * 2.5).matrix
    assert np.max(np.abs(a - b)) < 1e-8


@pytest.mark.parametrize("k", [0, 1, 5, 12])
def test_blocks_invertible_and_real(k):
    c = connection_matrix(k, P316)
    assert abs(c.det) > 1e-6
    assert np.max(np.abs(c.matrix.imag)) == 0
    assert not c.experimental


@pytest.mark.parametrize("k", [0, 3, 9])
def test_reverse_composition_is_identity(k):
    fwd = connection_matrix(k, P316).matrix
    back = reverse_connection_matrix(k, P316)
    assert np.max(np.abs(back @ fwd - np.eye(2))) < 1e-8


def test_renormalization_trivial_at_zero():
    s = assemble_scattering(2, P316)
    assert np.allclose(s.renormalized[0], s.blocks[0].matrix, atol=0, rtol=0)


def test_off_diagonal_growth_rate():
    ks = np.array([4, 8, 16, 32])
    s12 = [abs(connection_matrix(int(k), P316).matrix[0, 1]) for k in ks]
    slope = np.polyfit(np.log(ks), np.log(s12), 1)[0]
    assert slope == pytest.approx(P316.gap.real, abs=0.05)


def test_renormalized_blocks_bounded():
    s = assemble_scattering(32, P316)
    norms = [np.linalg.norm(s.renormalized[k], 2) for k in range(1, 33)]
    assert max(norms) / min(norms) < 10
    for k in (1, 16, 32):
        r = s.renormalized[k]
        assert np.linalg.norm(r, 2) * np.linalg.norm(np.linalg.inv(r), 2) < 10


def test_conditioning_modest():
    assert max(connection_matrix(k, P316).condition for k in range(0, 33, 4)) < 1e3


def test_complex_roots_regime():
    c = connection_matrix(3, compute_spectral(2, 1))
    assert np.all(np.isfinite(c.matrix))
    assert abs(c.det) > 1e-6


def test_literal_normalization_differs():
    block = connection_matrix(4, P316).matrix
    sym = renormalize(block, 16.0, P316)
    lit = renormalize(block, 16.0, P316, literal=True)
    assert not np.allclose(sym, lit)


def test_csv_layout(tmp_path):
    s = assemble_scattering(8, P316)
    path = tmp_path / "s.csv"
    s.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert len(rows) == 10
    assert rows[0][0] == "k" and "cond" in rows[0]
    assert [int(r[0]) for r in rows[1:]] == list(range(9))
