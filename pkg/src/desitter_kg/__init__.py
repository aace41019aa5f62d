"""Klein-Gordon asymptotics and scattering on asymptotically de Sitter spaces."""

from __future__ import annotations

from .evolution import MeshSpec, GridField, evolve_cauchy, fit_asymptotics, scattering_via_cauchy
from .expansion import PowerLogSeries, build_series, series_residual
from .geometry import classical_scattering_map, integrate_bicharacteristic
from .models import Family, MetricModel
from .poisson import KernelSpec, apply_poisson, pairing_constant
from .psigma import BallField, apply_psigma, quadratic_form
from .scattering import ModeConnection, ScatteringMatrix, assemble_scattering, connection_matrix
from .spectral import (
    Regime,
    SpectralParams,
    WeightRegime,
    compute_spectral,
    indicial_polynomial,
    symbol_ratio,
    weight_regime,
)

__version__ = "0.1.0"

__all__ = [
    "BallField",
    "Family",
    "GridField",
    "KernelSpec",
    "MeshSpec",
    "MetricModel",
    "ModeConnection",
    "PowerLogSeries",
    "Regime",
    "ScatteringMatrix",
    "SpectralParams",
    "WeightRegime",
    "apply_poisson",
    "apply_psigma",
    "assemble_scattering",
    "build_series",
    "classical_scattering_map",
    "compute_spectral",
    "connection_matrix",
    "evolve_cauchy",
    "fit_asymptotics",
    "indicial_polynomial",
    "integrate_bicharacteristic",
    "pairing_constant",
    "quadratic_form",
    "scattering_via_cauchy",
    "series_residual",
    "symbol_ratio",
    "weight_regime",
]
