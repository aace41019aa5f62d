"""Per-mode scattering matrix of exact de Sitter space.

In global time ``t`` (or ``rho = asinh t``) the metric is
``dt^2/(1+t^2) - (1+t^2) h_round``.  On a boundary eigenmode ``Delta_Y = mu``
the equation ``(Box - lam) u = 0`` separates into

    (1+t^2)^{-(n-2)/2} d/dt[(1+t^2)^{n/2} f'] + (mu/(1+t^2) + lam) f = 0,
    f'' + (n-1) tanh(rho) f' + (mu sech^2(rho) + lam) f = 0,

and ``f ~ t^{-s}`` at large ``|t|`` exactly when ``s(n-1-s) = lam``.

Asymptotic frames ``F_+ ~ x^{s_+}`` and ``F_- ~ x^{s_-}`` (``x = 1/|sinh rho|``)
are taken from the Frobenius series at a point where the truncated series
is accurate, then continued to ``rho = 0`` by a high-order Runge-Kutta
method.  Matching Cauchy data at ``rho = 0`` gives ``S = M_-^{-1} M_+``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import FrameFitFailure
from .expansion import PowerLogSeries, build_series
from .models import MetricModel, sphere_eigenvalue
from .spectral import Regime, SpectralParams

FRAME_ORDER = 40
FRAME_TOL = 1e-10
X_CANDIDATES = tuple(0.5 * 0.8**i for i in range(30))


@dataclass(frozen=True)
class ModeEquation:
    """Separated equation on mode ``mode`` in the time coordinate ``t``.

    ``flux(t) f'`` is differentiated, then ``weight``-normalized:
    ``weight(t)^{-1} d/dt[flux(t) f'] + potential(t) f = 0``.
    """

    n: int
    mode: int
    mu: float
    lam: complex

    def weight(self, t):
        return (1 + np.asarray(t) ** 2) ** ((self.n - 2) / 2)

    def flux(self, t):
        return (1 + np.asarray(t) ** 2) ** (self.n / 2)

    def potential(self, t):
        return self.mu / (1 + np.asarray(t) ** 2) + self.lam

    def residual(self, f, df, d2f, t):
        """Residual of the equation for supplied ``f, f', f''`` at ``t``."""
        t = np.asarray(t, dtype=float)
        dflux = self.n * t * (1 + t**2) ** (self.n / 2 - 1)
        return (dflux * df + self.flux(t) * d2f) / self.weight(t) + self.potential(t) * f

    def rho_rhs(self, rho, state):
        """First-order system for ``(f, df/drho)``."""
        f, g = state
        return [g, -(self.n - 1) * math.tanh(rho) * g - (self.mu / math.cosh(rho) ** 2 + self.lam) * f]


def mode_equation(k: int, params: SpectralParams, model: MetricModel | None = None) -> ModeEquation:
    """Separated time equation of mode ``k`` on exact de Sitter space."""
    model = model or MetricModel.exact(params.n)
    if model.family.value != "ExactDeSitter":
        raise ValueError("separation in global time is implemented for exact de Sitter only")
    return ModeEquation(params.n, k, float(sphere_eigenvalue(params.n, k)), complex(params.lam))


@dataclass(frozen=True)
class ModeConnection:
    """``2 x 2`` map from ``(g_+, g_-)`` at ``Y_+`` to ``(v_+, v_-)`` at ``Y_-``."""

    mode: int
    matrix: np.ndarray
    condition: float
    x_match: float
    frame_error: float
    experimental: bool = False

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))


@lru_cache(maxsize=512)
def _frames(params: SpectralParams, mode: int, order: int) -> tuple[PowerLogSeries, PowerLogSeries]:
    model = MetricModel.exact(params.n)
    fp = build_series({mode: 1.0}, {}, params, model, N=order)
    fm = build_series({}, {mode: 1.0}, params, model, N=order)
    return fp, fm


def _frame_accuracy(series: PowerLogSeries, mode: int, x: float) -> tuple[float, float]:
    """(tail estimate, cancellation ratio) of the truncated series at ``x``."""
    L = math.log(x)
    terms = []
    for branch in ("plus", "minus"):
        s0 = complex(series.exponent(branch))
        for j, row in enumerate(series.coeffs[mode][branch]):
            val = sum(complex(c) * L**kk for kk, c in enumerate(row))
            terms.append((j, abs(val) * abs(x ** (s0 + j))))
    total = abs(complex(series.evaluate_mode(np.array([x]), mode)[0]))
    if total == 0:
        return math.inf, math.inf
    tail = sum(v for j, v in terms if j >= series.N - 1)
    absolute = sum(v for _, v in terms)
    return tail / total, absolute / total


def choose_matching_point(params: SpectralParams, mode: int, order: int = FRAME_ORDER,
                          tol: float = FRAME_TOL) -> tuple[float, float]:
    """Largest candidate ``x`` at which both frames are accurate to ``tol``.

    Returns ``(x, error estimate)``.  Raises :class:`FrameFitFailure` if none is.
    """
    fp, fm = _frames(params, mode, order)
    for x in X_CANDIDATES:
        errs = [_frame_accuracy(s, mode, x) for s in (fp, fm)]
        tail = max(e[0] for e in errs)
        cancel = max(e[1] for e in errs)
        if tail < tol and cancel < 1e3:
            return x, tail
    raise FrameFitFailure(f"no matching point found for mode {mode} with tolerance {tol}")


def _frame_cauchy(series: PowerLogSeries, mode: int, x: float, side: int) -> np.ndarray:
    """``(f, df/drho)`` of a frame at bdf ``x`` on the given side."""
    xa = np.array([x])
    f = complex(series.evaluate_mode(xa, mode)[0])
    dfdx = complex(series.evaluate_mode(xa, mode, derivative=1)[0])
    dx_drho = -side * x * math.sqrt(1 + x * x)
    return np.array([f, dfdx * dx_drho])


def _propagate(eq: ModeEquation, rho0: float, rho1: float, data: np.ndarray, rtol: float) -> np.ndarray:
    sol = solve_ivp(eq.rho_rhs, (rho0, rho1), data.astype(complex), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-4 * max(1.0, float(np.max(np.abs(data)))))
    if not sol.success:
        raise FrameFitFailure(f"integration failed: {sol.message}")
    return sol.y[:, -1]


def _matching_matrix(eq, params, mode, x0, side, rho_target, rtol, order):
    fp, fm = _frames(params, mode, order)
    rho0 = side * math.asinh(1.0 / x0)
    cols = [_propagate(eq, rho0, rho_target, _frame_cauchy(s, mode, x0, side), rtol) for s in (fp, fm)]
    return np.column_stack(cols)


def _frame_matrix(params, mode, x0, side, order):
    fp, fm = _frames(params, mode, order)
    return np.column_stack([_frame_cauchy(s, mode, x0, side) for s in (fp, fm)])


def _normalized_cond(M: np.ndarray) -> float:
    Mn = M / np.linalg.norm(M, axis=0, keepdims=True)
    return float(np.linalg.cond(Mn))


def connection_matrix(k: int, params: SpectralParams, rtol: float = 1e-12, order: int = FRAME_ORDER,
                      frame_tol: float = FRAME_TOL) -> ModeConnection:
    """Scattering block of mode ``k``: ``(g_+, g_-) -> (v_+|_{Y_-}, v_-|_{Y_-})``.

    Real roots give a real matrix.  The integer-gap regime is computed with
    the log frames of the series module and flagged ``experimental``.
    """
    eq = mode_equation(k, params)
    x0, err = choose_matching_point(params, k, order, frame_tol)
    Mp = _matching_matrix(eq, params, k, x0, +1, 0.0, rtol, order)
    Mm = _matching_matrix(eq, params, k, x0, -1, 0.0, rtol, order)
    S = np.linalg.solve(Mm, Mp)
    if params.real_roots:
        S = S.real.astype(complex)
    cond = max(_normalized_cond(Mp), _normalized_cond(Mm))
    return ModeConnection(k, S, cond, x0, err, experimental=params.regime is Regime.INTEGER_GAP)


def reverse_connection_matrix(k: int, params: SpectralParams, rtol: float = 1e-12,
                              order: int = FRAME_ORDER) -> np.ndarray:
    """``Y_- -> Y_+`` block by integrating the ``Y_-`` frames all the way across.

    The matching is done at the ``Y_+`` matching point instead of ``rho = 0``.
    """
    eq = mode_equation(k, params)
    x0, _ = choose_matching_point(params, k, order)
    rho_plus = math.asinh(1.0 / x0)
    Mm_across = _matching_matrix(eq, params, k, x0, -1, rho_plus, rtol, order)
    Fp = _frame_matrix(params, k, x0, +1, order)
    R = np.linalg.solve(Fp, Mm_across)
    if params.real_roots:
        R = R.real.astype(complex)
    return R


def renormalization_weights(mu: float, params: SpectralParams, literal: bool = False):
    """Left and right diagonal factors of the renormalized block.

    Uses ``mu_eff = max(mu, 1)``.  The symmetric convention raises
    ``mu_eff`` to ``-s_pm/2 + n/4`` on the left and ``s_pm/2 - n/4`` on the
    right; ``literal=True`` uses ``-s_- + n/4`` for the second left entry.
    """
    m = max(float(mu), 1.0)
    n = params.n
    sp_, sm_ = params.s_plus, params.s_minus
    left = np.array([m ** (-sp_ / 2 + n / 4), m ** ((-sm_ if literal else -sm_ / 2) + n / 4)])
    right = np.array([m ** (sp_ / 2 - n / 4), m ** (sm_ / 2 - n / 4)])
    return left, right


def renormalize(block: np.ndarray, mu: float, params: SpectralParams, literal: bool = False) -> np.ndarray:
    left, right = renormalization_weights(mu, params, literal)
    return left[:, None] * block * right[None, :]


@dataclass
class ScatteringMatrix:
    """Mode-diagonal scattering matrix with raw and renormalized blocks."""

    params: SpectralParams
    blocks: dict = field(default_factory=dict)
    renormalized: dict = field(default_factory=dict)
    renormalized_literal: dict = field(default_factory=dict)

    @property
    def modes(self) -> list[int]:
        return sorted(self.blocks)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["k"]
            for tag in ("m", "r", "rl"):
                for ij in ("11", "12", "21", "22"):
                    head += [f"{tag}{ij}_re", f"{tag}{ij}_im"]
            w.writerow(head + ["cond", "x_match"])
            for k in self.modes:
                row = [k]
                for mat in (self.blocks[k].matrix, self.renormalized[k], self.renormalized_literal[k]):
                    for z in mat.ravel():
                        row += [repr(float(z.real)), repr(float(z.imag))]
                row += [repr(self.blocks[k].condition), repr(self.blocks[k].x_match)]
                w.writerow(row)


def assemble_scattering(k_max: int, params: SpectralParams, rtol: float = 1e-12) -> ScatteringMatrix:
    """Blocks for modes ``0..k_max`` (circle modes ``k`` and ``-k`` coincide)."""
    out = ScatteringMatrix(params)
    for k in range(k_max + 1):
        conn = connection_matrix(k, params, rtol)
        mu = sphere_eigenvalue(params.n, k)
        out.blocks[k] = conn
        out.renormalized[k] = renormalize(conn.matrix, mu, params)
        out.renormalized_literal[k] = renormalize(conn.matrix, mu, params, literal=True)
    return out
