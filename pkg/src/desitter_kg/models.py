"""Warped-product metric models near the conformal boundary.

Every shipped model has the form

    g = (a(x) dx^2 - b(x) h_round) / x^2,     a(0) = b(0) = 1,

near each boundary component, with ``h_round`` the round metric on the
sphere ``S^{n-1}``.  Globally the de Sitter based models are written in
conformal time ``tau`` in ``(-pi/2, pi/2)``,

    g = sec^2(tau) (d tau^2 - beta(tau, y) h_round),

with boundary defining function ``x = cot |tau|`` on either end.  The
proper-time coordinate ``rho = asinh(t)`` satisfies ``tau = gd(rho)`` and
``T = tanh(rho) = t / sqrt(1 + t^2)``.

Families
--------
ExactDeSitter
    ``a = 1/(1+x^2)``, ``b = 1+x^2``, ``beta = 1``.  With ``x = 1/|t|``
    this is ``dt^2/(1+t^2) - (1+t^2) h_round``.
WarpedPerturbation
    ``beta = (1 + eps cos tau)(1 + eps_angular sin(theta) cos^2 tau)``.
    The warp factor ``1 + eps cos tau`` equals ``1 + eps x + O(x^2)`` near
    either end, so ``b = (1 + x^2)(1 + eps x / sqrt(1 + x^2))``.  The angular
    factor breaks rotation symmetry and is only used by the PDE solver.
Product
    ``a = b = 1``: the exact normal form ``-(x dx)^2 + (n-1) x dx - x^2 Delta - lam``.
    It has no global extension and is used by the series code only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
import sympy as sp

X = sp.Symbol("x", positive=True)


class Family(str, Enum):
    EXACT_DE_SITTER = "ExactDeSitter"
    WARPED_PERTURBATION = "WarpedPerturbation"
    PRODUCT = "Product"


@dataclass(frozen=True)
class MetricModel:
    """Immutable description of a warped-product metric.

    Parameters
    ----------
    n : int
        Spacetime dimension.
    family : Family
    eps : float
        Warp amplitude of :attr:`Family.WARPED_PERTURBATION`.
    eps_angular : float
        Amplitude of the ``sin(theta)`` factor (``n = 2`` only, PDE only).
    """

    n: int = 2
    family: Family = Family.EXACT_DE_SITTER
    eps: float = 0.0
    eps_angular: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.family is not Family.WARPED_PERTURBATION and (self.eps or self.eps_angular):
            raise ValueError(f"{self.family.value} takes no perturbation parameters")
        if abs(self.eps) >= 1.0 or abs(self.eps_angular) >= 1.0:
            raise ValueError("perturbation amplitudes must be below 1 to keep beta positive")
        if self.eps_angular and self.n != 2:
            raise ValueError("the angular perturbation is only defined for n = 2")

    @classmethod
    def exact(cls, n: int = 2) -> "MetricModel":
        return cls(n=n, family=Family.EXACT_DE_SITTER)

    @classmethod
    def product(cls, n: int = 2) -> "MetricModel":
        return cls(n=n, family=Family.PRODUCT)

    @classmethod
    def warped(cls, eps: float, n: int = 2, eps_angular: float = 0.0) -> "MetricModel":
        return cls(n=n, family=Family.WARPED_PERTURBATION, eps=eps, eps_angular=eps_angular)

    @property
    def separable(self) -> bool:
        """True when the metric is rotation invariant (no angular factor)."""
        return self.eps_angular == 0.0

    @property
    def has_global_extension(self) -> bool:
        return self.family is not Family.PRODUCT

    # -- symbolic boundary form ------------------------------------------------
    def a_expr(self) -> sp.Expr:
        if self.family is Family.PRODUCT:
            return sp.Integer(1)
        return 1 / (1 + X**2)

    def b_expr(self) -> sp.Expr:
        if self.family is Family.PRODUCT:
            return sp.Integer(1)
        base = 1 + X**2
        if self.family is Family.WARPED_PERTURBATION and self.eps:
            eps = sp.nsimplify(self.eps, rational=True)
            return base * (1 + eps * X / sp.sqrt(1 + X**2))
        return base

    # -- numeric boundary form -------------------------------------------------
    def a(self, x):
        return _numeric_funcs(self)[0](x)

    def da(self, x):
        return _numeric_funcs(self)[1](x)

    def b(self, x):
        return _numeric_funcs(self)[2](x)

    def db(self, x):
        return _numeric_funcs(self)[3](x)

    def boundary_metric(self, x: float, y) -> np.ndarray:
        """Metric ``b(x) h_round`` at ``y`` as an ambient ``n x n`` matrix.

        The round metric is represented by the tangential projector
        ``I - y y^T`` in the embedding ``S^{n-1} -> R^n``; it is positive
        definite on the tangent space ``y^perp``.
        """
        y = np.asarray(y, dtype=float)
        y = y / np.linalg.norm(y)
        return float(self.b(x)) * (np.eye(len(y)) - np.outer(y, y))

    # -- global conformal form -------------------------------------------------
    def beta_tau(self, tau):
        """Warp factor ``beta(tau)`` of a separable model and its tau-derivative."""
        self._require_global()
        tau = np.asarray(tau, dtype=float)
        if self.family is Family.EXACT_DE_SITTER or not self.eps:
            return np.ones_like(tau), np.zeros_like(tau)
        return 1.0 + self.eps * np.cos(tau), -self.eps * np.sin(tau)

    def beta_rho(self, rho, theta=None):
        """``beta`` and its partial derivatives in ``(rho, theta)`` for ``n = 2``.

        Returns ``(beta, d_rho beta, d_theta beta)`` broadcast over the
        inputs.  ``sech(rho) = cos(tau)`` links this to :meth:`beta_tau`.
        """
        self._require_global()
        rho = np.asarray(rho, dtype=float)
        sech = 1.0 / np.cosh(rho)
        tanh = np.tanh(rho)
        warp = 1.0 + self.eps * sech
        dwarp = -self.eps * sech * tanh
        if self.eps_angular and theta is not None:
            s = np.sin(theta)
            ang = 1.0 + self.eps_angular * s * sech**2
            dang_rho = -2.0 * self.eps_angular * s * sech**2 * tanh
            dang_theta = self.eps_angular * np.cos(theta) * sech**2
        else:
            ang, dang_rho, dang_theta = 1.0, 0.0, 0.0
        beta = warp * ang
        return beta, dwarp * ang + warp * dang_rho, warp * dang_theta

    def _require_global(self):
        if not self.has_global_extension:
            raise ValueError("the product model has no global conformal form")

    def describe(self) -> dict:
        return {
            "n": self.n,
            "family": self.family.value,
            "eps": self.eps,
            "eps_angular": self.eps_angular,
        }


@lru_cache(maxsize=None)
def _numeric_funcs(model: MetricModel):
    a, b = model.a_expr(), model.b_expr()
    out = []
    for expr in (a, sp.diff(a, X), b, sp.diff(b, X)):
        f = sp.lambdify(X, expr, "numpy")
        if not expr.free_symbols:
            const = float(expr)
            out.append(lambda x, c=const: np.full_like(np.asarray(x, dtype=float), c) if np.ndim(x) else c)
        else:
            out.append(f)
    return tuple(out)


@lru_cache(maxsize=None)
def mode_operator_exprs(model: MetricModel):
    """Closed-form coefficients of the separated operator in ``theta = x d/dx``.

    On an eigenmode with ``Delta_Y = mu`` the operator ``Box - lam`` reads

        A(x) theta^2 + B(x) theta + (mu D(x) - lam),

    with ``A = -1/a``, ``B = -((1-n)/a + x (w/a)'/w)``, ``D = -x^2/b`` and
    ``w = a^{1/2} b^{(n-1)/2}``.  Returns ``(A, B, D)`` as sympy expressions.
    """
    n = model.n
    a, b = model.a_expr(), model.b_expr()
    w = sp.sqrt(a) * b ** sp.Rational(n - 1, 2)
    A = -1 / a
    B = -((1 - n) / a + X * sp.diff(w / a, X) / w)
    D = -(X**2) / b
    return tuple(sp.simplify(e) for e in (A, B, D))


@lru_cache(maxsize=None)
def mode_operator_taylor(model: MetricModel, order: int):
    """Taylor coefficients ``A_i, B_i, D_i`` for ``i <= order`` (sympy numbers)."""
    coeffs = []
    for expr in mode_operator_exprs(model):
        ser = sp.series(expr, X, 0, order + 1).removeO()
        poly = sp.Poly(sp.expand(ser), X)
        row = [sp.nsimplify(poly.coeff_monomial(X**i)) for i in range(order + 1)]
        coeffs.append(tuple(row))
    A, B, D = coeffs
    if A[0] != -1 or sp.simplify(B[0] - (model.n - 1)) != 0:
        raise AssertionError("model is not in boundary normal form at x = 0")
    return A, B, D


def mode_operator_numeric(model: MetricModel, module: str = "mpmath"):
    """Callables ``(A, B, D)`` for evaluating the separated operator directly."""
    return tuple(sp.lambdify(X, e, module) for e in mode_operator_exprs(model))


def sphere_eigenvalue(n: int, mode: int) -> int:
    """Eigenvalue of the positive Laplacian on ``S^{n-1}`` for the given mode.

    On the circle the mode is a Fourier index ``k`` (eigenvalue ``k^2``);
    on higher spheres it is the harmonic degree ``l`` (``l(l + n - 2)``).
    """
    if n == 2:
        return int(mode) ** 2
    if mode < 0:
        raise ValueError("harmonic degree must be nonnegative")
    return int(mode) * (int(mode) + n - 2)


def conformal_time_from_x(x: float, side: int) -> float:
    """Conformal time ``tau = side * arccot(x)`` of the point with bdf ``x``."""
    return side * math.atan2(1.0, x)
