"""Indicial roots, regime classification and weight predicates.

Everything downstream is parametrized by the pair ``(n, lam)``: the
dimension of spacetime and the spectral parameter in ``Box - lam``.  The
two indicial roots are the solutions of ``s (n - 1 - s) = lam``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Real

GAP_TOLERANCE = 1e-9


class Regime(str, Enum):
    NON_INTEGER_GAP = "NonIntegerGap"
    INTEGER_GAP = "IntegerGap"
    THRESHOLD = "Threshold"
    COMPLEX_ROOTS = "ComplexRoots"


class WeightRegime(str, Enum):
    ALL_POSITIVE = "AllPositive"
    ALL_NEGATIVE = "AllNegative"
    DEGENERATE = "Degenerate"


def _as_fraction(value) -> Fraction:
    """Exact rational image of an int, float, Fraction or ``"p/q"`` string.

    Floats are binary rationals, so the conversion is exact; ``0.1875``
    becomes ``3/16`` and ``0.1`` becomes the nearest dyadic.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, bool):
        raise TypeError("lambda must be a real number")
    if isinstance(value, Real):
        if not math.isfinite(float(value)):
            raise ValueError("lambda must be finite")
        return Fraction(value)
    raise TypeError(f"lambda must be real, got {type(value).__name__}")


def _rational_sqrt(q: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None if irrational."""
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return None


@dataclass(frozen=True)
class SpectralParams:
    """Indicial data attached to ``(n, lam)``.

    Attributes
    ----------
    n : int
        Spacetime dimension, the boundary has dimension ``n - 1``.
    lam : float
        Spectral parameter.
    s_plus, s_minus : complex
        Indicial roots, ``s_plus + s_minus = n - 1`` and ``s_plus * s_minus = lam``.
    s_hat_plus, s_hat_minus : complex
        Shifted roots ``s_pm - (n - 1)``.
    l_lambda : float
        ``Re sqrt((n-1)^2/4 - lam)``.
    regime : Regime
    exact_root_shift : Fraction or None
        ``sqrt((n-1)^2/4 - lam)`` when it is rational and ``lam`` was given
        exactly enough to decide so; used by the symbolic recursion.
    """

    n: int
    lam: float
    s_plus: complex
    s_minus: complex
    s_hat_plus: complex
    s_hat_minus: complex
    l_lambda: float
    regime: Regime
    lam_exact: Fraction
    exact_root_shift: Fraction | None = None

    @property
    def gap(self) -> complex:
        return self.s_plus - self.s_minus

    @property
    def integer_gap(self) -> int | None:
        """The gap as a positive integer in the IntegerGap regime, else None."""
        if self.regime is not Regime.INTEGER_GAP:
            return None
        return int(round(self.gap.real))

    @property
    def real_roots(self) -> bool:
        return self.regime is not Regime.COMPLEX_ROOTS

    def exact_roots(self):
        """Roots as sympy rationals when they are rational, else None."""
        if self.exact_root_shift is None:
            return None
        import sympy as sp

        centre = sp.Rational(self.n - 1, 2)
        shift = sp.Rational(self.exact_root_shift.numerator, self.exact_root_shift.denominator)
        return centre + shift, centre - shift

    def to_dict(self) -> dict:
        def num(z: complex):
            if abs(z.imag) == 0.0:
                return z.real
            return {"re": z.real, "im": z.imag}

        return {
            "n": self.n,
            "lambda": self.lam,
            "s_plus": num(self.s_plus),
            "s_minus": num(self.s_minus),
            "s_hat_plus": num(self.s_hat_plus),
            "s_hat_minus": num(self.s_hat_minus),
            "l_lambda": self.l_lambda,
            "regime": self.regime.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def compute_spectral(n: int, lam) -> SpectralParams:
    """Indicial roots and regime for dimension ``n`` and parameter ``lam``.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    lam : real
        Float, int, :class:`fractions.Fraction` or a ``"p/q"`` string.

    Examples
    --------
    >>> compute_spectral(2, 0.1875).s_plus
    (0.75+0j)
    """
    if isinstance(n, bool) or int(n) != n:
        raise TypeError("n must be an integer")
    n = int(n)
    if n < 2:
        raise ValueError(f"dimension n must be at least 2, got {n}")
    lam_q = _as_fraction(lam)
    lam_f = float(lam_q)
    disc_q = Fraction((n - 1) ** 2, 4) - lam_q
    centre = (n - 1) / 2.0

    exact_shift = _rational_sqrt(disc_q) if disc_q >= 0 else None
    if disc_q < 0:
        mu = math.sqrt(float(-disc_q))
        if mu < GAP_TOLERANCE / 2:
            regime = Regime.THRESHOLD
            shift = 0.0j
        else:
            regime = Regime.COMPLEX_ROOTS
            shift = 1j * mu
    elif disc_q == 0:
        regime = Regime.THRESHOLD
        shift = 0.0j
    else:
        root = float(exact_shift) if exact_shift is not None else math.sqrt(float(disc_q))
        shift = complex(root, 0.0)
        gap = 2.0 * root
        if exact_shift is not None:
            gap_q = 2 * exact_shift
            is_int = gap_q.denominator == 1
        else:
            is_int = abs(gap - round(gap)) < GAP_TOLERANCE and round(gap) >= 1
        if gap < GAP_TOLERANCE:
            regime = Regime.THRESHOLD
            shift = 0.0j
        elif is_int:
            regime = Regime.INTEGER_GAP
        else:
            regime = Regime.NON_INTEGER_GAP

    s_plus = complex(centre) + shift
    s_minus = complex(centre) - shift
    return SpectralParams(
        n=n,
        lam=lam_f,
        s_plus=s_plus,
        s_minus=s_minus,
        s_hat_plus=s_plus - (n - 1),
        s_hat_minus=s_minus - (n - 1),
        l_lambda=max(shift.real, 0.0),
        regime=regime,
        lam_exact=lam_q,
        exact_root_shift=exact_shift,
    )


def weight_regime(r: float, params: SpectralParams, tol: float = 1e-12) -> WeightRegime:
    """Sign class of the weighted indicial quantities for weight ``r``.

    ``AllPositive`` when ``r > max(0, 1 - 2l)`` and ``r != 1 + 2l``;
    ``AllNegative`` when ``r < min(0, 1 - 2l)``; otherwise ``Degenerate``.
    The excluded value ``r = 1 + 2l`` is matched within ``tol``.
    """
    l = params.l_lambda
    if r > max(0.0, 1.0 - 2.0 * l) and abs(r - (1.0 + 2.0 * l)) > tol:
        return WeightRegime.ALL_POSITIVE
    if r < min(0.0, 1.0 - 2.0 * l):
        return WeightRegime.ALL_NEGATIVE
    return WeightRegime.DEGENERATE


def symbol_ratio(params: SpectralParams) -> complex:
    """Principal-symbol ratio ``exp(i pi (s_plus - s_minus))``."""
    return cmath.exp(1j * math.pi * params.gap)


def is_elliptic(params: SpectralParams, tol: float = 1e-9) -> bool:
    """True unless the root gap is an even integer, i.e. the symbol ratio is 1."""
    return abs(symbol_ratio(params) - 1.0) > tol


def indicial_polynomial(s: complex, params: SpectralParams) -> complex:
    """``I(s) = s (n - 1 - s) - lam``; vanishes exactly at the two roots."""
    return s * (params.n - 1 - s) - params.lam


def indicial_derivative(s: complex, params: SpectralParams) -> complex:
    """``dI/ds = n - 1 - 2 s``; vanishes at the double root of the threshold case."""
    return params.n - 1 - 2 * s
