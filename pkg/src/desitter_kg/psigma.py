"""The front-face model operator ``P_sigma`` on the unit ball.

In Euclidean coordinates ``Y`` on the unit ball of ``R^{n-1}``,

    P_sigma = -(E + n - 1 - sigma)(E - sigma) - Delta - lam,     E = Y . grad,

with ``Delta`` the positive Laplacian.  On a spherical-harmonic sector of
degree ``l`` (angular eigenvalue ``L = l(l + n - 3)``) the radial form is

    P_sigma f = (1 - r^2) f'' + ((n-2)/r + (2 sigma - n) r) f'
                + (sigma (n - 1 - sigma) - lam - L / r^2) f,

and is symmetric for the weight ``r^{n-2} (1 - r^2)^{-sigma} dr``.  On the
circle case ``n = 2`` the ball is ``(-1, 1)`` and the sector index is the
parity of the function.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass, replace
from typing import Callable

import mpmath
import numpy as np
import sympy as sp
from scipy.integrate import simpson

from .errors import GridTooCoarse, QuadratureDivergence
from .poisson import sphere_area
from .spectral import SpectralParams

MIN_POINTS = 32
RIM_COLLAR = 1e-2
GRIDS = ("uniform", "tanh")


@dataclass(frozen=True)
class BallField:
    """Samples of a single angular sector on a radial grid starting at 0.

    Attributes
    ----------
    r : ndarray
        Radial nodes, equally spaced in ``r`` (``grid="uniform"``) or in
        ``xi = atanh r`` (``grid="tanh"``, which clusters nodes at the rim).
    values : ndarray
        Complex samples.
    mode : int
        Harmonic degree ``l`` (``n >= 3``) or parity ``0/1`` (``n = 2``).
    n : int
    grid : str
    """

    r: np.ndarray
    values: np.ndarray
    mode: int = 0
    n: int = 2
    grid: str = "uniform"

    def __post_init__(self):
        extended = np.asarray(self.values).dtype in (np.longdouble, np.clongdouble)
        r = np.asarray(self.r, dtype=np.longdouble if extended else float)
        v = np.asarray(self.values, dtype=np.clongdouble if extended else complex)
        if r.ndim != 1 or r.shape != v.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radial grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        if self.grid not in GRIDS:
            raise ValueError(f"grid must be one of {GRIDS}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @property
    def extended(self) -> bool:
        """True when samples are held in extended (``long double``) precision."""
        return self.values.dtype == np.clongdouble

    @classmethod
    def from_function(cls, f: Callable, n_points: int = 512, n: int = 2, mode: int = 0,
                      r_max: float = 1.0 - RIM_COLLAR, extended: bool = False,
                      grid: str = "uniform") -> "BallField":
        """Sample ``f`` on ``n_points`` radii in ``[0, r_max]``.

        With ``extended=True`` the grid and samples use ``long double``; ``f``
        must then accept and return ``long double`` arrays.
        """
        real = np.longdouble if extended else float
        top = real(r_max) if grid == "uniform" else np.arctanh(real(r_max))
        q = np.linspace(real(0), top, n_points, dtype=real)
        r = q if grid == "uniform" else np.tanh(q)
        vals = np.asarray(f(r)).astype(np.clongdouble if extended else complex)
        return cls(r, vals, mode, n, grid)

    @property
    def coordinate(self) -> np.ndarray:
        """The equally spaced coordinate: ``r`` or ``atanh r``."""
        return self.r if self.grid == "uniform" else np.arctanh(self.r)

    @property
    def h(self) -> float:
        q = self.coordinate
        return q[1] - q[0]

    @property
    def angular_eigenvalue(self) -> int:
        if self.n == 2:
            return 0
        return self.mode * (self.mode + self.n - 3)

    @property
    def parity(self) -> int:
        return 1 if self.mode % 2 else 0

    def with_values(self, values) -> "BallField":
        return replace(self, values=np.asarray(values, dtype=self.values.dtype))


def _fd_weights(offsets, order: int) -> list[Fraction]:
    """Exact finite-difference weights on integer ``offsets`` for the given derivative."""
    offsets = [Fraction(int(o)) for o in offsets]
    m = len(offsets)
    # Solve the transposed Vandermonde system sum_k w_k o_k^p = p! delta_{p,order} exactly.
    rows = [[o**p for o in offsets] + [Fraction(math.factorial(order) if p == order else 0)] for p in range(m)]
    for col in range(m):
        piv = next(i for i in range(col, m) if rows[i][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        pv = rows[col][col]
        rows[col] = [v / pv for v in rows[col]]
        for i in range(m):
            if i != col and rows[i][col] != 0:
                fac = rows[i][col]
                rows[i] = [a - fac * b for a, b in zip(rows[i], rows[col])]
    return [rows[i][m] for i in range(m)]


_ONE_SIDED = {
    # (derivative, distance from the last point) -> (offsets, exact weights)
    (d, back): (list(range(-5 + back, 1 + back)), _fd_weights(range(-5 + back, 1 + back), d))
    for d in (1, 2)
    for back in (0, 1)
}


def radial_derivatives(field: BallField) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order first and second ``r``-derivatives with parity ghost points at ``r = 0``.

    On the ``tanh`` grid the stencils act in ``xi`` and the chain rule
    ``f_r = f_xi / J``, ``f_rr = (f_xi_xi + 2 r f_xi) / J^2`` with
    ``J = 1 - r^2`` converts back; ``xi`` is odd in ``r``, so the parity
    ghosts carry over unchanged.
    """
    d1, d2 = _uniform_derivatives(field)
    if field.grid == "uniform":
        return d1, d2
    r = field.r
    J = 1 - r * r
    return d1 / J, (d2 + 2 * r * d1) / (J * J)


def _uniform_derivatives(field: BallField) -> tuple[np.ndarray, np.ndarray]:
    f = field.values
    m = len(f)
    if m < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points, got {m}")
    h = field.h
    q = field.coordinate
    if abs(q[0]) > 1e-14 or np.max(np.abs(np.diff(q) - h)) > 1e-9 * h:
        raise ValueError("radial grid must be equally spaced and start at r = 0")
    sign = -1 if field.parity else 1
    ext = np.concatenate([sign * f[2:0:-1], f])  # ghosts at -2h, -h
    d1 = np.empty(m, dtype=f.dtype)
    d2 = np.empty(m, dtype=f.dtype)
    fm2, fm1, f0 = ext[0:m - 2], ext[1:m - 1], ext[2:m]
    fp1, fp2 = ext[3:m + 1], ext[4:m + 2]
    # Differences against the centre value keep the stencils exact on constants.
    d1[: m - 2] = ((fm2 - f0) - 8 * (fm1 - f0) + 8 * (fp1 - f0) - (fp2 - f0)) / (12 * h)
    d2[: m - 2] = (-(fm2 - f0) + 16 * (fm1 - f0) + 16 * (fp1 - f0) - (fp2 - f0)) / (12 * h * h)
    real = np.longdouble if field.extended else float
    for back in (0, 1):
        i = m - 1 - back
        for d, arr in ((1, d1), (2, d2)):
            offs, w = _ONE_SIDED[(d, back)]
            acc = 0
            for o, wk in zip(offs, w):
                if o:
                    acc = acc + real(wk.numerator) / real(wk.denominator) * (f[i + o] - f[i])
            arr[i] = acc / h**d
    return d1, d2


def _radial_operator(sigma: complex, field: BallField, lam: float, d1, d2) -> np.ndarray:
    r = field.r
    n = field.n
    L = field.angular_eigenvalue
    f = field.values
    c0 = sigma * (n - 1 - sigma) - lam
    out = np.empty_like(f)
    rr = r[1:]
    out[1:] = (1 - rr**2) * d2[1:] + ((n - 2) / rr + (2 * sigma - n) * rr) * d1[1:] + (c0 - L / rr**2) * f[1:]
    if field.mode == 0:
        out[0] = (n - 1) * d2[0] + c0 * f[0]
    else:
        out[0] = 0.0
    return out


def apply_psigma(sigma: complex, field: BallField, params: SpectralParams) -> BallField:
    """Fourth-order discretization of ``P_sigma`` on one angular sector.

    Raises
    ------
    GridTooCoarse
        If the grid has fewer than 32 points.
    """
    if field.n != params.n:
        raise ValueError("field and spectral data disagree on n")
    d1, d2 = radial_derivatives(field)
    return field.with_values(_radial_operator(sigma, field, params.lam, d1, d2))


def null_vector(params: SpectralParams, n_points: int = 1024, r_max: float = 1.0 - RIM_COLLAR,
                extended: bool = True, grid: str = "auto") -> BallField:
    """Samples of ``(1 - r^2)^{s_hat_plus}``, annihilated by ``P_{s_hat_plus}``.

    ``grid="auto"`` keeps the uniform grid when the exponent is a
    non-negative integer (the samples are then a polynomial) and otherwise
    uses the ``tanh`` grid, where the rim behaviour becomes
    ``sech(xi)^{2 s}`` and fourth-order differences resolve it.
    """
    s = params.s_hat_plus
    if grid == "auto":
        polynomial = abs(s.imag) < 1e-14 and s.real > -1e-14 and abs(s.real - round(s.real)) < 1e-12
        grid = "uniform" if polynomial else "tanh"
    if params.real_roots:
        s_real = np.longdouble(s.real) if extended else s.real
        f = lambda r: np.power(1 - r * r, s_real)
    else:
        f = lambda r: np.power((1 - r * r).astype(np.clongdouble if extended else complex), s)
    return BallField.from_function(f, n_points, params.n, 0, r_max, extended=extended, grid=grid)


def null_vector_residual(params: SpectralParams, n_points: int = 1024, r_max: float = 1.0 - RIM_COLLAR,
                         extended: bool = True, grid: str = "auto") -> float:
    """Sup-norm of ``P_{s_hat_plus} (1 - r^2)^{s_hat_plus}`` on the grid."""
    field = null_vector(params, n_points, r_max, extended, grid)
    return float(np.max(np.abs(apply_psigma(params.s_hat_plus, field, params).values)))


def check_conjugation(s: float, sigma: float, test: BallField, params: SpectralParams) -> float:
    """Sup-norm defect of the conjugation identity on ``test``.

    Compares ``(1-r^2)^{-s} P_sigma[(1-r^2)^s u]`` with
    ``(4 s (s - sigma) / (1 - r^2) + P_{sigma - 2 s}) u``.  The test
    function should vanish near the rim, where the identity is only
    distributional.
    """
    w = 1.0 - test.r**2
    ws = np.power(w, s)
    lhs = apply_psigma(sigma, test.with_values(ws * test.values), params).values / ws
    rhs = 4 * s * (s - sigma) / w * test.values + apply_psigma(sigma - 2 * s, test, params).values
    return float(np.max(np.abs(lhs - rhs)))


def conjugation_order(s: float, sigma: float, f: Callable, params: SpectralParams, mode: int = 0,
                      sizes=(256, 512, 1024)) -> tuple[list[float], list[float]]:
    """Defects on successively doubled grids and the observed convergence orders."""
    res = []
    for m in sizes:
        field = BallField.from_function(f, m, params.n, mode)
        res.append(check_conjugation(s, sigma, field, params))
    orders = [math.log2(res[i] / res[i + 1]) for i in range(len(res) - 1)]
    return res, orders


def hyperbolic_exponent(sigma: float, n: int) -> float:
    """Conjugation exponent ``s = (sigma - n/2) / 2`` linking ``P_sigma`` to hyperbolic space."""
    return (sigma - n / 2) / 2


# -- polynomial identities -------------------------------------------------------

def _ball_symbols(n: int):
    return sp.symbols(f"y1:{n}", real=True)


def _euler(expr, ys):
    return sum(y * sp.diff(expr, y) for y in ys)


def _laplacian(expr, ys):
    return -sum(sp.diff(expr, y, 2) for y in ys)


def psigma_symbolic(sigma, expr, ys, lam):
    """``P_sigma`` applied symbolically in Euclidean coordinates."""
    n = len(ys) + 1
    inner = _euler(expr, ys) - sigma * expr
    outer = _euler(inner, ys) + (n - 1 - sigma) * inner
    return sp.expand(-outer - _laplacian(expr, ys) - lam * expr)


def _monomials(ys, degree):
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(ys, d):
            yield sp.Mul(*combo) if combo else sp.Integer(1)


def _to_number(value, exact: bool):
    if exact:
        return sp.nsimplify(value, rational=True)
    return sp.Float(value, 30)


def check_intertwining(sigma, poly_degree: int, n: int = 3, lam=0, exact: bool = True) -> float:
    """Max coefficient of ``(P_{sigma-2} Delta - Delta P_sigma) q`` over monomials ``q``.

    Exact (rational) arithmetic returns exactly ``0.0``; the float path
    works at 30 significant digits.
    """
    ys = _ball_symbols(n)
    sig, lam_v = _to_number(sigma, exact), _to_number(lam, exact)
    worst = 0.0
    for q in _monomials(ys, poly_degree):
        lhs = psigma_symbolic(sig - 2, _laplacian(q, ys), ys, lam_v)
        rhs = _laplacian(psigma_symbolic(sig, q, ys, lam_v), ys)
        diff = sp.expand(lhs - rhs)
        if diff == 0:
            continue
        coeffs = sp.Poly(diff, *ys).coeffs()
        worst = max(worst, max(float(abs(c)) for c in coeffs))
    return worst


class _WeightedPoly:
    """Finite sum ``sum_m W^{base + m} p_m(Y)`` with ``W = 1 - |Y|^2`` and integer ``m``.

    ``base`` may be symbolic, so identities can be checked for all exponents
    at once.  Differentiation uses ``d W^a = -2 a W^{a-1} Y dY``.
    """

    def __init__(self, terms: dict, base, ys):
        self.terms = {m: sp.expand(p) for m, p in terms.items() if p != 0}
        self.base = base
        self.ys = ys

    def _new(self, terms):
        return _WeightedPoly(terms, self.base, self.ys)

    def __add__(self, other):
        out = dict(self.terms)
        for m, p in other.terms.items():
            out[m] = out.get(m, 0) + p
        return self._new(out)

    def scale(self, c):
        return self._new({m: c * p for m, p in self.terms.items()})

    def shift(self, k: int):
        return self._new({m + k: p for m, p in self.terms.items()})

    def diff(self, y):
        out = {}
        for m, p in self.terms.items():
            a = self.base + m
            out[m] = out.get(m, 0) + sp.diff(p, y)
            out[m - 1] = out.get(m - 1, 0) - 2 * a * y * p
        return self._new(out)

    def euler(self):
        acc = self._new({})
        for y in self.ys:
            d = self.diff(y)
            acc = acc + d._new({m: y * p for m, p in d.terms.items()})
        return acc

    def laplacian(self):
        acc = self._new({})
        for y in self.ys:
            acc = acc + self.diff(y).diff(y)
        return acc.scale(-1)

    def psigma(self, sigma, lam):
        n = len(self.ys) + 1
        inner = self.euler() + self.scale(-sigma)
        outer = inner.euler() + inner.scale(n - 1 - sigma)
        return outer.scale(-1) + self.laplacian().scale(-1) + self.scale(-lam)

    def collapse(self) -> sp.Expr:
        """Single polynomial ``p`` with ``self = W^{base + m_min} p``."""
        if not self.terms:
            return sp.Integer(0)
        w = 1 - sum(y**2 for y in self.ys)
        m0 = min(self.terms)
        return sp.expand(sum(w ** (m - m0) * p for m, p in self.terms.items()))


def check_weighted_intertwining(sigma=None, poly_degree: int = 4, n: int = 3, lam=0) -> float:
    """Defect of ``P_{sigma+2} nu^{2sigma+4} Delta nu^{-2sigma} = nu^{2sigma+4} Delta nu^{-2sigma} P_sigma``.

    Both sides are applied to ``u = nu^{2 sigma} q`` for every monomial ``q``
    up to ``poly_degree``, with ``nu^2 = 1 - |Y|^2``.  Powers of ``nu`` are
    tracked exactly; ``sigma=None`` keeps the exponent symbolic, so a zero
    result holds for every ``sigma``.  Returns the largest coefficient of
    the collapsed difference (exactly 0.0 when the identity holds).
    """
    ys = _ball_symbols(n)
    sig = sp.Symbol("sigma") if sigma is None else sp.nsimplify(sigma, rational=True)
    lam_v = sp.nsimplify(lam, rational=True)
    worst = 0.0
    for q in _monomials(ys, poly_degree):
        # nu^{-2 sigma} u = q is polynomial; track the remaining powers relative to W^sigma.
        u = _WeightedPoly({0: q}, sig, ys)
        lap_q = _WeightedPoly({0: q}, 0, ys).laplacian()
        lhs = _WeightedPoly({2: lap_q.collapse()}, sig, ys).psigma(sig + 2, lam_v)
        inner = u.psigma(sig, lam_v)  # = W^sigma * (...)
        inner0 = _WeightedPoly(inner.terms, 0, ys)  # strip W^sigma
        rhs = inner0.laplacian().shift(2)
        rhs = _WeightedPoly(rhs.terms, sig, ys)
        diff = (lhs + rhs.scale(-1)).collapse()
        if diff == 0:
            continue
        coeffs = sp.Poly(diff, *ys).coeffs()
        worst = max(worst, max(float(abs(sp.N(c.subs(sig, sp.Rational(37, 100)) if sigma is None else c))) for c in coeffs))
    return worst


# -- quadratic form --------------------------------------------------------------

def _weight(field: BallField, sigma: float) -> np.ndarray:
    r = field.r
    return sphere_area(field.n - 2) * r ** (field.n - 2) * (1 - r**2) ** (-sigma)


def weighted_norm2(field: BallField, sigma: float) -> float:
    """``||u||^2`` for the measure ``|S^{n-2}| r^{n-2} (1 - r^2)^{-sigma} dr``."""
    return float(simpson(np.abs(field.values) ** 2 * _weight(field, sigma), x=field.r))


def _check_rim(field: BallField, sigma: float):
    scale = max(float(np.max(np.abs(field.values))), 1e-300)
    if sigma >= 1.0 and abs(field.values[-1]) > 1e-8 * scale:
        raise QuadratureDivergence(
            f"weight (1-r^2)^(-{sigma}) is not integrable at the rim for data that does not vanish there"
        )


def quadratic_form(sigma: float, test: BallField, params: SpectralParams) -> float:
    """``<u, -P_sigma u>`` in the symmetrizing weighted ``L^2`` inner product.

    The operator is applied with fourth-order differences and integrated
    with composite Simpson quadrature on the same grid.

    Raises
    ------
    QuadratureDivergence
        For ``sigma >= 1`` when ``u`` does not vanish at the outer grid point.
    """
    _check_rim(test, sigma)
    pu = apply_psigma(sigma, test, params).values
    integrand = np.conj(test.values) * (-pu) * _weight(test, sigma)
    return float(simpson(integrand, x=test.r).real)


def quadratic_form_energy(sigma: float, u: Callable, du: Callable, support: tuple[float, float],
                          params: SpectralParams, mode: int = 0) -> float:
    """Reference value of the form from its integrated-by-parts energy expression.

    ``int [(1 - r^2) |u'|^2 + (L/r^2 + (sigma - s_+)(sigma - s_-)) |u|^2] w dr``,
    computed by adaptive quadrature from analytic ``u`` and ``u'``.
    """
    from scipy.integrate import quad

    n = params.n
    L = 0 if n == 2 else mode * (mode + n - 3)
    c = sigma * sigma - (n - 1) * sigma + params.lam
    area = sphere_area(n - 2)

    def integrand(r):
        w = area * r ** (n - 2) * (1 - r * r) ** (-sigma)
        val = (1 - r * r) * abs(du(r)) ** 2 + c * abs(u(r)) ** 2
        if L:
            val += L / (r * r) * abs(u(r)) ** 2
        return val * w

    val, _ = quad(integrand, support[0], support[1], epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def bump(center: float, width: float):
    """Smooth compactly supported bump and its derivative on ``|r - center| < width``."""

    def f(r):
        r = np.asarray(r, dtype=float)
        z = (r - center) / width
        inside = np.abs(z) < 1
        zz = np.where(inside, z, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - zz**2) + 1.0), 0.0)

    def df(r):
        r = np.asarray(r, dtype=float)
        z = (r - center) / width
        inside = np.abs(z) < 1
        zz = np.where(inside, z, 0.0)
        return np.where(inside, f(r) * (-2.0 * zz / (1.0 - zz**2) ** 2) / width, 0.0)

    return f, df
