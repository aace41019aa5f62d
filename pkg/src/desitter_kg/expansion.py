"""Boundary Frobenius recursion for power-log expansions.

On a boundary eigenmode with ``Delta_Y = mu`` the separated operator is

    L_mu = A(x) theta^2 + B(x) theta + (mu D(x) - lam),    theta = x d/dx,

with ``A(0) = -1`` and ``B(0) = n - 1``, so that ``L_mu x^s = I(s) x^s + O(x^{s+1})``
where ``I(s) = s (n-1-s) - lam``.  Writing

    u = sum_j x^{sigma_0 + j} c_j(log x),

with each ``c_j`` a polynomial in ``L = log x``, and using
``theta (x^sigma c(L)) = x^sigma (sigma + d/dL) c``, the equation ``L_mu u = 0``
order by order becomes

    Q_0(sigma_j + d/dL) c_j = - sum_{i >= 1} Q_i(sigma_{j-i} + d/dL) c_{j-i},

where ``Q_i(z) = A_i z^2 + B_i z + C_i`` collects the Taylor coefficients of
the operator and ``Q_0 = I``.  Since ``d/dL`` is nilpotent on polynomials the
left side is inverted by a finite Neumann series; at a resonance
(``I(sigma_j) = 0``) the degree in ``L`` rises by one.  The constant of
integration created at a resonance is set to zero, which keeps the
minus-branch block free of a spurious copy of the plus branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import mpmath
import numpy as np
import sympy as sp

from .errors import IllConditioned, OrderClash
from .models import Family, MetricModel, mode_operator_exprs, mode_operator_taylor, sphere_eigenvalue
from .spectral import Regime, SpectralParams, indicial_polynomial

BRANCHES = ("plus", "minus")
MAX_LOG_POWER = 1


# -- polynomial-in-L helpers (coefficient lists, lowest degree first) ------------

def _trim(c: list) -> list:
    while len(c) > 1 and c[-1] == 0:
        c = c[:-1]
    return c


def _add(p: list, q: list) -> list:
    out = list(p) + [0] * max(0, len(q) - len(p))
    for i, v in enumerate(q):
        out[i] = out[i] + v
    return out


def _scale(p: list, a) -> list:
    return [a * v for v in p]


def _dL(p: list) -> list:
    if len(p) <= 1:
        return [0 * p[0]] if p else [0]
    return [m * p[m] for m in range(1, len(p))]


def _integrate(p: list) -> list:
    return [0 * p[0]] + [p[m] / (m + 1) for m in range(len(p))]


def _is_zero(p: list) -> bool:
    return all(v == 0 for v in p)


def _apply_quadratic(a2, a1, a0, sigma, c: list) -> list:
    """``(a2 z^2 + a1 z + a0)`` at ``z = sigma + d/dL`` applied to ``c``."""
    zc = _add(_scale(c, sigma), _dL(c))
    zzc = _add(_scale(zc, sigma), _dL(zc))
    return _add(_add(_scale(zzc, a2), _scale(zc, a1)), _scale(c, a0))


def _solve_indicial(I0, I1, rhs: list, resonant: bool, double: bool) -> list:
    """Solve ``(I0 + I1 D - D^2) c = rhs`` for a polynomial ``c`` in ``L``.

    ``D`` is ``d/dL``.  At a simple resonance ``I0 = 0`` and the solution has
    one more power of ``L``; at a double root ``I0 = I1 = 0`` two more.  The
    free constants are set to zero.
    """
    if _is_zero(rhs):
        return [0 * rhs[0]]
    if double:
        return _scale(_integrate(_integrate(rhs)), -1)
    if resonant:
        # (I1 - D) c' = rhs with c' = D c
        term, cp = list(rhs), [0 * rhs[0]]
        for _ in range(len(rhs) + 1):
            term_scaled = _scale(term, 1 / I1 if not isinstance(I1, sp.Basic) else sp.Integer(1) / I1)
            cp = _add(cp, term_scaled)
            term = _dL(term_scaled)
            if _is_zero(term):
                break
        return _integrate(cp)
    out, term = [0 * rhs[0]], list(rhs)
    inv = (sp.Integer(1) / I0) if isinstance(I0, sp.Basic) else 1 / I0
    for _ in range(2 * len(rhs) + 2):
        term = _scale(term, inv)
        out = _add(out, term)
        nxt = _add(_scale(_dL(term), I1), _scale(_dL(_dL(term)), -1))
        term = _scale(nxt, -1)
        if _is_zero(term):
            break
    return out


@dataclass
class _BranchPlan:
    sigma0: object
    seed: list
    resonances: frozenset
    double_root_at_zero: bool


def _branch_plans(params: SpectralParams, exact: bool, g_plus, g_minus):
    """Seeds and resonance locations for the plus and minus branches."""
    if exact:
        roots = params.exact_roots()
        if roots is None:
            raise ValueError("exact arithmetic needs rational indicial roots")
        sp_plus, sp_minus = roots
    else:
        sp_plus, sp_minus = complex(params.s_plus), complex(params.s_minus)
    zero = sp.Integer(0) if exact else 0j
    plans = {}
    if params.regime is Regime.THRESHOLD:
        plans["plus"] = _BranchPlan(sp_plus, [g_plus], frozenset(), True)
        plans["minus"] = _BranchPlan(sp_minus, [zero, g_minus], frozenset(), True)
        return plans
    plans["plus"] = _BranchPlan(sp_plus, [g_plus], frozenset(), False)
    res = frozenset()
    if params.regime is Regime.INTEGER_GAP:
        res = frozenset({params.integer_gap})
    plans["minus"] = _BranchPlan(sp_minus, [g_minus], res, False)
    return plans


def _recursion(plan: _BranchPlan, taylor, mu, lam, n, N, exact, max_log):
    A, B, D = taylor
    lam_v = lam
    out = [list(plan.seed)]
    for j in range(1, N + 1):
        rhs = [0 * plan.seed[0]]
        for i in range(1, j + 1):
            c_prev = out[j - i]
            if _is_zero(c_prev):
                continue
            Ci = mu * D[i]
            if A[i] == 0 and B[i] == 0 and Ci == 0:
                continue
            rhs = _add(rhs, _apply_quadratic(A[i], B[i], Ci, plan.sigma0 + (j - i), c_prev))
        rhs = _scale(rhs, -1)
        sigma_j = plan.sigma0 + j
        I0 = sigma_j * (n - 1 - sigma_j) - lam_v
        I1 = n - 1 - 2 * sigma_j
        resonant = j in plan.resonances
        if resonant:
            I0 = 0 * I0
        elif not exact and abs(I0) < 1e-13:
            raise OrderClash(f"unflagged resonance at offset j={j} (I = {I0:.3e})")
        c = _trim(_solve_indicial(I0, I1, rhs, resonant, False))
        if len(c) - 1 > max_log:
            raise OrderClash(
                f"offset j={j} needs log power {len(c) - 1} > allowed {max_log}"
            )
        out.append(c)
    return out


@dataclass
class PowerLogSeries:
    """Truncated expansion ``sum a_{branch,j,k} x^{s_branch + j} (log x)^k``.

    Coefficients are stored per boundary eigenmode: ``coeffs[mode][branch][j]``
    is the list of log-power coefficients ``[a_{j,0}, a_{j,1}, ...]``.
    """

    params: SpectralParams
    model: MetricModel
    N: int
    coeffs: dict
    exact: bool = False
    radius: float = 1.0
    base_exponents: tuple = field(init=False)

    def __post_init__(self):
        self.base_exponents = (self.params.s_plus, self.params.s_minus)

    @property
    def modes(self) -> list[int]:
        return sorted(self.coeffs)

    def exponent(self, branch: str) -> complex:
        return self.params.s_plus if branch == "plus" else self.params.s_minus

    def coefficient(self, branch: str, j: int, k: int, mode: int):
        try:
            row = self.coeffs[mode][branch][j]
        except (KeyError, IndexError):
            return 0
        return row[k] if k < len(row) else 0 * row[0]

    def terms(self) -> Iterator[tuple[str, int, int, int, object]]:
        for mode in self.modes:
            for branch in BRANCHES:
                for j, row in enumerate(self.coeffs[mode].get(branch, [])):
                    for k, val in enumerate(row):
                        yield branch, j, k, mode, val

    def max_log_power(self) -> int:
        return max((k for _, _, k, _, v in self.terms() if v != 0), default=0)

    def to_table(self) -> list[dict]:
        rows = []
        for branch, j, k, mode, val in self.terms():
            z = complex(val)
            rows.append({"branch": branch, "j": j, "k": k, "mode": mode, "re": z.real, "im": z.imag})
        return rows

    def _mode_terms(self, mode: int):
        for branch in BRANCHES:
            s0 = self.exponent(branch)
            for j, row in enumerate(self.coeffs.get(mode, {}).get(branch, [])):
                for k, val in enumerate(row):
                    if val != 0:
                        yield complex(s0) + j, k, complex(val)

    def evaluate_mode(self, x, mode: int, derivative: int = 0) -> np.ndarray:
        """Value (``derivative=0``) or ``x``-derivative (``derivative=1``) of mode ``mode``."""
        x = np.asarray(x, dtype=float)
        L = np.log(x)
        total = np.zeros(x.shape, dtype=complex)
        for sigma, k, val in self._mode_terms(mode):
            xs = np.exp(sigma * L)

            if derivative == 0:
                total += val * xs * L**k
            elif derivative == 1:
                part = sigma * L**k
                if k:
                    part = part + k * L ** (k - 1)
                total += val * xs * part / x
            else:
                raise ValueError("derivative must be 0 or 1")
        return total

    def evaluate(self, x, theta) -> np.ndarray:
        """Sum over circle modes, ``u(x, theta) = sum_k e^{i k theta} u_k(x)`` (``n = 2``)."""
        if self.params.n != 2:
            raise ValueError("evaluate(x, theta) is only defined on the circle; use evaluate_mode")
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(np.broadcast(x, theta).shape, dtype=complex)
        for mode in self.modes:
            out = out + np.exp(1j * mode * theta) * self.evaluate_mode(x, mode)
        return out

    def leading_data(self) -> tuple[dict, dict]:
        """Recover ``(g_plus, g_minus)`` from the leading coefficients."""
        gp, gm = {}, {}
        threshold = self.params.regime is Regime.THRESHOLD
        for mode in self.modes:
            gp[mode] = self.coefficient("plus", 0, 0, mode)
            gm[mode] = self.coefficient("minus", 0, 1 if threshold else 0, mode)
        return gp, gm


def _as_mode_dict(g) -> dict:
    if g is None:
        return {}
    if isinstance(g, Mapping):
        return dict(g)
    raise TypeError("leading data must be a mapping mode -> coefficient")


def build_series(
    g_plus: Mapping | None,
    g_minus: Mapping | None,
    params: SpectralParams,
    model: MetricModel | None = None,
    N: int = 4,
    exact: bool = False,
    max_log: int = MAX_LOG_POWER,
) -> PowerLogSeries:
    """Power-log series with leading data ``(g_plus, g_minus)``.

    Parameters
    ----------
    g_plus, g_minus : mapping
        Mode index -> leading coefficient (Fourier index ``k`` on the circle,
        harmonic degree ``l`` on higher spheres).
    params : SpectralParams
    model : MetricModel, optional
        Defaults to the exact normal form (:meth:`MetricModel.product`).
    N : int
        Highest offset ``j`` kept; the residual is ``O(x^{Re s + N + 1})``.
    exact : bool
        Use sympy rationals throughout.  Requires rational roots, an exact
        ``lam`` and rational model coefficients.
    max_log : int
        Largest power of ``log x`` the ladder may allocate.

    Notes
    -----
    In the threshold regime the minus branch is seeded with ``g_minus log x``
    and shares the exponent ``(n-1)/2`` with the plus branch.
    """
    if model is None:
        model = MetricModel.product(params.n)
    if model.n != params.n:
        raise ValueError("model and spectral data disagree on n")
    if not model.separable:
        raise ValueError("series are built for rotation-invariant models only")
    if N < 0:
        raise ValueError("N must be nonnegative")
    gp, gm = _as_mode_dict(g_plus), _as_mode_dict(g_minus)
    modes = sorted(set(gp) | set(gm))
    taylor = mode_operator_taylor(model, max(N, 1))
    if exact:
        lam = sp.Rational(params.lam_exact.numerator, params.lam_exact.denominator)
        conv = sp.nsimplify
    else:
        taylor = tuple(tuple(complex(v) for v in row) for row in taylor)
        lam = complex(params.lam)
        conv = complex

    coeffs = {}
    for mode in modes:
        mu = sphere_eigenvalue(params.n, mode)
        mu = sp.Integer(mu) if exact else complex(mu)
        plans = _branch_plans(params, exact, conv(gp.get(mode, 0)), conv(gm.get(mode, 0)))
        coeffs[mode] = {}
        for branch in BRANCHES:
            plan = plans[branch]
            if all(v == 0 for v in plan.seed):
                zero = sp.Integer(0) if exact else 0j
                coeffs[mode][branch] = [[zero] for _ in range(N + 1)]
                continue
            coeffs[mode][branch] = _recursion(plan, taylor, mu, lam, params.n, N, exact, max_log)

    radius = math.inf if model.family is Family.PRODUCT else 1.0
    return PowerLogSeries(params=params, model=model, N=N, coeffs=coeffs, exact=exact, radius=radius)


@dataclass(frozen=True)
class ResidualFit:
    """Decay of ``|L u_N|`` across a window of ``x``.

    ``status`` is ``"fit"`` for a fitted slope or ``"exact"`` when the residual
    vanishes identically (the series is an exact solution).
    """

    slope: float
    expected: float
    status: str
    x: tuple
    residual: tuple

    @property
    def passed(self) -> bool:
        return self.status == "exact" or self.slope >= self.expected - 0.1


def _mp_residual_mode(series: PowerLogSeries, mode: int, xs, funcs, dps: int):
    A, B, D = funcs
    mu = sphere_eigenvalue(series.params.n, mode)
    lam = mpmath.mpf(series.params.lam)
    out = []
    with mpmath.workdps(dps):
        for xv in xs:
            x = mpmath.mpf(xv)
            L = mpmath.log(x)
            u = th = th2 = mpmath.mpc(0)
            for branch in BRANCHES:
                s0 = series.exponent(branch)
                rows = series.coeffs.get(mode, {}).get(branch, [])
                for j, row in enumerate(rows):
                    sigma = mpmath.mpc(s0.real, s0.imag) + j
                    xs_ = mpmath.exp(sigma * L)
                    for k, val in enumerate(row):
                        if val == 0:
                            continue
                        c = mpmath.mpc(complex(val)) if not isinstance(val, sp.Basic) else mpmath.mpmathify(sp.N(val, dps))
                        Lk = L**k
                        Lk1 = L ** (k - 1) if k >= 1 else 0
                        Lk2 = L ** (k - 2) if k >= 2 else 0
                        u += c * xs_ * Lk
                        th += c * xs_ * (sigma * Lk + k * Lk1)
                        th2 += c * xs_ * (sigma**2 * Lk + 2 * sigma * k * Lk1 + k * (k - 1) * Lk2)
            val = A(x) * th2 + B(x) * th + (mu * D(x) - lam) * u
            out.append(val)
    return out


def series_residual(
    series: PowerLogSeries,
    model: MetricModel | None = None,
    x_window: tuple[float, float] = (1e-3, 1e-1),
    n_points: int = 24,
    dps: int = 60,
) -> ResidualFit:
    """Least-squares slope of ``log |L u_N|`` against ``log x``.

    The operator is applied with its closed-form coefficients (not the
    Taylor data used by the recursion) in extended precision, so the
    cancellation of the first ``N`` orders is measured honestly.

    Raises
    ------
    IllConditioned
        Never propagated: a residual that vanishes identically is reported
        with ``status="exact"``.
    """
    model = model or series.model
    funcs = tuple(sp.lambdify(sp.Symbol("x", positive=True), e, "mpmath") for e in mode_operator_exprs(model))
    xs = np.geomspace(x_window[0], x_window[1], n_points)
    total = np.zeros(n_points)
    for mode in series.modes:
        vals = _mp_residual_mode(series, mode, xs, funcs, dps)
        total += np.array([float(abs(v)) ** 2 for v in vals])
    norm = np.sqrt(total)
    has_minus = any(
        v != 0 for m in series.modes for row in series.coeffs[m]["minus"] for v in row
    )
    base = series.params.s_minus if has_minus else series.params.s_plus
    expected = float(base.real) + series.N + 1
    try:
        if np.all(norm < 10.0 ** (-dps + 10)):
            raise IllConditioned("residual vanishes identically")
    except IllConditioned:
        return ResidualFit(math.inf, expected, "exact", tuple(xs), tuple(norm))
    slope = float(np.polyfit(np.log(xs), np.log(norm), 1)[0])
    return ResidualFit(slope, expected, "fit", tuple(xs), tuple(norm))


def truncate(series: PowerLogSeries, N: int) -> PowerLogSeries:
    """Copy of ``series`` keeping offsets ``j <= N``."""
    if N > series.N:
        raise ValueError("cannot extend a series by truncation")
    coeffs = {m: {b: rows[: N + 1] for b, rows in br.items()} for m, br in series.coeffs.items()}
    return PowerLogSeries(series.params, series.model, N, coeffs, series.exact, series.radius)
