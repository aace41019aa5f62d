"""Finite-difference evolution of ``(Box - lam) u = 0`` on global (warped) de Sitter, ``n = 2``.

Coordinates are ``rho = asinh t`` and ``theta``.  The metric is
``d rho^2 - cosh^2(rho) beta(rho, theta) d theta^2``, so

    u_rr = -(tanh rho + beta_r / (2 beta)) u_r
           + (cosh^2 rho sqrt(beta))^{-1} d_theta(beta^{-1/2} u_theta) - lam u.

The time step is classical RK4 and the angular derivatives are fourth-order
periodic differences.  Near either end the boundary defining function is
``x = 1/|sinh rho|``, and evolution stops at ``x = delta`` without ever
touching the degenerate boundary.  The compactified time is ``T = tanh rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import least_squares

from .errors import BlowUp, CFLViolation, RankDeficient
from .expansion import PowerLogSeries, build_series
from .models import Family, MetricModel
from .spectral import Regime, SpectralParams

# imaginary-axis stability limit of RK4 over the largest eigenvalue of the
# fourth-order second-difference operator, sqrt(16/3) / h
RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)
CFL_LIMIT = RK4_IMAG_LIMIT / math.sqrt(16.0 / 3.0)
BLOWUP_GUARD = 1e8


@dataclass(frozen=True)
class MeshSpec:
    """Angular resolution, Courant number and boundary offset ``delta``."""

    n_theta: int = 256
    cfl: float = 0.5
    x_min: float = 1e-3

    def __post_init__(self):
        if self.n_theta < 8:
            raise ValueError("n_theta must be at least 8")
        if self.cfl <= 0:
            raise ValueError("cfl must be positive")
        if not 0 < self.x_min < 1:
            raise ValueError("x_min must lie in (0, 1)")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.h

    @property
    def rho_max(self) -> float:
        return math.asinh(1.0 / self.x_min)

    def refined(self, factor: int = 2) -> "MeshSpec":
        return MeshSpec(self.n_theta * factor, self.cfl, self.x_min)


@dataclass(frozen=True)
class GridField:
    """Evolution history ``u(rho_i, theta_j)`` with ``rho`` increasing."""

    rho: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    u_rho: np.ndarray
    mesh: MeshSpec
    params: SpectralParams
    model: MetricModel
    cfl_ratio: float

    @property
    def T(self) -> np.ndarray:
        return np.tanh(self.rho)

    @property
    def x(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 1.0 / np.abs(np.sinh(self.rho))

    @property
    def delta(self) -> float:
        return self.mesh.x_min

    def modes(self) -> np.ndarray:
        """Complex coefficients of ``e^{ik theta}``, ``k = 0..n_theta/2``, per row."""
        return np.fft.rfft(self.u, axis=1) / self.u.shape[1]

    def slice_at(self, rho: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.rho - rho)))
        return self.u[i]

    def energy(self) -> np.ndarray:
        """``(1/2) int (u_r^2 + |u_theta|^2 / (cosh^2 beta) + lam u^2) cosh sqrt(beta) dtheta`` per row."""
        beta, _, _ = _beta(self.model, self.rho[:, None], self.theta[None, :])
        ut = _d1(self.u, self.mesh.h)
        c = np.cosh(self.rho)[:, None]
        lam = float(np.real(self.params.lam))
        dens = self.u_rho**2 + ut**2 / (c**2 * beta) + lam * self.u**2
        return 0.5 * np.sum(dens * c * np.sqrt(beta), axis=1) * self.mesh.h

    def write_csv(self, path, every: int = 1) -> None:
        rows = np.column_stack([self.rho, self.T, self.u])[::every]
        head = "rho,T," + ",".join(f"u_{j}" for j in range(self.u.shape[1]))
        np.savetxt(path, rows, delimiter=",", header=head, comments="")


def _beta(model: MetricModel, rho, theta):
    if model.family is Family.EXACT_DE_SITTER:
        one = np.ones(np.broadcast(rho, theta).shape)
        return one, 0 * one, 0 * one
    b, br, bt = model.beta_rho(rho, theta)
    shape = np.broadcast(rho, theta).shape
    return (np.broadcast_to(b, shape), np.broadcast_to(br, shape), np.broadcast_to(bt, shape))


def _d1(u, h):
    return (-np.roll(u, -2, -1) + 8 * np.roll(u, -1, -1) - 8 * np.roll(u, 1, -1) + np.roll(u, 2, -1)) / (12 * h)


def _d2(u, h):
    return (-np.roll(u, -2, -1) + 16 * np.roll(u, -1, -1) - 30 * u + 16 * np.roll(u, 1, -1)
            - np.roll(u, 2, -1)) / (12 * h * h)


def _rhs_factory(model: MetricModel, lam: float, mesh: MeshSpec) -> Callable:
    h = mesh.h
    theta = mesh.theta
    angular = bool(model.eps_angular) and model.family is Family.WARPED_PERTURBATION

    def rhs(rho, u, v):
        c = math.cosh(rho)
        beta, beta_r, _ = _beta(model, rho, theta)
        damp = math.tanh(rho) + beta_r / (2 * beta)
        if angular:
            sb = np.sqrt(beta)
            lap = _d1(_d1(u, h) / sb, h) / (c * c * sb)
        else:
            lap = _d2(u, h) / (c * c * beta)
        return v, -damp * v + lap - lam * u

    return rhs


def max_wave_speed(model: MetricModel) -> float:
    """Upper bound for ``sech(rho) / sqrt(beta)``."""
    if model.family is Family.EXACT_DE_SITTER:
        return 1.0
    lo = (1 - abs(model.eps)) * (1 - abs(model.eps_angular))
    if lo <= 0:
        raise ValueError("warp factor must stay positive")
    return 1.0 / math.sqrt(lo)


def _evolve(u0, v0, rho0, rho1, model, lam, mesh):
    speed = max_wave_speed(model)
    d_max = mesh.cfl * mesh.h / speed
    if mesh.cfl > CFL_LIMIT:
        raise CFLViolation(f"cfl {mesh.cfl} exceeds the RK4/fourth-order bound {CFL_LIMIT:.3f}")
    span = rho1 - rho0
    steps = max(1, math.ceil(abs(span) / d_max))
    dr = span / steps
    rhs = _rhs_factory(model, lam, mesh)
    us = np.empty((steps + 1, mesh.n_theta))
    vs = np.empty_like(us)
    u, v = np.array(u0, dtype=float), np.array(v0, dtype=float)
    us[0], vs[0] = u, v
    rho = rho0
    for i in range(steps):
        k1u, k1v = rhs(rho, u, v)
        k2u, k2v = rhs(rho + dr / 2, u + dr / 2 * k1u, v + dr / 2 * k1v)
        k3u, k3v = rhs(rho + dr / 2, u + dr / 2 * k2u, v + dr / 2 * k2v)
        k4u, k4v = rhs(rho + dr, u + dr * k3u, v + dr * k3v)
        u = u + dr / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + dr / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        rho = rho0 + (i + 1) * dr
        peak = np.max(np.abs(u))
        if not np.isfinite(peak) or peak > BLOWUP_GUARD:
            raise BlowUp(f"sup|u| = {peak:.3g} at rho = {rho:.4f}")
        us[i + 1], vs[i + 1] = u, v
    rhos = rho0 + dr * np.arange(steps + 1)
    return rhos, us, vs, abs(dr) * speed / mesh.h


def _lam_real(params: SpectralParams) -> float:
    lam = complex(params.lam)
    if abs(lam.imag) > 0:
        raise ValueError("the evolution needs real lambda")
    return lam.real


def evolve_cauchy(psi0, psi1, t0: float, model: MetricModel, params: SpectralParams,
                  mesh: MeshSpec | None = None) -> GridField:
    """Evolve Cauchy data given on ``T = t0`` toward both boundaries.

    Parameters
    ----------
    psi0, psi1 : callable or array_like
        Values of ``u`` and of ``V u`` on the slice, where ``V = d/d rho`` is
        the unit future normal (the ``dT`` direction, normalized).
    t0 : float
        Compactified time ``T = tanh rho`` of the initial slice.
    """
    mesh = mesh or MeshSpec()
    if model.n != 2 or params.n != 2:
        raise ValueError("PDE evolution is implemented for n = 2 only")
    T_edge = math.tanh(mesh.rho_max)
    if not -T_edge < t0 < T_edge:
        raise ValueError(f"t0 = {t0} must lie strictly inside (-{T_edge}, {T_edge})")
    th = mesh.theta
    u0 = psi0(th) if callable(psi0) else np.broadcast_to(np.asarray(psi0, float), th.shape)
    v0 = psi1(th) if callable(psi1) else np.broadcast_to(np.asarray(psi1, float), th.shape)
    rho0 = math.atanh(t0)
    lam = _lam_real(params)
    rf, uf, vf, c1 = _evolve(u0, v0, rho0, mesh.rho_max, model, lam, mesh)
    rb, ub, vb, c2 = _evolve(u0, v0, rho0, -mesh.rho_max, model, lam, mesh)
    rho = np.concatenate([rb[::-1], rf[1:]])
    u = np.concatenate([ub[::-1], uf[1:]])
    v = np.concatenate([vb[::-1], vf[1:]])
    return GridField(rho, th, u, v, mesh, params, model, max(c1, c2))


def evolve_from_boundary(g_plus: Mapping, g_minus: Mapping, params: SpectralParams,
                         model: MetricModel | None = None, mesh: MeshSpec | None = None,
                         order: int = 16) -> GridField:
    """Seed Cauchy data from the series at ``x = delta`` near ``Y_+`` and evolve to ``Y_-``.

    Mode data maps ``k >= 0`` to the coefficient of ``e^{ik theta}``; the
    field is real, so ``k > 0`` also carries the conjugate mode.
    """
    model = model or MetricModel.exact(2)
    mesh = mesh or MeshSpec()
    x0 = mesh.x_min
    u0, v0 = seed_from_series(g_plus, g_minus, params, model, mesh, x0, order)
    lam = _lam_real(params)
    rho, u, v, cfl = _evolve(u0, v0, mesh.rho_max, -mesh.rho_max, model, lam, mesh)
    return GridField(rho[::-1], mesh.theta, u[::-1], v[::-1], mesh, params, model, cfl)


def seed_from_series(g_plus: Mapping, g_minus: Mapping, params, model, mesh, x0, order=16):
    """Cauchy data ``(u, u_rho)`` at ``rho = asinh(1/x0)`` from the frames."""
    th = mesh.theta
    u0 = np.zeros(mesh.n_theta)
    v0 = np.zeros(mesh.n_theta)
    dx_drho = -x0 * math.sqrt(1 + x0 * x0)
    for k in sorted(set(g_plus) | set(g_minus)):
        fp, fm = frames(params, model, int(k), order)
        gp, gm = complex(g_plus.get(k, 0.0)), complex(g_minus.get(k, 0.0))
        xa = np.array([x0])
        f = gp * complex(fp.evaluate_mode(xa, k)[0]) + gm * complex(fm.evaluate_mode(xa, k)[0])
        df = gp * complex(fp.evaluate_mode(xa, k, 1)[0]) + gm * complex(fm.evaluate_mode(xa, k, 1)[0])
        wave = np.exp(1j * k * th)
        mult = 1.0 if k == 0 else 2.0
        u0 += mult * np.real(f * wave)
        v0 += mult * np.real(df * dx_drho * wave)
    return u0, v0


@lru_cache(maxsize=256)
def frames(params: SpectralParams, model: MetricModel, mode: int, order: int = 16
           ) -> tuple[PowerLogSeries, PowerLogSeries]:
    """Series frames ``F_+`` and ``F_-`` of one mode for a separable model."""
    if not model.separable:
        raise ValueError("series frames need a separable model")
    return (build_series({mode: 1.0}, {}, params, model, N=order),
            build_series({}, {mode: 1.0}, params, model, N=order))


# -- asymptotic fits ---------------------------------------------------------------------

@dataclass
class FitReport:
    """Per-mode asymptotic fit on one side."""

    side: int
    mode: int
    g_plus: complex
    g_minus: complex
    exp_plus_fit: float
    exp_minus_fit: float
    log_flag: bool
    residual: float
    residual_pure: float
    residual_log: float
    condition: float

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, complex):
                out[k] = {"re": v.real, "im": v.imag}
            elif isinstance(v, (bool, np.bool_)):
                out[k] = bool(v)
            else:
                out[k] = v
        out["side"] = "Y+" if self.side > 0 else "Y-"
        return out


@dataclass
class AsymptoticFit:
    side: int
    reports: dict = field(default_factory=dict)

    def __getitem__(self, k) -> FitReport:
        return self.reports[k]


def _window(field_: GridField, side: int, window: tuple[float, float]):
    x = field_.x
    lo, hi = window
    mask = (np.sign(field_.rho) == side) & (x >= lo * (1 - 1e-12)) & (x <= hi)
    if mask.sum() < 8:
        raise RankDeficient(f"only {int(mask.sum())} samples in the fit window", math.inf)
    return mask, x[mask]


def _lsq(cols: np.ndarray, data: np.ndarray):
    """Column-scaled least squares; returns coefficients, relative residual, condition."""
    scale = np.linalg.norm(cols, axis=0)
    scale[scale == 0] = 1.0
    A = cols / scale
    coef, *_ = np.linalg.lstsq(A, data, rcond=None)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    res = np.linalg.norm(A @ coef - data) / max(np.linalg.norm(data), 1e-300)
    return coef / scale, float(res), cond


def _power_columns(x, exponents, J, log_from=None):
    cols = []
    for e in exponents:
        for j in range(J + 1):
            cols.append(x ** (e + j))
    if log_from is not None:
        for j in range(J + 1):
            cols.append(x ** (log_from + j) * np.log(x))
    return np.column_stack(cols)


def _distinct(exps, tol=1e-9):
    out = []
    for e in exps:
        if all(abs(e - f) > tol for f in out):
            out.append(e)
    return out


def log_test(x, data, params: SpectralParams, J: int = 4, ratio: float = 10.0, significance: float = 1e-3):
    """Compare pure-power and log-augmented fits of one mode profile.

    The pure basis is ``x^{s_pm + j}``, ``j <= J``; the augmented basis adds
    ``x^{s_- + j} log x``.  The flag needs both a residual drop by ``ratio``
    and a log coefficient of relative size at least ``significance``.
    """
    exps = _distinct([float(np.real(params.s_plus)), float(np.real(params.s_minus))])
    pure = _power_columns(x, exps, J)
    c_pure, r_pure, _ = _lsq(pure, data)
    aug = _power_columns(x, exps, J, log_from=float(np.real(params.s_minus)))
    c_aug, r_aug, cond = _lsq(aug, data)
    n_pow = len(exps) * (J + 1)
    lead = np.abs(c_aug[[i * (J + 1) for i in range(len(exps))]]).max()
    c_log = abs(c_aug[n_pow])
    significant = c_log > significance * max(lead, 1e-300)
    flag = bool(r_pure >= ratio * max(r_aug, 1e-300) and significant)
    return flag, r_pure, r_aug, cond


def free_exponent_fit(x, data, guess: tuple[float, float], J: int = 3):
    """Variable-projection fit of ``sum_j a_j x^{e1+j} + b_j x^{e2+j}`` over ``(e1, e2)``."""
    def resid(e):
        cols = _power_columns(x, [e[0], e[1]], J)
        scale = np.linalg.norm(cols, axis=0)
        A = cols / scale
        coef, *_ = np.linalg.lstsq(A, data, rcond=None)
        r = A @ coef - data
        return np.concatenate([r.real, r.imag]) if np.iscomplexobj(r) else r

    sol = least_squares(resid, np.asarray(guess, float), xtol=1e-14, ftol=1e-14, gtol=1e-14)
    e1, e2 = sorted(sol.x, reverse=True)
    return float(e1), float(e2)


def fit_asymptotics(field_: GridField, side: int, params: SpectralParams | None = None,
                    modes=None, window: tuple[float, float] | None = None,
                    free_exponents: bool = True, order: int = 16) -> AsymptoticFit:
    """Fit the leading data ``(g_+, g_-)`` on ``Y_side`` mode by mode.

    Separable models use the series frames of the mode (exact up to
    truncation); otherwise the leading coefficients of a power basis in
    ``x^{s_pm + j}`` are returned.  Exponents are also fitted freely as a
    consistency check, and a log term is tested for.

    Raises
    ------
    RankDeficient
        When the frame columns are numerically dependent in the window.
    """
    params = params or field_.params
    model = field_.model
    delta = field_.delta
    window = window or (delta, 100 * delta)
    mask, x = _window(field_, side, window)
    coeffs = field_.modes()[mask]
    if modes is None:
        amp = np.abs(coeffs).max(axis=0)
        modes = [int(k) for k in np.nonzero(amp > 1e-10 * max(amp.max(), 1e-300))[0]]
    out = AsymptoticFit(side)
    sp_, sm_ = float(np.real(params.s_plus)), float(np.real(params.s_minus))
    for k in modes:
        data = coeffs[:, k]
        if model.separable:
            fp, fm = frames(params, model, k, order)
            cols = np.column_stack([fp.evaluate_mode(x, k), fm.evaluate_mode(x, k)])
            c, res, cond = _lsq(cols, data)
            gp, gm = complex(c[0]), complex(c[1])
        else:
            exps = _distinct([sp_, sm_])
            cols = _power_columns(x, exps, 4)
            c, res, cond = _lsq(cols, data)
            gp = complex(c[0])
            gm = complex(c[5]) if len(exps) > 1 else 0j
        if cond > 1e13:
            raise RankDeficient(f"frame fit for mode {k} is degenerate", cond)
        if params.regime is Regime.COMPLEX_ROOTS or not free_exponents:
            e1 = e2 = math.nan
        else:
            guess = (sp_ + 0.05, sm_ - 0.05) if sp_ - sm_ > 1e-6 else (sm_ + 0.2, sm_ - 0.2)
            e1, e2 = free_exponent_fit(x, data, guess)
        if params.regime is Regime.COMPLEX_ROOTS:
            flag, rp, ra = False, res, res
        else:
            flag, rp, ra, _ = log_test(x, data, params)
        out.reports[k] = FitReport(side, k, gp, gm, e1, e2, flag, res, rp, ra, cond)
    return out


# -- composite maps -----------------------------------------------------------------------

def scattering_via_cauchy(g_plus: Mapping, g_minus: Mapping, params: SpectralParams,
                          model: MetricModel | None = None, mesh: MeshSpec | None = None,
                          modes=None) -> dict:
    """Numerical ``(v_+|_{Y_-}, v_-|_{Y_-})`` per mode from data at ``Y_+``."""
    fld = evolve_from_boundary(g_plus, g_minus, params, model, mesh)
    modes = modes if modes is not None else sorted(set(g_plus) | set(g_minus))
    fit = fit_asymptotics(fld, -1, params, modes=modes, free_exponents=False)
    return {k: (fit[k].g_plus, fit[k].g_minus) for k in modes}


def pde_connection_matrices(k_max: int, params: SpectralParams, model: MetricModel | None = None,
                            mesh: MeshSpec | None = None) -> dict:
    """All ``2 x 2`` blocks for ``k <= k_max`` from two evolutions."""
    ks = list(range(k_max + 1))
    one = {k: 1.0 for k in ks}
    col_p = scattering_via_cauchy(one, {}, params, model, mesh, ks)
    col_m = scattering_via_cauchy({}, one, params, model, mesh, ks)
    return {k: np.array([[col_p[k][0], col_m[k][0]], [col_p[k][1], col_m[k][1]]]) for k in ks}


def mode_leakage(field_: GridField, seeded_modes) -> float:
    """Largest unseeded mode amplitude relative to the largest seeded one."""
    c = np.abs(field_.modes())
    seeded = list(seeded_modes)
    others = [k for k in range(c.shape[1]) if k not in seeded]
    return float(c[:, others].max() / c[:, seeded].max())


@dataclass
class DecayReport:
    order: int
    offsets: list
    interior_sup: list
    fitted_exponent: float
    expected_exponent: float
    control_sup: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def decay_uniqueness_probe(params: SpectralParams, order: int, offsets=(8e-3, 4e-3, 2e-3, 1e-3),
                           model: MetricModel | None = None, mesh: MeshSpec | None = None,
                           profile: Callable | None = None) -> DecayReport:
    """Interior size of solutions seeded with vanishing leading data.

    For each offset ``eps`` the Cauchy data at ``x = eps`` is the function
    ``x^{s_- + N} phi(theta)`` (value and ``rho``-derivative), which has
    ``(g_+, g_-) = (0, 0)`` through order ``N``.  The field is evolved to
    ``T = 0`` and ``sup |u|`` there is fitted against ``eps``.  A control run
    seeded with ``g_- = phi`` gives an ``O(1)`` interior field.
    """
    model = model or MetricModel.exact(2)
    mesh = mesh or MeshSpec()
    phi = profile or (lambda th: np.cos(th) + 0.5 * np.sin(2 * th))
    lam = _lam_real(params)
    sm = float(np.real(params.s_minus))
    p = sm + order
    sups = []
    for eps in offsets:
        m = MeshSpec(mesh.n_theta, mesh.cfl, eps)
        th = m.theta
        dx_drho = -eps * math.sqrt(1 + eps * eps)
        u0 = eps**p * phi(th)
        v0 = p * eps ** (p - 1) * dx_drho * phi(th)
        _, u, _, _ = _evolve(u0, v0, m.rho_max, 0.0, model, lam, m)
        sups.append(float(np.max(np.abs(u[-1]))))
    slope = float(np.polyfit(np.log(offsets), np.log(sups), 1)[0])
    g_ctrl = {k: c for k, c in _modes_of(phi, mesh).items()}
    ctrl = evolve_from_boundary({}, g_ctrl, params, model, mesh)
    ctrl_sup = float(np.max(np.abs(ctrl.slice_at(0.0))))
    return DecayReport(order, list(offsets), sups, slope, sm + order, ctrl_sup)


def _modes_of(phi: Callable, mesh: MeshSpec, tol: float = 1e-12) -> dict:
    c = np.fft.rfft(phi(mesh.theta)) / mesh.n_theta
    return {k: complex(v) for k, v in enumerate(c) if abs(v) > tol}
