"""Rescaled Hamilton flow of the principal symbol and the classical scattering map.

Phase-space points are written in 0-cotangent form ``xi dx/x + eta dy/x``.
The principal symbol of ``x^2 (Box - lam)`` for ``g = (a dx^2 - b h)/x^2`` is

    p = xi^2 / a - |eta|^2_h / b.

On the characteristic set the flow is traced in the projective fiber
coordinates ``eta_hat = eta / |xi|`` with ``eps = sign(xi)`` stored
separately.  The rescaled field ``W'`` has

    x'       = 2 eps / a,
    y'       = -2 eta_hat / b,
    eta_hat' = (2 |eta_hat|^2 / b) y - eps eta_hat (a'/a^2 - |eta_hat|^2 b'/b^2),

where ``y`` lives on the unit sphere in ``R^n`` and the first term of
``eta_hat'`` keeps ``eta_hat`` tangent to it.  At ``x = 0`` the radial part is
``2 eps d/dx``.

A trajectory leaving one boundary is integrated in three charts: the
0-chart of its own end up to ``x = x_switch`` (with ``x`` as the independent
variable), the conformal chart ``(tau, y)`` of ``d tau^2 - beta(tau) h`` in
the middle (with ``tau`` as the independent variable), and the 0-chart of
the opposite end down to ``x_stop``, followed by linear extrapolation to
``x = 0``.  The characteristic set is re-imposed after every accepted step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvergence
from .models import Family, MetricModel

X_SWITCH = 1.0
X_STOP = 1e-6
RTOL = 1e-10
ATOL = 1e-12
MAX_STEPS = 200_000


@dataclass(frozen=True)
class PhasePoint:
    """Point ``xi dx/x + eta dy/x`` over ``(x, y)``.

    ``y`` is a unit vector in ``R^n`` (a point of ``S^{n-1}``) and ``eta`` an
    ambient vector orthogonal to it.  ``side`` is ``+1`` near ``Y_+`` and
    ``-1`` near ``Y_-``; ``x`` is the boundary defining function of that end.
    """

    x: float
    y: np.ndarray
    xi: float
    eta: np.ndarray
    side: int = 1

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        if self.x < 0:
            raise ValueError("x must be nonnegative")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")

    @classmethod
    def on_circle(cls, x: float, theta: float, xi: float, eta_theta: float, side: int = 1) -> "PhasePoint":
        """Circle point ``theta`` with angular covector component ``eta_theta``."""
        y = np.array([math.cos(theta), math.sin(theta)])
        t = np.array([-math.sin(theta), math.cos(theta)])
        return cls(x, y, xi, eta_theta * t, side)

    @property
    def theta(self) -> float:
        return math.atan2(self.y[1], self.y[0])

    @property
    def eta_theta(self) -> float:
        return float(self.eta @ np.array([-self.y[1], self.y[0]]))

    def symbol(self, model: MetricModel) -> float:
        """Value of ``p = xi^2/a - |eta|^2/b``."""
        a, b = float(model.a(self.x)), float(model.b(self.x))
        return self.xi**2 / a - float(self.eta @ self.eta) / b

    def on_characteristic_set(self, model: MetricModel, tol: float = 1e-8) -> bool:
        scale = max(self.xi**2, float(self.eta @ self.eta), 1e-300)
        return abs(self.symbol(model)) <= tol * scale


@dataclass(frozen=True)
class HamiltonField:
    """Components of the rescaled field ``W'`` in the ``|xi| = 1`` section.

    The fiber is projective: ``dxi`` is identically zero in this section and
    ``deta`` is the derivative of ``eta_hat`` rescaled by ``|xi|``.
    """

    dx: float
    dy: np.ndarray
    dxi: float
    deta: np.ndarray


@dataclass(frozen=True)
class BoundaryData:
    """Limit of a bicharacteristic at a boundary component.

    Arrays may carry a leading batch axis.
    """

    y: np.ndarray
    eta_hat: np.ndarray
    sign_xi: int
    side: int

    @property
    def theta(self):
        return np.arctan2(self.y[..., 1], self.y[..., 0])

    @property
    def eta_theta(self):
        return self.eta_hat[..., 1] * self.y[..., 0] - self.eta_hat[..., 0] * self.y[..., 1]


@dataclass
class Trajectory:
    """Samples of one integrated bicharacteristic."""

    param: list = field(default_factory=list)
    chart: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    xi: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    p_residual: list = field(default_factory=list)
    end: BoundaryData | None = None

    def max_residual(self) -> float:
        return max((abs(v) for v in self.p_residual), default=0.0)

    def write_csv(self, path) -> None:
        dim = len(self.y[0]) if self.y else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "chart", "tau", "x"] + [f"y{i}" for i in range(dim)] + ["xi"]
                       + [f"eta{i}" for i in range(dim)] + ["p_residual"])
            for i in range(len(self.param)):
                w.writerow([repr(float(self.param[i])), self.chart[i], repr(float(self.tau[i])), repr(float(self.x[i]))]
                           + [repr(float(v)) for v in self.y[i]] + [repr(float(self.xi[i]))]
                           + [repr(float(v)) for v in self.eta[i]] + [repr(float(self.p_residual[i]))])


# -- vector fields ---------------------------------------------------------------

def _tangent_project(y, v):
    return v - np.sum(v * y, axis=-1, keepdims=True) * y


def hamilton_field(pt: PhasePoint, model: MetricModel) -> HamiltonField:
    """Rescaled Hamilton field ``W'`` of ``p`` at ``pt``.

    Raises
    ------
    ValueError
        If ``xi = 0`` at ``x = 0``: such points are not on the characteristic
        set near the boundary.
    """
    if pt.xi == 0.0:
        if pt.x == 0.0:
            raise ValueError("xi = 0 at x = 0 lies outside the near-boundary characteristic chart")
        raise ValueError("the projective section |xi| = 1 needs xi != 0")
    eps = 1.0 if pt.xi > 0 else -1.0
    mag = abs(pt.xi)
    eh = pt.eta / mag
    x = pt.x
    a, da, b, db = (float(f(x)) for f in (model.a, model.da, model.b, model.db))
    e2 = float(eh @ eh)
    dx = 2.0 * eps / a
    dy = -2.0 * eh / b
    deh = 2.0 * e2 / b * pt.y - eps * eh * (da / a**2 - e2 * db / b**2)
    return HamiltonField(dx, dy, 0.0, mag * deh)


def _zero_chart_rhs(model: MetricModel, eps: float) -> Callable:
    """``d(y, eta_hat, param)/dx`` along ``W'`` in a 0-chart (``dx/dparam = 2 eps / a``)."""

    def rhs(x, state, direction):
        n = state.shape[1] // 2
        y, eh = state[:, :n], state[:, n:2 * n]
        a, da, b, db = (float(f(x)) for f in (model.a, model.da, model.b, model.db))
        e2 = np.sum(eh * eh, axis=1, keepdims=True)
        dy = -2.0 * eh / b
        deh = 2.0 * e2 / b * y - eps * eh * (da / a**2 - e2 * db / b**2)
        scale = a / (2.0 * eps)
        dparam = np.full((state.shape[0], 1), direction * scale)
        return np.hstack([dy * scale, deh * scale, dparam])

    return rhs


def _zero_chart_project(model: MetricModel):
    def project(x, state):
        n = state.shape[1] // 2
        y = state[:, :n] / np.linalg.norm(state[:, :n], axis=1, keepdims=True)
        eh = _tangent_project(y, state[:, n:2 * n])
        target = math.sqrt(float(model.b(x)) / float(model.a(x)))
        eh = eh * (target / np.linalg.norm(eh, axis=1, keepdims=True))
        return np.hstack([y, eh, state[:, 2 * n:]])

    return project


def _conformal_rhs(model: MetricModel):
    """``d(y, zeta_y, zeta_tau, param)/dtau`` for the null flow of ``d tau^2 - beta h``."""

    def rhs(tau, state, direction):
        n = (state.shape[1] - 2) // 2
        y, zy = state[:, :n], state[:, n:2 * n]
        zt = state[:, 2 * n:2 * n + 1]
        beta, dbeta = (float(v) for v in model.beta_tau(tau))
        z2 = np.sum(zy * zy, axis=1, keepdims=True)
        dtau = 2.0 * zt
        dy = -2.0 * zy / beta
        dzy = 2.0 * z2 / beta * y
        dzt = -z2 * dbeta / beta**2
        return np.hstack([dy / dtau, dzy / dtau, dzt / dtau, direction / dtau])

    return rhs


def _conformal_project(model: MetricModel):
    def project(tau, state):
        n = (state.shape[1] - 2) // 2
        y = state[:, :n] / np.linalg.norm(state[:, :n], axis=1, keepdims=True)
        zy = _tangent_project(y, state[:, n:2 * n])
        beta = float(model.beta_tau(tau)[0])
        zt = np.sign(state[:, 2 * n:2 * n + 1]) * np.linalg.norm(zy, axis=1, keepdims=True) / math.sqrt(beta)
        return np.hstack([y, zy, zt, state[:, 2 * n + 1:]])

    return project


# -- embedded Runge-Kutta pair with projection -----------------------------------

_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_E = _DP_B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def integrate_projected(rhs, t0: float, t1: float, y0: np.ndarray, project, direction: float = 1.0,
                        rtol: float = RTOL, atol: float = ATOL, max_steps: int = MAX_STEPS,
                        h0: float | None = None, record: Callable | None = None) -> np.ndarray:
    """Dormand-Prince 5(4) from ``t0`` to ``t1`` with projection after each accepted step.

    ``y0`` has shape ``(batch, dim)``; all trajectories share the step size
    and the error norm is the worst over the batch.

    Raises
    ------
    NonConvergence
        If ``max_steps`` steps do not reach ``t1``.
    """
    span = t1 - t0
    if span == 0:
        return y0
    sgn = 1.0 if span > 0 else -1.0
    t, y = t0, project(t0, y0)
    h = sgn * (h0 if h0 else min(abs(span), 1e-3))
    k1 = rhs(t, y, direction)
    if record:
        record(t, y)
    for _ in range(max_steps):
        if sgn * (t + h - t1) > 0:
            h = t1 - t
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_DP_A[i], ks) if a)
            ks.append(rhs(t + _DP_C[i] * h, yi, direction))
        y_new = y + h * sum(b * k for b, k in zip(_DP_B, ks) if b)
        err_vec = h * sum(e * k for e, k in zip(_DP_E, ks) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))))
        if err <= 1.0 or abs(h) < 1e-14:
            t = t + h
            y = project(t, y_new)
            k1 = rhs(t, y, direction)
            if record:
                record(t, y)
            if sgn * (t - t1) >= 0:
                return y
            fac = 0.9 * err ** (-0.2) if err > 0 else 5.0
            h = h * min(5.0, max(0.2, fac))
        else:
            h = h * max(0.2, 0.9 * err ** (-0.25))
    raise NonConvergence(f"no convergence to t={t1} within {max_steps} steps (stopped at {t})")


# -- chart transitions -----------------------------------------------------------

def _zero_to_conformal(x, side, eps, y, eh):
    """0-chart data ``(x, y, eps, eta_hat)`` -> conformal data ``(tau, y, zeta_y, zeta_tau)``."""
    tau = side * math.atan2(1.0, x)
    zt = -side * eps * (1.0 + x * x) * np.ones((y.shape[0], 1))
    return tau, np.hstack([y, eh, zt])


def _conformal_to_zero(tau, state):
    n = (state.shape[1] - 2) // 2
    side = 1 if tau > 0 else -1
    x = 1.0 / math.tan(abs(tau))
    y, zy, zt = state[:, :n], state[:, n:2 * n], state[:, 2 * n]
    xi = -side * x * zt / (1.0 + x * x)
    eps_arr = np.sign(xi)
    if not np.all(eps_arr == eps_arr[0]):
        raise NonConvergence("trajectories in the batch reached the boundary with different signs of xi")
    eh = zy * x / np.abs(xi)[:, None]
    return x, side, float(eps_arr[0]), y, eh, state[:, 2 * n + 1:]


def _p_res_zero(model, x, eh):
    a, b = float(model.a(x)), float(model.b(x))
    return 1.0 / a - np.sum(eh * eh, axis=1) / b


def _p_res_conf(model, tau, zy, zt):
    beta = float(model.beta_tau(tau)[0])
    return (zt[:, 0] ** 2 - np.sum(zy * zy, axis=1) / beta) / zt[:, 0] ** 2


def _flow_batch(x0: float, side: int, eps: float, y: np.ndarray, eh: np.ndarray, model: MetricModel,
                direction: int, x_switch: float, x_stop: float, trajectories: list | None):
    """Integrate a batch of points sharing ``(x0, side, eps)`` to the boundary."""
    m, n = y.shape
    param = np.zeros((m, 1))
    inward = direction * eps > 0

    def recorder(chart, conv):
        if trajectories is None:
            return None

        def rec(t, state):
            for i, tr in enumerate(trajectories):
                tr.chart.append(chart)
                data = conv(t, state)
                for key, val in data.items():
                    getattr(tr, key).append(val[i] if np.ndim(val) else val)
        return rec

    def zero_conv(s_side, s_eps):
        def conv(x, state):
            tau = s_side * math.atan2(1.0, x)
            return {
                "param": state[:, 2 * n], "tau": tau, "x": x, "y": state[:, :n].copy(),
                "xi": s_eps, "eta": state[:, n:2 * n].copy(),
                "p_residual": _p_res_zero(model, x, state[:, n:2 * n]),
            }
        return conv

    def conf_conv(tau, state):
        return {
            "param": state[:, 2 * n + 1], "tau": tau, "x": abs(1.0 / math.tan(tau)) if tau else math.inf,
            "y": state[:, :n].copy(), "xi": state[:, 2 * n].copy(), "eta": state[:, n:2 * n].copy(),
            "p_residual": _p_res_conf(model, tau, state[:, n:2 * n], state[:, 2 * n:2 * n + 1]),
        }

    if inward:
        if x0 > x_switch:
            raise ValueError(f"start x={x0} lies beyond the 0-chart (x <= {x_switch})")
        if not model.has_global_extension:
            raise ValueError("crossing to the other boundary needs a global model")
        state = np.hstack([y, eh, param])
        state = integrate_projected(_zero_chart_rhs(model, eps), x0, x_switch, state, _zero_chart_project(model),
                                    direction, record=recorder(f"zero{side:+d}", zero_conv(side, eps)))
        y, eh, param = state[:, :n], state[:, n:2 * n], state[:, 2 * n:]
        tau0, cstate = _zero_to_conformal(x_switch, side, eps, y, eh)
        cstate = np.hstack([cstate, param])
        cstate = integrate_projected(_conformal_rhs(model), tau0, -tau0, cstate, _conformal_project(model),
                                     direction, record=recorder("conformal", conf_conv))
        x0, side, eps, y, eh, param = _conformal_to_zero(-tau0, cstate)
        eh = eh * math.sqrt(float(model.b(x0)) / float(model.a(x0))) / np.linalg.norm(eh, axis=1, keepdims=True)

    # outward leg to the boundary of the current side
    state = np.hstack([y, eh, param])
    rhs = _zero_chart_rhs(model, eps)
    project = _zero_chart_project(model)
    state = integrate_projected(rhs, x0, x_stop, state, project, direction,
                                record=recorder(f"zero{side:+d}", zero_conv(side, eps)))
    slope = rhs(x_stop, state, direction)
    limit = project(0.0, state - x_stop * slope)
    end = BoundaryData(limit[:, :n], limit[:, n:2 * n], int(eps), side)
    return end


def _as_batch(y, eta):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    return y, eta


def integrate_bicharacteristic(start: PhasePoint, model: MetricModel, direction: int = 1,
                               x_switch: float = X_SWITCH, x_stop: float = X_STOP) -> Trajectory:
    """Follow the bicharacteristic through ``start`` until it reaches the boundary.

    Parameters
    ----------
    start : PhasePoint
        Point on the characteristic set with ``x <= x_switch``.
    direction : {+1, -1}
        Follow ``W'`` forward or backward.  If ``direction * sign(xi) > 0``
        the curve moves into the interior and crosses to the opposite end.

    Returns
    -------
    Trajectory
        Samples along the curve and the limiting boundary data ``end``.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    hamilton_field(start, model)  # validates xi
    if not start.on_characteristic_set(model, tol=1e-6):
        raise ValueError(f"start point is off the characteristic set (p = {start.symbol(model):.3e})")
    eps = 1.0 if start.xi > 0 else -1.0
    y, eta = _as_batch(start.y, start.eta / abs(start.xi))
    traj = Trajectory()
    traj.end = _flow_batch(start.x, start.side, eps, y, eta, model, direction, x_switch, x_stop, [traj])
    traj.end = BoundaryData(traj.end.y[0], traj.end.eta_hat[0], traj.end.sign_xi, traj.end.side)
    return traj


def _normalize_boundary(y, eta):
    y = y / np.linalg.norm(y, axis=-1, keepdims=True)
    eta = _tangent_project(y, eta)
    norm = np.linalg.norm(eta, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("boundary covector must be nonzero")
    return y, eta / norm


def classical_scattering_map(q, model: MetricModel) -> BoundaryData:
    """Map boundary data on ``S*_+ Y_+`` to its image on ``S*_- Y_-``.

    ``q`` is a :class:`BoundaryData` or a pair ``(y, eta_hat)`` of arrays
    (a leading batch axis is allowed).  The covector is normalized to unit
    ``h``-length on input and output.
    """
    if isinstance(q, BoundaryData):
        y, eta = q.y, q.eta_hat
        if q.side != 1 or q.sign_xi != 1:
            raise ValueError("input must lie over Y_+ with xi > 0")
    else:
        y, eta = q
    single = np.ndim(y) == 1
    y, eta = _normalize_boundary(*_as_batch(y, eta))
    end = _flow_batch(0.0, 1, 1.0, y, eta, model, 1, X_SWITCH, X_STOP, None)
    yo, eo = _normalize_boundary(end.y, end.eta_hat)
    if single:
        yo, eo = yo[0], eo[0]
    return BoundaryData(yo, eo, end.sign_xi, end.side)


def reverse_scattering_map(q, model: MetricModel) -> BoundaryData:
    """Inverse map ``S*_- Y_- -> S*_+ Y_+`` obtained by running the flow backward."""
    if isinstance(q, BoundaryData):
        y, eta = q.y, q.eta_hat
    else:
        y, eta = q
    single = np.ndim(y) == 1
    y, eta = _normalize_boundary(*_as_batch(y, eta))
    end = _flow_batch(0.0, -1, -1.0, y, eta, model, -1, X_SWITCH, X_STOP, None)
    yo, eo = _normalize_boundary(end.y, end.eta_hat)
    if single:
        yo, eo = yo[0], eo[0]
    return BoundaryData(yo, eo, end.sign_xi, end.side)


def angular_shift_reference(model: MetricModel) -> float:
    """``int_{-pi/2}^{pi/2} d tau / sqrt(beta(tau))``: angle swept by a null curve.

    Independent quadrature of the null condition ``d tau^2 = beta d theta^2``.
    """
    from scipy.integrate import quad

    val, _ = quad(lambda t: 1.0 / math.sqrt(float(model.beta_tau(t)[0])), -math.pi / 2, math.pi / 2,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def circle_points(thetas: Sequence[float], eta_sign: float = 1.0):
    """Boundary data ``(y, eta_hat)`` for angles on the circle with ``eta_theta = eta_sign``."""
    th = np.asarray(thetas, dtype=float)
    y = np.stack([np.cos(th), np.sin(th)], axis=1)
    t = np.stack([-np.sin(th), np.cos(th)], axis=1)
    return y, eta_sign * t
