"""Flat-model Poisson kernel and its normalization.

The kernel is ``C_s x^s (1 - |y - y'|^2 / x^2)_+^s`` on ``(0, inf) x R^{n-1}``
(or a torus), with ``s`` one of the shifted roots.  Substituting
``y' = y - x Y`` turns ``E g`` into ``C_s x^{s+n-1} <(1 - |Y|^2)_+^s, g(y - x Y)>``,
so the leading coefficient is ``g`` once ``C_s`` is the reciprocal of the
pairing of the kernel profile with ``1``.

Everything is organized around the entire function

    J_s(phi) = <(1 - |Y|^2)_+^s / Gamma(s + 1), phi>,

which at ``s = -k`` is the pairing with ``delta^{(k-1)}(1 - |Y|^2)``.  For
``Re s > -1`` it is an ordinary integral, reduced to one dimension and
evaluated by Gauss-Jacobi quadrature.  Below that the divergence identity

    J_s(phi) = ((n + 1 + 2 s) J_{s+1}(phi) + J_{s+1}(Y . grad phi)) / 2

continues it, exactly as repeated integration by parts in ``|Y|^2`` would.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import gamma as _gamma, roots_jacobi

from .errors import QuadratureDivergence, ZeroPairing
from .spectral import SpectralParams

_INT_TOL = 1e-12


class KernelBranch(str, Enum):
    POWER_LAW = "PowerLaw"
    DELTA_DERIVATIVE = "DeltaDerivative"


def sphere_area(dim: int) -> float:
    """Area of the unit sphere ``S^dim`` (``S^0`` has two points)."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / math.gamma((dim + 1) / 2)


def _negative_integer(s: complex) -> int | None:
    s = complex(s)
    if abs(s.imag) > _INT_TOL:
        return None
    k = round(-s.real)
    if k >= 1 and abs(s.real + k) < _INT_TOL:
        return int(k)
    return None


def _falling(a: float, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= a - i
    return out


def _cgamma(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0.0:
        return complex(_gamma(z.real))
    return complex(mpmath.gamma(mpmath.mpc(z.real, z.imag)))


def _crgamma(z: complex) -> complex:
    """``1 / Gamma(z)`` as an entire function."""
    z = complex(z)
    return complex(mpmath.rgamma(mpmath.mpc(z.real, z.imag)))


def normalized_pairing(s: complex, n: int) -> complex:
    """``J_s(1)``: the kernel profile paired with 1, divided by ``Gamma(s+1)``."""
    c = sphere_area(n - 2)
    h = (n - 1) / 2
    k = _negative_integer(s)
    if k is not None:
        return complex(0.5 * c * _falling(h - 1.0, k - 1))
    return 0.5 * c * math.gamma(h) * _crgamma(h + complex(s) + 1)


def _check_pairing_nonzero(s: complex, n: int):
    z = (n - 1) / 2 + complex(s)
    if abs(z.imag) < _INT_TOL and z.real < 0 and abs(z.real - round(z.real)) < _INT_TOL:
        raise ZeroPairing(
            f"pairing vanishes at s={complex(s)} for n={n}: s + (n-1)/2 is a negative integer"
        )


def pairing_constant(s: complex, n: int) -> complex:
    """Pairing of the kernel profile with the constant function 1.

    Power-law branch: ``<(1-|Y|^2)_+^s, 1> = c_{n-2} Gamma((n-1)/2) Gamma(s+1) / (2 Gamma((n-1)/2 + s + 1))``
    with ``c_{n-2}`` the area of ``S^{n-2}``.  At ``s = -k`` the profile is
    ``delta^{(k-1)}(1 - |Y|^2)`` and the pairing is the limit of the
    power-law value divided by ``Gamma(s+1)``.

    Raises
    ------
    ZeroPairing
        When ``s + (n-1)/2`` is a negative integer.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    _check_pairing_nonzero(s, n)
    if _negative_integer(s) is not None:
        return normalized_pairing(s, n)
    c = sphere_area(n - 2)
    h = (n - 1) / 2
    return 0.5 * c * math.gamma(h) * _cgamma(complex(s) + 1) * _crgamma(h + complex(s) + 1)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel exponent, branch and normalization."""

    s: complex
    n: int
    branch: KernelBranch
    C_s: complex

    @classmethod
    def from_exponent(cls, s: complex, n: int) -> "KernelSpec":
        branch = KernelBranch.DELTA_DERIVATIVE if _negative_integer(s) is not None else KernelBranch.POWER_LAW
        return cls(complex(s), n, branch, 1.0 / pairing_constant(s, n))

    @classmethod
    def from_params(cls, params: SpectralParams, sign: str = "+") -> "KernelSpec":
        s = params.s_hat_plus if sign == "+" else params.s_hat_minus
        return cls.from_exponent(s, params.n)

    @property
    def leading_power(self) -> complex:
        """Power of ``x`` multiplying the boundary data: ``s + n - 1``."""
        return self.s + self.n - 1


def kernel_value(spec: KernelSpec, x, displacement) -> np.ndarray:
    """Pointwise kernel ``C_s x^s (1 - |d|^2/x^2)_+^s`` (power-law branch only)."""
    if spec.branch is KernelBranch.DELTA_DERIVATIVE:
        raise ValueError("the delta-derivative kernel has no pointwise values")
    x = np.asarray(x, dtype=float)
    d = np.atleast_1d(np.asarray(displacement, dtype=float))
    d2 = np.sum(d * d, axis=-1) if d.ndim > 1 or spec.n > 2 else d * d
    z = 1.0 - d2 / x**2
    inside = z > 0
    val = np.zeros(np.broadcast(x, z).shape, dtype=complex)
    zz = np.where(inside, z, 1.0)
    val = np.where(inside, spec.C_s * np.power(x + 0j, spec.s) * np.power(zz + 0j, spec.s), 0.0)
    return val


# -- J_s on functions of Y_1 ------------------------------------------------------

@dataclass(frozen=True)
class _TrigPoly:
    """``P(u) cos u + Q(u) sin u`` with ``u = r Y_1``; the Euler operator acts on ``(P, Q)``."""

    p: np.ndarray
    q: np.ndarray

    def euler(self) -> "_TrigPoly":
        # u d/du (P cos u + Q sin u) = u (P' + Q) cos u + u (Q' - P) sin u
        dp, dq = P.polyder(self.p) if len(self.p) > 1 else np.zeros(1), P.polyder(self.q) if len(self.q) > 1 else np.zeros(1)
        new_p = P.polymulx(P.polyadd(dp, self.q))
        new_q = P.polymulx(P.polysub(dq, self.p))
        return _TrigPoly(new_p, new_q)

    def __call__(self, u):
        return P.polyval(u, self.p) * np.cos(u) + P.polyval(u, self.q) * np.sin(u)


def _jacobi_moment(s: complex, n: int, phi: _TrigPoly, r: float, order: int) -> complex:
    """``J_s(phi(r Y_1))`` for ``Re s > -1`` via a one-dimensional reduction.

    ``int_ball (1-|Y|^2)^s F(Y_1) dY = pi^{(n-2)/2} Gamma(s+1)/Gamma(s+n/2) int_{-1}^{1} (1-u^2)^{s+(n-2)/2} F(u) du``.
    """
    s = complex(s)
    alpha = s + (n - 2) / 2
    pref = math.pi ** ((n - 2) / 2) * _crgamma(s + n / 2)
    if abs(s.imag) < _INT_TOL:
        nodes, weights = roots_jacobi(order, alpha.real, alpha.real)
        return pref * complex(np.dot(weights, phi(r * nodes)))
    with mpmath.workdps(30):
        a = mpmath.mpc(alpha.real, alpha.imag)
        f = lambda u: (1 - u * u) ** a * complex(phi(r * float(u)))
        val = mpmath.quad(f, [-1, 0, 1])
    return pref * complex(val)


def moment(s: complex, n: int, r: float, phi: _TrigPoly | None = None, order: int = 80,
           regularize: bool = True) -> complex:
    """``J_s(phi)`` for ``phi(Y) = P(r Y_1) cos(r Y_1) + Q(r Y_1) sin(r Y_1)``.

    Defaults to ``phi = cos(r Y_1)``.  For ``Re s <= -1`` (and for complex
    ``s`` below ``Re s = 1``) the divergence identity raises the exponent.
    """
    if phi is None:
        phi = _TrigPoly(np.array([1.0]), np.array([0.0]))
    s = complex(s)
    threshold = -1.0 if abs(s.imag) < _INT_TOL else 1.0
    if s.real > threshold:
        return _jacobi_moment(s, n, phi, r, order)
    if not regularize:
        raise QuadratureDivergence(f"profile exponent {s} is not locally integrable")
    a = moment(s + 1, n, r, phi, order)
    b = moment(s + 1, n, r, phi.euler(), order)
    return 0.5 * ((n + 1 + 2 * s) * a + b)


def poisson_multiplier(spec: KernelSpec, k_norm: float, x: float) -> complex:
    """Leading-coefficient multiplier ``x^{-(s+n-1)} E(e^{i k.y}) / e^{i k.y}``.

    Equals ``J_s(cos(|k| x Y_1)) / J_s(1)``, which is ``1 + O((|k| x)^2)``.
    """
    r = float(k_norm) * x
    return moment(spec.s, spec.n, r) / normalized_pairing(spec.s, spec.n)


def apply_poisson(
    spec: KernelSpec,
    g: Mapping,
    x: float,
    y,
    period: float = 2.0 * math.pi,
    regularize: bool = True,
    leading: bool = False,
) -> np.ndarray:
    """Apply the kernel to band-limited data on a flat torus.

    Parameters
    ----------
    spec : KernelSpec
    g : mapping
        Fourier data: wavevector (int for ``n = 2``, tuple of ``n-1`` ints
        otherwise) -> coefficient, ``g(y) = sum g_k exp(i k.y 2 pi / period)``.
    x : float
        Boundary defining function, ``0 < x < period / 2`` so the support
        ball of the kernel does not wrap around.
    y : array_like
        Evaluation points, shape ``(m,)`` for ``n = 2`` or ``(m, n-1)``.
    leading : bool
        Return ``x^{-(s+n-1)} E g`` instead of ``E g``.
    """
    if not 0.0 < x < period / 2:
        raise ValueError(f"x={x} must lie in (0, period/2) to stay inside the injectivity radius")
    if not regularize and spec.s.real <= -1.0:
        raise QuadratureDivergence("power-law profile with Re s <= -1 needs regularization")
    y = np.asarray(y, dtype=float)
    dim = spec.n - 1
    pts = y.reshape(-1, 1) if dim == 1 else y.reshape(-1, dim)
    scale = 2.0 * math.pi / period
    out = np.zeros(pts.shape[0], dtype=complex)
    for key, coef in g.items():
        kvec = np.atleast_1d(np.asarray(key, dtype=float)) * scale
        if kvec.size != dim:
            raise ValueError(f"wavevector {key} does not match boundary dimension {dim}")
        mult = poisson_multiplier(spec, float(np.linalg.norm(kvec)), x)
        out += coef * mult * np.exp(1j * pts @ kvec)
    if not leading:
        out *= cmath.exp(spec.leading_power * math.log(x))
    return out.reshape(y.shape[:1]) if dim == 1 else out
