"""Exception types raised by the numerical routines."""

from __future__ import annotations


class DeSitterKGError(Exception):
    """Base class for all package-specific failures."""


class NonConvergence(DeSitterKGError):
    """A bicharacteristic did not reach the boundary within the step budget."""


class OrderClash(DeSitterKGError):
    """A resonance demands a logarithmic power beyond the allowed ladder depth."""


class IllConditioned(DeSitterKGError):
    """A residual vanished identically, so no decay slope can be fitted."""


class GridTooCoarse(DeSitterKGError):
    """Radial grid has too few points for the fourth-order stencils."""


class QuadratureDivergence(DeSitterKGError):
    """A weighted integral does not converge for the requested exponent."""


class ZeroPairing(DeSitterKGError):
    """The kernel pairing constant vanishes, so the kernel cannot be normalized."""


class FrameFitFailure(DeSitterKGError):
    """The asymptotic frame could not be evaluated to the requested accuracy."""


class CFLViolation(DeSitterKGError):
    """Requested time step exceeds the stability bound of the scheme."""


class BlowUp(DeSitterKGError):
    """The evolved field exceeded the overflow guard."""


class RankDeficient(DeSitterKGError):
    """The fitting frame is numerically degenerate on the fitting window."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition number {condition:.3e})")
        self.condition = condition


class ConfigError(DeSitterKGError):
    """Invalid experiment configuration."""
