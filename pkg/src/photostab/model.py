"""Phototaxis response model and the non-dimensional parameter record.

The mean swimming direction of the cells is a function of the local light
intensity G. It is positive (upswimming) below the critical intensity G_c,
zero at G_c and negative above it. The response used here superimposes two
sines of a steepness-warped intensity

    xi(G) = G * exp(beta * (G - 1)),
    taxis(G) = 0.8 sin(1.5 pi xi) - 0.1 sin(0.5 pi xi),

so that a single steepness parameter beta places G_c anywhere in the
calibrated window while the source intensity stays fixed.
"""
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    BetaRangeWarning,
    CriticalIntensityRangeError,
    NoRootInRangeError,
)

_A_MAIN = 0.8
_A_CORR = 0.1
_W_MAIN = 1.5 * math.pi
_W_CORR = 0.5 * math.pi

#: Calibrated steepness window; values outside only warn.
BETA_RANGE = (-1.1, 1.1)

#: Default parameter values used throughout: Schmidt 20, Lewis 1,
#: swimming speed 10, source intensity 0.8.
DEFAULT_SC = 20.0
DEFAULT_LE = 1.0
DEFAULT_VC = 10.0
DEFAULT_GT = 0.8


@dataclass(frozen=True)
class ModelParams:
    """Non-dimensional control parameters plus numerical resolution.

    Parameters
    ----------
    kappa : float
        Extinction coefficient of the suspension (> 0).
    beta : float
        Taxis steepness; sets the critical intensity through the xi map.
    Sc, Le, Vc, Gt : float
        Schmidt number, Lewis number, scaled swimming speed, source
        intensity at the top of the layer.
    RaT : float
        Thermal Rayleigh number; positive means heated from below.
    Rab : float
        Bioconvective Rayleigh number (>= 0).
    N : int
        Collocation point count (>= 16).
    """

    kappa: float
    beta: float
    Sc: float = DEFAULT_SC
    Le: float = DEFAULT_LE
    Vc: float = DEFAULT_VC
    Gt: float = DEFAULT_GT
    RaT: float = 0.0
    Rab: float = 0.0
    N: int = 64

    def __post_init__(self):
        if not self.Sc > 0:
            raise ValueError(f"Sc must be positive, got {self.Sc}")
        if not self.Le > 0:
            raise ValueError(f"Le must be positive, got {self.Le}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.Vc < 0:
            raise ValueError(f"Vc must be non-negative, got {self.Vc}")
        if not 0.0 < self.Gt <= 1.0:
            raise ValueError(f"Gt must lie in (0, 1], got {self.Gt}")
        if self.N < 16:
            raise ValueError(f"resolution N must be at least 16, got {self.N}")
        if self.Rab < 0:
            raise ValueError(f"Rab must be non-negative, got {self.Rab}")
        if not math.isfinite(self.beta):
            raise ValueError(f"beta must be finite, got {self.beta}")
        if not BETA_RANGE[0] <= self.beta <= BETA_RANGE[1]:
            warnings.warn(
                f"beta={self.beta} outside the calibrated range {BETA_RANGE}",
                BetaRangeWarning,
                stacklevel=2,
            )

    def with_(self, **changes):
        """Copy with selected fields replaced."""
        return replace(self, **changes)

    @property
    def Gc(self):
        """Critical intensity implied by beta (clipped at Gt)."""
        return critical_intensity(self.beta, self.Gt)


def params_for_critical_intensity(Gc, *, kappa, Gt=DEFAULT_GT, **kwargs):
    """Build ModelParams from a critical intensity instead of a steepness."""
    return ModelParams(kappa=kappa, beta=beta_for_critical_intensity(Gc, Gt),
                       Gt=Gt, **kwargs)


def xi(G, beta):
    """Steepness-warped intensity G * exp(beta * (G - 1))."""
    G = np.asarray(G, dtype=float)
    out = G * np.exp(beta * (G - 1.0))
    return float(out) if out.ndim == 0 else out


def _xi_prime(G, beta):
    G = np.asarray(G, dtype=float)
    return np.exp(beta * (G - 1.0)) * (1.0 + beta * G)


def _xi_second(G, beta):
    G = np.asarray(G, dtype=float)
    return beta * np.exp(beta * (G - 1.0)) * (2.0 + beta * G)


def taxis(G, beta):
    """Mean swimming direction M(G); positive below G_c, negative above."""
    x = xi(G, beta)
    out = _A_MAIN * np.sin(_W_MAIN * x) - _A_CORR * np.sin(_W_CORR * x)
    return float(out) if np.ndim(out) == 0 else out


def taxis_derivatives(G, beta):
    """Analytic (dM/dG, d2M/dG2) by the chain rule through xi."""
    x = xi(G, beta)
    xp = _xi_prime(G, beta)
    xpp = _xi_second(G, beta)
    f_x = _A_MAIN * _W_MAIN * np.cos(_W_MAIN * x) - _A_CORR * _W_CORR * np.cos(_W_CORR * x)
    f_xx = -_A_MAIN * _W_MAIN**2 * np.sin(_W_MAIN * x) + _A_CORR * _W_CORR**2 * np.sin(_W_CORR * x)
    d1 = f_x * xp
    d2 = f_xx * xp * xp + f_x * xpp
    if np.ndim(d1) == 0:
        return float(d1), float(d2)
    return d1, d2


def _taxis_of_xi(x):
    return _A_MAIN * math.sin(_W_MAIN * x) - _A_CORR * math.sin(_W_CORR * x)


def xi_star():
    """Smallest positive nontrivial zero of the taxis sine superposition.

    This is the xi-argument at which the mean swimming direction changes
    sign; the critical intensity satisfies xi(G_c) = xi_star().
    """
    return _xi_star_cached()


_XSTAR = None


def _xi_star_cached():
    global _XSTAR
    if _XSTAR is None:
        # the response is positive just above 0 and negative at 2/3
        _XSTAR = brentq(_taxis_of_xi, 0.5, 2.0 / 3.0, xtol=1e-14, rtol=8.9e-16)
    return _XSTAR


def critical_intensity(beta, Gt=DEFAULT_GT):
    """Critical intensity G_c in (0, Gt] for a given steepness.

    Solves xi(G_c) = xi_star for the zero of the taxis response nearest
    below the source intensity. When that zero would exceed Gt the cells
    accumulate at the top of the layer and G_c = Gt is returned.
    """
    if not math.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    if not 0.0 < Gt <= 1.0:
        raise ValueError(f"Gt must lie in (0, 1], got {Gt}")
    xstar = xi_star()
    # xi is strictly increasing on (0, Gt] for all calibrated beta
    if xi(Gt, beta) <= xstar:
        if taxis(Gt, beta) < 0.0:
            raise NoRootInRangeError(
                f"taxis has no sign change on (0, {Gt}] for beta={beta} "
                f"yet taxis(Gt)={taxis(Gt, beta):.3g} < 0"
            )
        return Gt
    return brentq(lambda G: xi(G, beta) - xstar, 1e-12, Gt, xtol=1e-14,
                  rtol=8.9e-16)


def beta_for_critical_intensity(Gc, Gt=DEFAULT_GT):
    """Steepness beta that places the critical intensity at Gc.

    Inverts xi(Gc; beta) = xi_star in closed form. Gc must lie in the
    invertible window [0.3, Gt]; a round trip through
    ``critical_intensity`` reproduces Gc to better than 1e-8.
    """
    if not 0.3 <= Gc <= Gt:
        raise CriticalIntensityRangeError(
            f"Gc={Gc} outside the invertible window [0.3, {Gt}]"
        )
    xstar = xi_star()
    if abs(Gc - 1.0) < 1e-14:
        raise CriticalIntensityRangeError("Gc = 1 leaves beta undetermined")
    return math.log(xstar / Gc) / (Gc - 1.0)
