"""Radial functions used to build and compare density fields.

* density scaling functions fade an atom's contribution out at the cutoff
  (value 1 at the origin, 0 at the cutoff, twice differentiable);
* integral weights emphasize regions of the distance integral and are
  normalized to unit volume integral;
* species kernels are the (possibly non-stationary) Gaussians placed on
  each atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from decaf.errors import DomainError


def _s(r, cutoff):
    return np.clip(1.0 - np.asarray(r, dtype=float) / cutoff, 0.0, None)


def bell_polynomial(s, a, b):
    """``-b s^a + a s^b``; the unnormalized bell-shaped compact polynomial."""
    return -b * s**a + a * s**b


def bell_normalization(a, b, h):
    """Volume integral of ``bell_polynomial(1 - r/h)`` over the ball of radius ``h``."""
    return 8.0 * math.pi * h**3 * (
        a / (b**3 + 6 * b**2 + 11 * b + 6) - b / (a**3 + 6 * a**2 + 11 * a + 6)
    )


# density scaling ------------------------------------------------------------


@dataclass(frozen=True)
class TentScaling:
    t: float = 3.0
    cutoff: float = 6.0

    def __post_init__(self):
        if not self.t > 2:
            raise DomainError("tent exponent must exceed 2")
        if not self.cutoff > 0:
            raise DomainError("cutoff must be positive")

    def __call__(self, r):
        return _s(r, self.cutoff) ** self.t

    @property
    def spec(self):
        return f"tent(t={self.t:g},rc={self.cutoff:g})"


@dataclass(frozen=True)
class BellScaling:
    a: float = 6.0
    b: float = 4.0
    cutoff: float = 6.0

    def __post_init__(self):
        if not self.a > self.b > 2:
            raise DomainError("bell polynomial needs a > b > 2")
        if not self.cutoff > 0:
            raise DomainError("cutoff must be positive")

    def __call__(self, r):
        return bell_polynomial(_s(r, self.cutoff), self.a, self.b) / (self.a - self.b)

    @property
    def spec(self):
        return f"bell(a={self.a:g},b={self.b:g},rc={self.cutoff:g})"


@dataclass(frozen=True)
class UnitScaling:
    """Hard cutoff: 1 inside, 0 outside. Only for demonstrating discontinuities."""

    cutoff: float = 6.0

    def __call__(self, r):
        return (np.asarray(r, dtype=float) < self.cutoff).astype(float)

    @property
    def spec(self):
        return f"unit(rc={self.cutoff:g})"


# integral weights -----------------------------------------------------------


class _IntegralWeight:
    #: radius of the region the weight is normalized over (inf for all space)
    support = math.inf

    def _check_normalized(self):
        upper = self.support
        f = lambda r: 4.0 * math.pi * r * r * float(self(np.array(r)))
        if math.isinf(upper):
            total, _ = integrate.quad(f, 0.0, np.inf, limit=200)
        else:
            total, _ = integrate.quad(f, 0.0, upper, limit=200)
        if abs(total - 1.0) > 1e-6:
            raise DomainError(f"{self.spec} integrates to {total}, not 1")


@dataclass(frozen=True)
class BellWeight(_IntegralWeight):
    a: float = 6.0
    b: float = 4.0
    cutoff: float = 6.0

    def __post_init__(self):
        if not self.a > self.b > 2:
            raise DomainError("bell polynomial needs a > b > 2")
        self._check_normalized()

    @property
    def support(self):
        return self.cutoff

    def __call__(self, r):
        s = _s(r, self.cutoff)
        return bell_polynomial(s, self.a, self.b) / bell_normalization(self.a, self.b, self.cutoff)

    @property
    def spec(self):
        return f"bell(a={self.a:g},b={self.b:g},rc={self.cutoff:g})"


@dataclass(frozen=True)
class TentWeight(_IntegralWeight):
    t: float = 3.0
    cutoff: float = 6.0

    def __post_init__(self):
        if not self.t > 2:
            raise DomainError("tent exponent must exceed 2")
        self._check_normalized()

    @property
    def support(self):
        return self.cutoff

    def __call__(self, r):
        t, h = self.t, self.cutoff
        norm = 8.0 * math.pi * h**3 / ((t + 1) * (t + 2) * (t + 3))
        return _s(r, h) ** t / norm

    @property
    def spec(self):
        return f"tent(t={self.t:g},rc={self.cutoff:g})"


@dataclass(frozen=True)
class LaplacianWeight(_IntegralWeight):
    length: float = 1.0

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError("Laplacian length scale must be positive")
        self._check_normalized()

    def __call__(self, r):
        l = self.length
        return np.exp(-np.abs(np.asarray(r, dtype=float)) / l) / (8.0 * math.pi * l**3)

    @property
    def spec(self):
        return f"laplacian(l={self.length:g})"


@dataclass(frozen=True)
class ConstantWeight(_IntegralWeight):
    """``3 / (4 pi rc^3)`` inside the cutoff ball, zero outside."""

    cutoff: float = 6.0

    def __post_init__(self):
        if not self.cutoff > 0:
            raise DomainError("cutoff must be positive")
        self._check_normalized()

    @property
    def support(self):
        return self.cutoff

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.cutoff, 3.0 / (4.0 * math.pi * self.cutoff**3), 0.0)

    @property
    def spec(self):
        return f"constant(rc={self.cutoff:g})"


# species kernels ------------------------------------------------------------


@dataclass(frozen=True)
class SpeciesKernel:
    """Gaussian ``c * sigma^-p * exp(-d^2 / (2 sigma^2))`` with ``sigma = sigma0 + slope * r``.

    ``r`` is the atom's distance from the fingerprint center and ``d`` the
    distance from the atom to the sample point.
    """

    amplitude: float = 1.0
    sigma0: float = 1.0
    slope: float = 0.0
    exponent: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise DomainError("species amplitude must be positive")
        if not self.sigma0 > 0 or self.slope < 0:
            raise DomainError("species width needs sigma0 > 0 and slope >= 0")

    def width(self, r):
        return self.sigma0 + self.slope * np.asarray(r, dtype=float)

    def __call__(self, r, d2):
        sigma = self.width(r)
        return self.amplitude * sigma**-self.exponent * np.exp(-0.5 * np.asarray(d2) / sigma**2)


#: per-species defaults; H, O and C follow the protonated water dimer and
#: benzene setups, N reuses the carbon parameters
DEFAULT_SPECIES = {
    "H": SpeciesKernel(0.75, 0.9, 0.15),
    "C": SpeciesKernel(1.0, 1.2, 0.2),
    "N": SpeciesKernel(1.0, 1.2, 0.2),
    "O": SpeciesKernel(1.0, 1.5, 0.25),
}
