"""Chart metrics, mass functions, and geodesic/chart radius conversions.

Conventions fixed here and used by every other module:

* A conformal metric on the chart is ``a(z) i dz ^ dz~`` and is described
  by its radial density ``a(t)``, ``t = |z|``.  Densities are always
  stated relative to ``i dz ^ dz~``.
* The mass of the chart disc of radius ``t`` is ``m(t) = 4*pi*I(a*s, 0, t)``
  (so a constant density ``a`` gives ``m(t) = 2*a*pi*t**2``), and the total
  mass of the underlying closed surface is 1.
* Distance comes from the tensor ``ds^2 = 2*a0(z)*|dz|^2``, so a chart with
  constant density 1/2 is an isometry onto the Euclidean disc.
* ``ddc_gap`` measures ``Lap(u)/(4*pi) + a(z)``, the density of the
  curvature-corrected Laplacian relative to ``i dz ^ dz~``.  With this
  normalization ``log|z|`` carries a unit point mass at the origin.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import _quad
from .errors import (DomainError, InvalidInputError, RadiusTooLargeError,
                     UnsupportedMetricError)

FLAT = "flat"
FUBINI_STUDY = "fubini_study"
CUSTOM = "custom"

_SQRT_PI = float(np.sqrt(np.pi))


@dataclass(frozen=True)
class ChartMetric:
    """A rotation-invariant conformal metric density on a coordinate chart.

    ``kind`` is one of ``flat`` (constant density ``alpha``),
    ``fubini_study`` (density ``1/(2*pi*(1+t^2)^2)``, total plane mass 1),
    or ``custom`` (polynomial density ``sum(coeffs[i] * t**i)``, or an
    arbitrary radial callable supplied as ``density_fn``).

    ``lipschitz`` is the radial variation bound ``rho`` in
    ``(1 - rho*t) * a(0) <= a(t) <= (1 + rho*t) * a(0)``; it is data used by
    the sandwich bounds, not something verified pointwise here.
    """

    kind: str
    alpha: float = 1.0
    coeffs: tuple = ()
    chart_extent: float = 1.0
    lipschitz: float = 0.0
    density_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (FLAT, FUBINI_STUDY, CUSTOM):
            raise InvalidInputError(f"unknown metric kind {self.kind!r}")
        if self.chart_extent <= 0:
            raise InvalidInputError("chart_extent must be positive")
        if self.kind == FLAT and self.alpha <= 0:
            raise InvalidInputError("flat density must be positive")
        if self.kind == CUSTOM and not self.coeffs and self.density_fn is None:
            raise InvalidInputError("custom metric needs coeffs or density_fn")
        probe = np.linspace(0.0, self.chart_extent, 257)
        if np.any(self.density(probe) <= 0):
            raise InvalidInputError("metric density must be positive on the chart")

    def density(self, t):
        """Radial density a(t) relative to i dz ^ dz~."""
        t = np.asarray(t, dtype=float)
        if self.kind == FLAT:
            out = np.full_like(t, self.alpha)
        elif self.kind == FUBINI_STUDY:
            out = 1.0 / (2.0 * np.pi * (1.0 + t * t) ** 2)
        elif self.density_fn is not None:
            out = np.asarray(self.density_fn(t), dtype=float)
        else:
            out = np.polynomial.polynomial.polyval(t, np.asarray(self.coeffs))
        return out if out.shape else float(out)

    def mass(self, t):
        """Mass m(t) of the chart disc of radius t."""
        t = np.asarray(t, dtype=float)
        if self.kind == FLAT:
            out = 2.0 * np.pi * self.alpha * t * t
        elif self.kind == FUBINI_STUDY:
            out = t * t / (1.0 + t * t)
        elif self.density_fn is None:
            # Term-by-term: 4*pi * c_i * t^(i+2) / (i+2).
            c = np.asarray(self.coeffs, dtype=float)
            k = np.arange(c.size)
            anti = np.zeros(c.size + 2)
            anti[2:] = 4.0 * np.pi * c / (k + 2)
            out = np.polynomial.polynomial.polyval(t, anti)
        else:
            out = np.array([
                4.0 * np.pi * _quad.integrate(lambda s: self.density(s) * s, 0.0, x)
                for x in np.atleast_1d(t)
            ]).reshape(t.shape)
        return out if out.shape else float(out)

    @property
    def beta(self):
        """Density at the chart center (the beta of distance estimates)."""
        return float(self.density(0.0))

    def to_config(self):
        cfg = {"kind": self.kind, "extent": self.chart_extent,
               "lipschitz": self.lipschitz}
        if self.kind == FLAT:
            cfg["alpha"] = self.alpha
        elif self.kind == CUSTOM:
            cfg["coeffs"] = list(self.coeffs)
        return cfg

    @classmethod
    def from_config(cls, cfg):
        kind = cfg.get("kind")
        if kind == FLAT:
            return flat_metric(cfg.get("alpha", 1.0),
                               extent=cfg.get("extent"),
                               lipschitz=cfg.get("lipschitz", 0.0))
        if kind == FUBINI_STUDY:
            return fubini_study_metric(extent=cfg.get("extent", 8.0))
        if kind == CUSTOM:
            return custom_metric(cfg.get("coeffs", ()),
                                 extent=cfg.get("extent", 1.0),
                                 lipschitz=cfg.get("lipschitz", 0.0))
        raise InvalidInputError(f"unknown metric kind {kind!r}")


def flat_metric(alpha, *, extent=None, lipschitz=0.0):
    """Constant-density metric.  Default extent is the total-mass-1 radius."""
    if alpha <= 0:
        raise InvalidInputError("flat density must be positive")
    cap = 1.0 / np.sqrt(2.0 * np.pi * alpha)
    return ChartMetric(FLAT, alpha=float(alpha),
                       chart_extent=float(extent if extent is not None else cap),
                       lipschitz=float(lipschitz))


def fubini_study_metric(*, extent=8.0):
    """Round-sphere chart metric with plane mass 1.

    The variation bound over ``[0, s]`` is ``2s/(1+s^2) <= 2s``; a usable
    Lipschitz constant for holes of chart size ``s`` is ``2s``, recomputed
    by callers for the scale they actually use (see ``fs_lipschitz``).
    """
    return ChartMetric(FUBINI_STUDY, chart_extent=float(extent),
                       lipschitz=fs_lipschitz(min(extent, 1.0)))


def fs_lipschitz(scale):
    """Tight radial variation bound for the round-sphere density on [0, scale]."""
    s = float(scale)
    if s <= 0:
        return 0.0
    # sup over (0, s] of (1 - (1+t^2)^-2) / t, attained at t = s for s <= 1.
    return (1.0 - 1.0 / (1.0 + s * s) ** 2) / s


def custom_metric(coeffs=(), *, extent=1.0, lipschitz=0.0, density_fn=None):
    return ChartMetric(CUSTOM, coeffs=tuple(float(c) for c in coeffs),
                       chart_extent=float(extent), lipschitz=float(lipschitz),
                       density_fn=density_fn)


@dataclass(frozen=True)
class RadialWeight:
    """A radial density together with its cumulative disc-mass function.

    ``extent`` never exceeds the radius at which the cumulative mass
    reaches 1 (the chart cannot carry more than the whole surface).
    """

    density: Callable
    mass: Callable
    extent: float

    def __post_init__(self):
        if self.extent <= 0:
            raise InvalidInputError("weight extent must be positive")
        if float(self.mass(self.extent)) > 1.0 + 1e-12:
            raise InvalidInputError("disc mass exceeds the total surface mass")

    @classmethod
    def from_metric(cls, metric, *, extent=None):
        cap = metric.chart_extent if extent is None else float(extent)
        if float(metric.mass(cap)) > 1.0:
            cap = brentq(lambda t: float(metric.mass(t)) - 1.0, 1e-12, cap,
                         xtol=1e-15, rtol=1e-15)
        return cls(density=metric.density, mass=metric.mass, extent=float(cap))


@dataclass(frozen=True)
class RadiusPair:
    """A chart radius together with the matching geodesic radius."""

    chart_radius: float
    geodesic_radius: float

    def __post_init__(self):
        if self.chart_radius < 0 or self.geodesic_radius < 0:
            raise InvalidInputError("radii must be nonnegative")


def ddc_gap(u, metric, z, *, step=None):
    """Density of ``dd^c u + omega`` relative to ``i dz ^ dz~`` at ``z``.

    ``u`` must be twice differentiable near ``z`` and accept complex
    arguments.  The value is ``Lap(u)(z)/(4*pi) + a(z)``; it is nonnegative
    exactly when ``u`` is subharmonic relative to the metric near ``z``.
    """
    z = complex(z)
    if abs(z) > metric.chart_extent:
        raise DomainError("point outside the chart")
    scale = max(abs(z), 1.0)
    h = scale * 3e-4 if step is None else float(step)
    lap = (u(z + h) + u(z - h) + u(z + 1j * h) + u(z - 1j * h) - 4.0 * u(z)) / (h * h)
    return float(lap) / (4.0 * np.pi) + float(metric.density(abs(z)))


def chart_to_geodesic(rho, omega0):
    """Geodesic radius of the chart circle ``|z| = rho`` under ``omega0``."""
    rho = float(rho)
    if rho < 0:
        raise DomainError("chart radius must be nonnegative")
    if rho > omega0.chart_extent:
        raise RadiusTooLargeError("chart radius outside the chart")
    if omega0.kind == FLAT:
        return rho * np.sqrt(2.0 * omega0.alpha)
    if omega0.kind == FUBINI_STUDY:
        return float(np.arctan(rho) / _SQRT_PI)
    if omega0.density_fn is None and not omega0.coeffs:
        raise UnsupportedMetricError("metric has no radial density")
    return _quad.integrate(lambda s: np.sqrt(2.0 * omega0.density(s)), 0.0, rho,
                           cells=64)


def geodesic_to_chart(r, omega0):
    """Chart radius whose geodesic radius under ``omega0`` equals ``r``."""
    r = float(r)
    if r < 0:
        raise DomainError("geodesic radius must be nonnegative")
    if r == 0.0:
        return 0.0
    if omega0.kind == FLAT:
        rho = r / np.sqrt(2.0 * omega0.alpha)
        if rho > omega0.chart_extent * (1 + 1e-12):
            raise RadiusTooLargeError("geodesic radius leaves the chart")
        return rho
    if omega0.kind == FUBINI_STUDY:
        arg = _SQRT_PI * r
        if arg >= np.pi / 2:
            raise RadiusTooLargeError("geodesic radius reaches the far pole")
        rho = float(np.tan(arg))
        if rho > omega0.chart_extent * (1 + 1e-12):
            raise RadiusTooLargeError("geodesic radius leaves the chart")
        return rho
    top = omega0.chart_extent
    if chart_to_geodesic(top, omega0) < r:
        raise RadiusTooLargeError("geodesic radius leaves the chart")
    return brentq(lambda s: chart_to_geodesic(s, omega0) - r, 0.0, top,
                  xtol=1e-15, rtol=8.9e-16)


def sandwich_bounds(r, omega0, varrho=None):
    """Chart radii of discs squeezing the geodesic ball of radius ``r``.

    For a radial density within the variation band ``(1 +- varrho*t) * beta``
    the geodesic ball of radius ``r`` contains the chart disc of radius
    ``r / sqrt(2*(1+varrho*r)*beta)`` and is contained in the one of radius
    ``r / sqrt(2*(1-varrho*r)*beta)``.
    """
    r = float(r)
    if r < 0:
        raise DomainError("radius must be nonnegative")
    rho = omega0.lipschitz if varrho is None else float(varrho)
    if rho * r >= 1.0:
        raise RadiusTooLargeError("variation bound times radius reaches 1")
    beta = omega0.beta
    inner = r / np.sqrt(2.0 * (1.0 + rho * r) * beta)
    outer = r / np.sqrt(2.0 * (1.0 - rho * r) * beta)
    return inner, outer
