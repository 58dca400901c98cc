"""Hole probabilities for Gaussian random polynomials on the round sphere.

A degree-``n`` random section is the polynomial ``sum a_k e_k z^k`` with
independent standard complex Gaussian coefficients ``a_k`` and the
orthonormal monomial scalings ``e_k = sqrt((n+1) * binom(n, k))`` of the
round-sphere inner product.  Zeros are counted inside chart discs with the
argument principle (adaptive winding number on the circle) and checked
against companion-matrix root finding in the tests.

Every sample derives its own generator from ``(seed, sample index)``, so
estimates are bit-identical regardless of batching, thread count, or
scheduling order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ContourError, EstimationError, InvalidInputError
from .geometry import chart_to_geodesic, fubini_study_metric, geodesic_to_chart

Z95 = 1.959963984540054

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EnsembleSpec:
    """Degree, orthonormal basis norms, seed, and sample count."""

    n: int
    seed: int
    samples: int
    basis_norms: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.n < 0:
            raise InvalidInputError("degree must be nonnegative")
        if self.samples < 1:
            raise InvalidInputError("sample count must be positive")
        norms = self.basis_norms
        if norms is None:
            norms = tuple(default_basis_norms(self.n))
            object.__setattr__(self, "basis_norms", norms)
        if len(norms) != self.n + 1:
            raise InvalidInputError("need one basis norm per coefficient")
        if any(b <= 0 for b in norms):
            raise InvalidInputError("basis norms must be positive")


def default_basis_norms(n):
    """Orthonormal monomial scalings sqrt((n+1) * binom(n, k))."""
    log_binom = [math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                 for k in range(n + 1)]
    return np.exp(0.5 * (np.log(n + 1.0) + np.array(log_binom)))


@dataclass(frozen=True)
class HoleEstimate:
    """Monte Carlo hole-probability estimate with a Wilson 95% interval.

    ``hits`` counts samples with at least one zero in the disc, so the
    hole probability estimate is ``1 - hits/samples``.  ``rate`` is
    ``-log(p_hat) / n^2`` (None when undefined).
    """

    n: int
    r_geodesic: float
    r_chart: float
    hits: int
    samples: int
    discarded: int
    p_hat: float
    wilson_low: float
    wilson_high: float
    rate: Optional[float]
    seed: int

    def to_json_dict(self):
        return {
            "n": self.n, "r_geodesic": self.r_geodesic,
            "r_chart": self.r_chart, "hits": self.hits,
            "samples": self.samples, "discarded": self.discarded,
            "p_hat": self.p_hat,
            "wilson_interval": [self.wilson_low, self.wilson_high],
            "rate": self.rate, "seed": self.seed,
        }


def wilson_interval(successes, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise InvalidInputError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / trials
                                   + z * z / (4.0 * trials * trials))
    return max(0.0, centre - half), min(1.0, centre + half)


def sample_section(spec, index=0):
    """Coefficient vector of one random section, keyed by (seed, index).

    Returns the monomial coefficients ``a_k * basis_norms[k]``; the
    Gaussian draw is deterministic in ``(seed, index)`` alone.
    """
    gen = np.random.Generator(np.random.Philox(
        key=np.array([spec.seed & _MASK64, index & _MASK64], dtype=np.uint64)))
    x = gen.standard_normal(2 * (spec.n + 1))
    a = (x[0::2] + 1j * x[1::2]) / np.sqrt(2.0)
    return a * np.asarray(spec.basis_norms)


def count_zeros_in_disc(coeffs, rho, *, start_points=256, max_points=1 << 15):
    """Zeros (with multiplicity) of a polynomial in the disc ``|z| < rho``.

    Winding number of the boundary image: phase increments are accumulated
    over an adaptively refined circle, doubling the sampling until every
    increment is below pi/2.  A contour passing within ``1e-12`` of a zero
    (detected through the minimum modulus on the sampled circle) is
    re-tried on a radius jittered by ``+-1e-6`` relative; after three
    failed attempts the sample is rejected with ``ContourError``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if rho < 0:
        raise InvalidInputError("disc radius must be nonnegative")
    if rho == 0.0 or coeffs.size == 1:
        return 0
    for jitter in (0.0, 1e-6, -1e-6):
        radius = rho * (1.0 + jitter)
        winding = _winding_on_circle(coeffs, radius, start_points, max_points)
        if winding is not None:
            return winding
    raise ContourError("contour keeps passing through a zero")


def _winding_on_circle(coeffs, radius, start_points, max_points):
    scale = max(1.0, float(np.max(np.abs(coeffs)))) * max(1.0, radius) ** (
        coeffs.size - 1)
    k = start_points
    while True:
        theta = np.arange(k) * (2.0 * np.pi / k)
        z = radius * np.exp(1j * theta)
        vals = np.polynomial.polynomial.polyval(z, coeffs)
        if float(np.min(np.abs(vals))) < 1e-12 * scale:
            return None
        ratios = np.roll(vals, -1) / vals
        steps = np.angle(ratios)
        if np.max(np.abs(steps)) < np.pi / 2:
            total = float(np.sum(steps)) / (2.0 * np.pi)
            nearest = round(total)
            if abs(total - nearest) > 0.25 or nearest < 0:
                return None
            return int(nearest)
        if k >= max_points:
            return None
        k *= 2


def zeros_at_infinity(coeffs, *, tol=0.0):
    """Multiplicity of the zero at infinity: trailing zero coefficients."""
    coeffs = np.asarray(coeffs)
    degree = coeffs.size - 1
    while degree > 0 and abs(coeffs[degree]) <= tol:
        degree -= 1
    return coeffs.size - 1 - degree


def _count_batch(spec, indices, rho):
    hits = 0
    discarded = 0
    for idx in indices:
        coeffs = sample_section(spec, idx)
        try:
            if count_zeros_in_disc(coeffs, rho) > 0:
                hits += 1
        except ContourError:
            discarded += 1
    return hits, discarded


def hole_probability(spec, r_geodesic=None, omega0=None, *, chart_radius=None,
                     jobs=None):
    """Monte Carlo hole probability for the disc about the chart centre.

    Exactly one of ``r_geodesic`` (converted through ``omega0``, default
    the round-sphere chart metric) or ``chart_radius`` must be given.
    """
    if (r_geodesic is None) == (chart_radius is None):
        raise InvalidInputError("give exactly one of r_geodesic/chart_radius")
    if omega0 is None:
        omega0 = fubini_study_metric()
    if chart_radius is None:
        rho = geodesic_to_chart(r_geodesic, omega0)
        r_geo = float(r_geodesic)
    else:
        rho = float(chart_radius)
        r_geo = chart_to_geodesic(rho, omega0)
    if spec.samples < 100:
        raise InvalidInputError("need at least 100 samples")

    if spec.n == 0 or rho == 0.0:
        hits, discarded = 0, 0
    else:
        indices = range(spec.samples)
        if jobs is not None and jobs > 1:
            chunks = np.array_split(np.arange(spec.samples), jobs * 4)
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                parts = list(pool.map(
                    lambda c: _count_batch(spec, c, rho), chunks))
            hits = sum(p[0] for p in parts)
            discarded = sum(p[1] for p in parts)
        else:
            hits, discarded = _count_batch(spec, indices, rho)

    used = spec.samples - discarded
    if used == 0:
        raise EstimationError("every sample was discarded by contour errors")
    p_hat = 1.0 - hits / used
    low, high = wilson_interval(used - hits, used)
    rate = None
    if spec.n > 0 and p_hat > 0.0:
        rate = -math.log(p_hat) / spec.n ** 2
    return HoleEstimate(n=spec.n, r_geodesic=r_geo, r_chart=rho, hits=hits,
                        samples=used, discarded=discarded, p_hat=p_hat,
                        wilson_low=low, wilson_high=high, rate=rate,
                        seed=spec.seed)


def calibrate_radius(n, target_level, omega=None, omega0=None,
                     *, bracket=(5e-3, 0.9)):
    """Geodesic radius at which ``n^2 * (minimal energy)`` hits a target."""
    from scipy.optimize import brentq

    from .energy import min_energy

    if omega is None:
        omega = fubini_study_metric()
    if omega0 is None:
        omega0 = fubini_study_metric()

    def g(r):
        report, _ = min_energy(omega, omega0, r)
        return n * n * report.total - target_level

    return brentq(g, bracket[0], bracket[1], xtol=1e-8, rtol=1e-8)


def rate_trend(specs, omega0=None, *, omega=None, r_geodesic=None,
               target_level=None, jobs=None, estimable=(1e-3, 0.99)):
    """Empirical decay rates against the minimal-energy reference.

    One row per spec: the hole estimate, the rate ``-log(p_hat)/n^2``, and
    the reference minimal energy at the same radius.  Radii come either
    from a fixed ``r_geodesic`` or, when ``target_level`` is given, from
    calibrating each degree so ``n^2 * (minimal energy)`` hits the target.
    Rows whose estimate leaves the estimable band are flagged, not fatal.
    """
    from .energy import min_energy

    if omega0 is None:
        omega0 = fubini_study_metric()
    if omega is None:
        omega = fubini_study_metric()
    if (r_geodesic is None) == (target_level is None):
        raise InvalidInputError("give exactly one of r_geodesic/target_level")

    rows = []
    for spec in specs:
        if target_level is not None:
            r = calibrate_radius(spec.n, target_level, omega, omega0)
        else:
            r = float(r_geodesic)
        report, _ = min_energy(omega, omega0, r)
        est = hole_probability(spec, r_geodesic=r, omega0=omega0, jobs=jobs)
        ok = estimable[0] <= est.p_hat <= estimable[1]
        ratio = (est.rate / report.total
                 if est.rate is not None and report.total > 0 else None)
        rows.append({
            "n": spec.n,
            "r_geodesic": r,
            "r_chart": est.r_chart,
            "p_hat": est.p_hat,
            "wilson_interval": [est.wilson_low, est.wilson_high],
            "rate": est.rate,
            "reference_energy": report.total,
            "rate_over_reference": ratio,
            "estimable": bool(ok),
            "samples": est.samples,
            "seed": spec.seed,
        })
    return rows
