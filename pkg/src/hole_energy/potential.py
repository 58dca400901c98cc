"""Radial potentials, their measures, and the two-term energy functional.

A potential ``U`` here is the normalized chart representative of a
quasi-subharmonic function on the closed surface: ``U <= 0``, ``max U = 0``,
and ``U`` vanishes identically beyond its free radius (in particular on the
rest of the surface).  The measure it carries is ``omega + dd^c U``, split
into an absolutely continuous radial density, finitely many circle atoms,
and the exterior mass beyond the chart.  The energy of a pair ``(U, mu)``
is ``-I(U, omega) - I(U, mu)``; it is strictly positive whenever ``U`` is
not identically zero.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from . import _quad
from .errors import (InconsistentPairError, InvalidInputError,
                     NotOmegaSubharmonicError)

# Below quadrature noise, above rounding: tolerance for sign constraints.
SIGN_TOL = 1e-10
MASS_TOL = 1e-6


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    f: Callable
    df: Callable
    d2f: Optional[Callable] = None


class PiecewiseRadial:
    """Exact piecewise evaluator with one-sided derivatives on [0, T]."""

    def __init__(self, pieces):
        self.pieces = tuple(pieces)
        self.breaks = tuple([p.lo for p in self.pieces] + [self.pieces[-1].hi])

    def _piece_index(self, t):
        edges = np.asarray(self.breaks[1:-1])
        return np.searchsorted(edges, t, side="right")

    def _dispatch(self, t, pick, side=None):
        t = np.asarray(t, dtype=float)
        ref = t if side is None else np.nextafter(t, t + side * np.inf)
        idx = self._piece_index(ref)
        out = np.empty_like(t)
        for k, piece in enumerate(self.pieces):
            m = idx == k
            if np.any(m):
                out[m] = pick(piece)(t[m])
        return out

    def value(self, t):
        res = self._dispatch(t, lambda p: p.f)
        return res if res.shape else float(res)

    def derivative(self, t, side=+1):
        res = self._dispatch(t, lambda p: p.df, side=side)
        return res if res.shape else float(res)

    def second_derivative(self, t, side=+1):
        def pick(piece):
            if piece.d2f is not None:
                return piece.d2f
            span = piece.hi - piece.lo

            def fd(x, df=piece.df, h=max(span * 1e-7, 1e-12)):
                return (df(x + h) - df(x - h)) / (2.0 * h)

            return fd

        res = self._dispatch(t, pick, side=side)
        return res if res.shape else float(res)

    @staticmethod
    def combination(terms, constant=0.0):
        """Exact linear combination ``sum(c * profile) + constant``."""
        terms = [(float(c), p) for c, p in terms]
        cuts = sorted({b for _, p in terms for b in p.breaks})
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            inner = lambda t, lo=lo, hi=hi: np.clip(
                np.asarray(t, dtype=float),
                np.nextafter(lo, hi), np.nextafter(hi, lo))
            pieces.append(Piece(
                lo, hi,
                f=lambda t, inner=inner: sum(
                    c * p.value(inner(t)) for c, p in terms) + constant,
                df=lambda t, inner=inner: sum(
                    c * p.derivative(inner(t), +1) for c, p in terms),
                d2f=lambda t, inner=inner: sum(
                    c * p.second_derivative(inner(t), +1) for c, p in terms),
            ))
        return PiecewiseRadial(pieces)


@dataclass(frozen=True)
class RadialPotential:
    """Sampled radial potential with its hole and free-boundary radii.

    ``boundary_charge`` is the jump of ``t * U'(t)`` across the hole circle
    ``t = hole_radius`` (the mass the equilibrium measure deposits there).
    ``kinks`` lists every radius where ``U'`` may jump.  ``profile`` is an
    optional exact evaluator used for high-accuracy measure recovery.
    """

    grid: np.ndarray
    samples: np.ndarray
    hole_radius: float
    free_radius: float
    boundary_charge: float
    kinks: Tuple[float, ...] = ()
    profile: Optional[PiecewiseRadial] = field(default=None, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        s = np.asarray(self.samples, dtype=float)
        if g.ndim != 1 or g.shape != s.shape or g.size < 3:
            raise InvalidInputError("grid and samples must be matching 1-d arrays")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(s))):
            raise InvalidInputError("non-finite potential data")
        if np.any(np.diff(g) <= 0):
            raise InvalidInputError("grid must be strictly increasing")
        if np.any(s > SIGN_TOL):
            raise InvalidInputError("potential must be nonpositive")
        if s.max() < -SIGN_TOL:
            raise InvalidInputError("potential must attain 0")
        if np.any(np.abs(s[g >= self.free_radius * (1 + 1e-12)]) > SIGN_TOL):
            raise InvalidInputError("potential must vanish beyond its free radius")
        if self.boundary_charge < -SIGN_TOL:
            raise InvalidInputError("boundary charge must be nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "samples", s)

    def value(self, t):
        if self.profile is not None:
            return self.profile.value(t)
        return np.interp(t, self.grid, self.samples)

    @property
    def gamma(self):
        """Value on the hole circle."""
        return float(self.value(self.hole_radius))

    @property
    def atoms(self):
        return ((self.hole_radius, self.boundary_charge),)

    def to_json_dict(self):
        return {
            "grid": self.grid.tolist(),
            "samples": self.samples.tolist(),
            "atoms": [[r, m] for r, m in self.atoms],
            "hole_radius": self.hole_radius,
            "free_radius": self.free_radius,
        }

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,U\n")
            for t, u in zip(self.grid, self.samples):
                fh.write(f"{t:.17g},{u:.17g}\n")


@dataclass(frozen=True)
class MeasureDecomposition:
    """Measure split into radial density, circle atoms, and exterior mass.

    ``ac_density`` is the density of the absolutely continuous part relative
    to ``i dz ^ dz~`` as a function of the radius, valid on [0, extent].
    ``exterior_mass`` sits where the potential vanishes beyond the chart.
    """

    ac_density: Callable
    singular_circles: Tuple[Tuple[float, float], ...]
    exterior_mass: float
    extent: float
    kinks: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.exterior_mass < -SIGN_TOL:
            raise InvalidInputError("exterior mass must be nonnegative")
        for _, m in self.singular_circles:
            if m < -SIGN_TOL:
                raise InvalidInputError("circle masses must be nonnegative")

    def chart_mass(self):
        pieces = sorted({0.0, self.extent,
                         *[r for r, _ in self.singular_circles],
                         *[k for k in self.kinks if k < self.extent]})
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            total += 4.0 * np.pi * _quad.integrate(
                lambda s: self.ac_density(s) * s, a, b, cells=32)
        return total + sum(m for _, m in self.singular_circles)

    def total_mass(self):
        return self.chart_mass() + self.exterior_mass


@dataclass(frozen=True)
class EnergyReport:
    """The two energy integrals and their sum."""

    integral_against_omega: float
    integral_against_mu: float
    total: float

    def __post_init__(self):
        if not np.isclose(self.total,
                          self.integral_against_omega + self.integral_against_mu,
                          rtol=1e-12, atol=1e-15):
            raise InvalidInputError("energy total must equal the sum of its parts")

    def to_json_dict(self):
        return {
            "integral_against_omega": self.integral_against_omega,
            "integral_against_mu": self.integral_against_mu,
            "total": self.total,
        }


@dataclass(frozen=True)
class EnergyOrdering:
    """Outcome of comparing the energies of an ordered potential pair."""

    comparable: bool
    energy_of_lower: Optional[float] = None
    energy_of_upper: Optional[float] = None
    inequality_holds: Optional[bool] = None


def _all_cuts(pot, extent):
    cuts = {0.0, float(extent)}
    cuts.add(min(pot.free_radius, extent))
    cuts.update(k for k in pot.kinks if 0.0 < k < extent)
    return sorted(cuts)


def star_normalize(grid, samples, metric):
    """Shift a potential so its integral against the metric measure is 0.

    The input vanishes beyond its support, so the shift is the chart
    integral of ``U`` against ``omega``.  Max-normalizing the result
    recovers the input.
    """
    grid = np.asarray(grid, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(samples))):
        raise InvalidInputError("non-finite potential samples")
    shift = 4.0 * np.pi * simpson(samples * metric.density(grid) * grid, x=grid)
    return samples - shift


def measure_from_potential(pot, weight, *, density_tol=1e-8):
    """Recover ``omega + dd^c U`` from a radial potential.

    Uses the potential's exact piecewise derivatives when available,
    otherwise finite differences of the samples.  Raises if the recovered
    density is negative beyond tolerance (the potential would not be
    subharmonic relative to the weight) or if the masses do not add to 1.
    """
    alpha = weight.density
    kinks = tuple(k for k in pot.kinks if 0.0 < k < weight.extent)

    if pot.profile is not None:
        prof = pot.profile
        circles = []
        for k in kinks:
            jump = k * (prof.derivative(k, +1) - prof.derivative(k, -1))
            if abs(jump) > 1e-14:
                circles.append((k, float(jump)))

        def ac(t, prof=prof):
            t = np.asarray(t, dtype=float)
            tt = np.where(t == 0.0, 1.0, t)
            du = prof.derivative(t, +1)
            d2 = prof.second_derivative(t, +1)
            lap = np.where(t == 0.0, 2.0 * d2, d2 + du / tt)
            return alpha(t) + lap / (4.0 * np.pi)
    else:
        t_g, u_g = pot.grid, pot.samples
        a_g = t_g * np.gradient(u_g, t_g)
        circles = []
        for k in kinks:
            jump = _jump_from_samples(t_g, a_g, k)
            if abs(jump) > 1e-12:
                circles.append((k, float(jump)))

        def ac(t, t_g=t_g, a_g=a_g):
            t = np.asarray(t, dtype=float)
            slopes = np.empty_like(t)
            for i, x in np.ndenumerate(t):
                slopes[i] = _local_slope(t_g, a_g, float(x))
            tt = np.where(t == 0.0, 1.0, t)
            return alpha(t) + (slopes / tt) / (4.0 * np.pi)

    probes = _density_probes(pot, weight, kinks)
    tol = density_tol if pot.profile is not None else max(density_tol, 1e-4)
    vals = ac(probes)
    if np.any(vals < -tol):
        raise NotOmegaSubharmonicError(
            f"recovered density reaches {float(vals.min()):.3e} below zero")
    for _, m in circles:
        if m < -SIGN_TOL:
            raise NotOmegaSubharmonicError("negative circle mass")

    # density breakpoints: slope kinks plus the free radius, where the
    # absolutely continuous part jumps from zero back to the weight
    density_breaks = set(kinks)
    if 0.0 < pot.free_radius < weight.extent:
        density_breaks.add(pot.free_radius)
    mu = MeasureDecomposition(
        ac_density=ac,
        singular_circles=tuple(circles),
        exterior_mass=1.0 - float(weight.mass(weight.extent)),
        extent=weight.extent,
        kinks=tuple(sorted(density_breaks)),
    )
    total = mu.total_mass()
    if abs(total - 1.0) > MASS_TOL:
        raise InvalidInputError(f"measure total {total:.8f} is not 1")
    return mu


def _jump_from_samples(t, a, k, *, width_frac=2e-3):
    """Jump of sampled ``a`` across ``t = k`` from one-sided linear fits."""
    w = max(width_frac * t[-1], 4 * float(np.min(np.diff(t))))
    left = (t > k - w) & (t < k * (1 - 1e-12))
    right = (t < k + w) & (t > k * (1 + 1e-12))
    if left.sum() < 2 or right.sum() < 2:
        return 0.0
    pl = np.polyfit(t[left] - k, a[left], 1)
    pr = np.polyfit(t[right] - k, a[right], 1)
    return pr[-1] - pl[-1]


def _local_slope(t, a, x, *, width_frac=2e-3):
    w = max(width_frac * t[-1], 4 * float(np.min(np.diff(t))))
    m = (t > x - w) & (t < x + w)
    if m.sum() < 3:
        j = int(np.searchsorted(t, x))
        m = slice(max(0, j - 3), min(t.size, j + 3))
    return np.polyfit(t[m] - x, a[m], 1)[0]


def _density_probes(pot, weight, kinks):
    guard = 1e-3 * weight.extent
    pieces = sorted({0.0, weight.extent, min(pot.free_radius, weight.extent),
                     *kinks})
    pts = []
    for a, b in zip(pieces[:-1], pieces[1:]):
        lo, hi = a + guard, b - guard
        if hi > lo:
            pts.append(np.linspace(lo, hi, 33))
    return np.concatenate(pts) if pts else np.array([weight.extent / 2])


def potential_from_measure(mu, weight, *, n_points=4096):
    """Re-solve the radial Poisson problem for the potential of a measure.

    Integrates ``t U'(t) = (mu - omega)(disc of radius t)`` inward from the
    chart edge, where the potential vanishes, then max-normalizes.
    """
    cuts = sorted({0.0, weight.extent,
                   *[r for r, _ in mu.singular_circles if r < weight.extent],
                   *[k for k in mu.kinks if k < weight.extent]})
    grid = _quad.graded_grid(cuts, n_points)

    excess = _quad.cumulative(
        lambda s: 4.0 * np.pi * (mu.ac_density(s) - weight.density(s)) * s, grid)

    samples = np.zeros_like(grid)
    upper_value = 0.0
    slices = _quad.piece_slices(grid, cuts)
    for (a, b), sl in zip(reversed(list(zip(cuts[:-1], cuts[1:]))),
                          reversed(slices)):
        t_p = grid[sl]
        mass_below = sum(m for r, m in mu.singular_circles if r <= a + 1e-15)
        disc = excess[sl] + mass_below
        v = np.zeros_like(t_p)
        nz = t_p > 0
        v[nz] = disc[nz] / t_p[nz]
        spline = CubicSpline(t_p, v)
        cum = _quad.cumulative(spline, t_p)
        samples[sl] = upper_value - (cum[-1] - cum)
        upper_value = samples[sl][0]

    samples -= samples.max()
    samples[np.abs(samples) < 1e-15] = 0.0
    support = grid[np.abs(samples) > 1e-13]
    free_radius = float(support.max()) if support.size else 0.0
    hole = mu.singular_circles[0][0] if mu.singular_circles else 0.0
    charge = mu.singular_circles[0][1] if mu.singular_circles else 0.0
    return RadialPotential(grid=grid, samples=samples, hole_radius=hole,
                           free_radius=free_radius, boundary_charge=charge,
                           kinks=mu.kinks)


def energy(pot, mu, metric, *, weight=None, check=True):
    """Energy ``-I(U, omega) - I(U, mu)`` of a potential/measure pair.

    ``mu`` must be the measure of ``pot``; unless ``check`` is disabled this
    is verified by re-deriving the measure and comparing within tolerance.
    Both integrals use composite Simpson on each smooth piece of the grid.
    """
    from .geometry import RadialWeight

    if weight is None:
        weight = RadialWeight.from_metric(metric)
    if check:
        _check_pair(pot, mu, weight)

    support_cuts = [c for c in _all_cuts(pot, weight.extent)
                    if c <= min(pot.free_radius, weight.extent)]
    i_omega = 0.0
    i_mu = 0.0
    for sl in _quad.piece_slices(pot.grid, support_cuts):
        t = pot.grid[sl]
        if t.size < 3:
            continue
        u = pot.samples[sl]
        i_omega -= 4.0 * np.pi * simpson(u * weight.density(t) * t, x=t)
        i_mu -= 4.0 * np.pi * simpson(u * mu.ac_density(t) * t, x=t)
    for r, m in mu.singular_circles:
        i_mu -= float(pot.value(r)) * m

    return EnergyReport(integral_against_omega=i_omega,
                        integral_against_mu=i_mu,
                        total=i_omega + i_mu)


def _check_pair(pot, mu, weight):
    rebuilt = measure_from_potential(pot, weight)
    got = dict(rebuilt.singular_circles)
    want = dict(mu.singular_circles)
    for r in sorted(set(got) | set(want)):
        g = got.get(r)
        if g is None and got:
            nearest = min(got, key=lambda x: abs(x - r))
            g = got[nearest] if abs(nearest - r) < 1e-9 else None
        if g is None or abs(g - want.get(r, 0.0)) > 1e-5:
            raise InconsistentPairError(f"circle atoms differ at radius {r:.6g}")
    probes = _density_probes(pot, weight, rebuilt.kinks)
    scale = max(1.0, float(np.max(weight.density(probes))))
    diff = np.max(np.abs(rebuilt.ac_density(probes) - mu.ac_density(probes)))
    if diff > 1e-4 * scale:
        raise InconsistentPairError("densities differ beyond tolerance")


def compare_energies(pot_lower, pot_upper, metric, *, tol=1e-9):
    """Energy ordering certificate for a pointwise-ordered potential pair.

    If ``pot_lower <= pot_upper`` everywhere (within tolerance) the energy
    of the upper potential's measure cannot exceed the lower one's; the
    certificate carries both energies.  Unordered pairs come back
    incomparable.
    """
    from .geometry import RadialWeight

    weight = RadialWeight.from_metric(metric)
    grid = np.union1d(pot_lower.grid, pot_upper.grid)
    lo = (pot_lower.profile.value(grid) if pot_lower.profile is not None
          else np.interp(grid, pot_lower.grid, pot_lower.samples))
    hi = (pot_upper.profile.value(grid) if pot_upper.profile is not None
          else np.interp(grid, pot_upper.grid, pot_upper.samples))
    if np.any(lo > hi + SIGN_TOL):
        return EnergyOrdering(comparable=False)

    e_lower = energy(pot_lower, measure_from_potential(pot_lower, weight),
                     metric, weight=weight, check=False).total
    e_upper = energy(pot_upper, measure_from_potential(pot_upper, weight),
                     metric, weight=weight, check=False).total
    return EnergyOrdering(comparable=True,
                          energy_of_lower=e_lower,
                          energy_of_upper=e_upper,
                          inequality_holds=bool(e_upper <= e_lower + tol))
