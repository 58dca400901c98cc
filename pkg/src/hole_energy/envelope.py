"""Obstacle and upper-envelope solvers for the hole-constrained minimizer.

Three routes to the constrained equilibrium potential live here:

* ``flat_minimizer`` - the exact closed form for a constant density
  ``a``: ``-a*pi*t^2`` inside the hole, ``a*pi*(2*e*r^2*log(t/r) - t^2)``
  on the matching annulus, zero beyond the free radius ``sqrt(e)*r``.
* ``radial_minimizer`` - a shooting solver for any radial weight, driven
  by the disc-mass identity ``t U'(t) = m(R) - m(t)`` on the annulus and
  ``t U'(t) = -m(t)`` inside the hole, with the free radius ``R`` pinned
  by the smooth fit and the centre normalization ``U(0) = 0``.
* ``envelope_grid`` - a two-dimensional projected SOR complementarity
  solver on a uniform grid, used both for upper envelopes with prescribed
  boundary data and, independently of the radial route, for the free
  minimizer.

``symmetrize`` circularly averages a localized grid field back onto a
radial profile; averaging never increases the energy.
"""

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import _quad
from .errors import (ConvergenceError, InvalidInputError, NoFreeBoundaryError,
                     NotLocalizedError, RadiusTooLargeError)
from .potential import EnergyReport, Piece, PiecewiseRadial, RadialPotential

SQRT_E = float(np.sqrt(np.e))

ENVELOPE_GIVEN_BOUNDARY = "envelope_given_boundary"
FREE_MINIMIZER = "free_minimizer"


@dataclass(frozen=True)
class EnvelopeProblem:
    """An envelope or free-minimizer problem on a chart disc hole.

    ``boundary_value`` is the negative data on the hole circle: a constant
    or a callable of the polar angle.  It is ignored in free-minimizer
    mode, where the boundary value emerges from the solve.
    """

    metric: object
    hole_radius: float
    boundary_value: Union[float, Callable, None] = None
    mode: str = ENVELOPE_GIVEN_BOUNDARY

    def __post_init__(self):
        if self.mode not in (ENVELOPE_GIVEN_BOUNDARY, FREE_MINIMIZER):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.hole_radius <= 0:
            raise InvalidInputError("hole radius must be positive")
        if self.hole_radius >= self.metric.chart_extent:
            raise RadiusTooLargeError("hole does not fit inside the chart")
        if self.mode == ENVELOPE_GIVEN_BOUNDARY:
            if self.boundary_value is None:
                raise InvalidInputError("envelope mode needs boundary data")
            if not callable(self.boundary_value) and self.boundary_value >= 0:
                raise InvalidInputError("boundary data must be negative")

    def boundary_samples(self, theta):
        theta = np.asarray(theta, dtype=float)
        if callable(self.boundary_value):
            return np.asarray(self.boundary_value(theta), dtype=float)
        return np.full_like(theta, float(self.boundary_value))


@dataclass
class GridField:
    """A chart-grid sampling of a potential over ``[-T, T]^2``.

    ``values`` is indexed ``[iy, ix]`` with node coordinates ``-T + i*h``.
    The masks partition the nodes into the hole interior, the boundary
    ring (non-hole nodes 4-adjacent to hole nodes), and the rest.
    """

    values: np.ndarray
    box_halfwidth: float
    h: float
    hole_mask: np.ndarray
    ring_mask: np.ndarray
    free_mask: np.ndarray
    hole_radius: float
    mode: str
    residual: float
    iterations: int
    boundary_values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def resolution(self):
        return self.values.shape[0]

    def axis(self):
        return np.linspace(-self.box_halfwidth, self.box_halfwidth,
                           self.resolution)

    def radii(self):
        x = self.axis()
        return np.hypot(x[None, :], x[:, None])

    def interpolate(self, x, y):
        """Bilinear interpolation of the field at arbitrary points."""
        T, h = self.box_halfwidth, self.h
        gx = np.clip((np.asarray(x) + T) / h, 0, self.resolution - 1 - 1e-9)
        gy = np.clip((np.asarray(y) + T) / h, 0, self.resolution - 1 - 1e-9)
        i0 = gx.astype(int)
        j0 = gy.astype(int)
        fx = gx - i0
        fy = gy - j0
        v = self.values
        return ((1 - fy) * ((1 - fx) * v[j0, i0] + fx * v[j0, i0 + 1])
                + fy * ((1 - fx) * v[j0 + 1, i0] + fx * v[j0 + 1, i0 + 1]))

    def write_csv(self, path):
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")

    def write_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack("<3d", float(self.resolution),
                                 self.box_halfwidth, self.h))
            fh.write(self.values.astype("<f8").tobytes(order="C"))


def _zero_piece(lo, hi):
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return Piece(lo, hi, f=zero, df=zero, d2f=zero)


def flat_minimizer(alpha, r, *, extent=None, n_points=4096):
    """Closed-form constrained minimizer potential for a constant density."""
    if alpha <= 0 or r <= 0:
        raise InvalidInputError("density and radius must be positive")
    R = SQRT_E * r
    cap = 1.0 / np.sqrt(2.0 * np.pi * alpha)
    T = cap if extent is None else float(extent)
    if R >= T:
        raise NoFreeBoundaryError("free radius reaches the chart edge")
    api = alpha * np.pi

    profile = PiecewiseRadial([
        Piece(0.0, r,
              f=lambda t: -api * np.asarray(t, float) ** 2,
              df=lambda t: -2.0 * api * np.asarray(t, float),
              d2f=lambda t: np.full_like(np.asarray(t, float), -2.0 * api)),
        Piece(r, R,
              f=lambda t: api * (2.0 * np.e * r * r * np.log(np.asarray(t, float) / r)
                                 - np.asarray(t, float) ** 2),
              df=lambda t: api * (2.0 * np.e * r * r / np.asarray(t, float)
                                  - 2.0 * np.asarray(t, float)),
              d2f=lambda t: api * (-2.0 * np.e * r * r / np.asarray(t, float) ** 2
                                   - 2.0)),
        _zero_piece(R, T),
    ])

    grid = _quad.graded_grid([0.0, r, R, T], n_points)
    samples = profile.value(grid)
    samples[grid >= R] = 0.0
    samples = np.minimum(samples, 0.0)
    return RadialPotential(grid=grid, samples=samples, hole_radius=float(r),
                           free_radius=float(R),
                           boundary_charge=2.0 * api * np.e * r * r,
                           kinks=(float(r),), profile=profile)


def _free_radius_equation(weight, r):
    """Centre normalization as a function of the trial free radius.

    ``F(R) = U(0)`` for the hole/annulus profile with smooth fit at ``R``;
    strictly decreasing in ``R`` wherever the weight is positive, with its
    unique root at the true free radius.
    """
    m = weight.mass
    inner = _quad.integrate(lambda s: m(s) / s, 0.0, r, cells=32)

    def F(R):
        ann = _quad.integrate(lambda s: m(s) / s, r, R, cells=32)
        return inner + ann - float(m(R)) * np.log(R / r)

    return F


def radial_minimizer(weight, r, *, n_points=4096):
    """Shooting solver for the constrained minimizer under a radial weight.

    Brackets the free radius in ``[1.1 r, min(5 r, chart edge)]``, bisects
    to 1e-3 relative, then polishes with Newton steps (numeric derivative)
    to 1e-12.  The returned potential carries exact piecewise derivatives
    built from the weight's disc-mass function, so measure recovery
    reproduces zero density up to roundoff on the support.
    """
    r = float(r)
    if r <= 0:
        raise InvalidInputError("hole radius must be positive")
    T = weight.extent
    if r >= T / 1.05:
        raise RadiusTooLargeError("hole radius reaches the chart edge")
    if float(weight.mass(min(3.0 * r, T))) >= 1.0:
        raise NoFreeBoundaryError("disc mass saturates before the free radius")

    F = _free_radius_equation(weight, r)
    lo, hi = 1.1 * r, min(5.0 * r, 0.999 * T)
    if hi <= lo or F(lo) <= 0 or F(hi) >= 0:
        raise NoFreeBoundaryError(
            "no sign change of the free-radius equation inside the chart")

    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if F(mid) > 0:
            lo = mid
        else:
            hi = mid
    R = 0.5 * (lo + hi)
    for _ in range(40):
        dR = 1e-6 * R
        deriv = (F(R + dR) - F(R - dR)) / (2.0 * dR)
        step = F(R) / deriv
        R_new = R - step
        if not lo * 0.99 <= R_new <= hi * 1.01:
            R_new = np.clip(R_new, lo, hi)
        if abs(R_new - R) <= 1e-12 * R:
            R = R_new
            break
        R = R_new

    m = weight.mass
    alpha = weight.density
    mR = float(m(R))
    beta0 = float(alpha(0.0))

    def du_hole(t):
        t = np.asarray(t, dtype=float)
        tt = np.where(t == 0.0, 1.0, t)
        return np.where(t == 0.0, 0.0, -np.asarray(m(t)) / tt)

    def d2_hole(t):
        t = np.asarray(t, dtype=float)
        tt = np.where(t == 0.0, 1.0, t)
        du_over_t = np.where(t == 0.0, -2.0 * np.pi * beta0,
                             -np.asarray(m(t)) / (tt * tt))
        return -4.0 * np.pi * np.asarray(alpha(t)) - du_over_t

    def du_ann(t):
        t = np.asarray(t, dtype=float)
        return (mR - np.asarray(m(t))) / t

    def d2_ann(t):
        t = np.asarray(t, dtype=float)
        return (-4.0 * np.pi * np.asarray(alpha(t))
                - (mR - np.asarray(m(t))) / (t * t))

    grid = _quad.graded_grid([0.0, r, R, T], n_points)
    sl_hole, sl_ann, _ = _quad.piece_slices(grid, [0.0, r, R, T])

    samples = np.zeros_like(grid)
    t_ann = grid[sl_ann]
    cum_ann = _quad.cumulative(du_ann, t_ann)
    samples[sl_ann] = cum_ann - cum_ann[-1]
    gamma = samples[sl_ann][0]
    t_hole = grid[sl_hole]
    cum_hole = _quad.cumulative(du_hole, t_hole)
    samples[sl_hole] = gamma - (cum_hole[-1] - cum_hole)
    samples = np.minimum(samples - samples.max(), 0.0)
    samples[np.abs(samples) < 1e-13] = 0.0

    hole_spline = CubicSpline(t_hole, samples[sl_hole])
    ann_spline = CubicSpline(t_ann, samples[sl_ann])
    profile = PiecewiseRadial([
        Piece(0.0, r, f=lambda t: hole_spline(np.asarray(t, float)),
              df=du_hole, d2f=d2_hole),
        Piece(r, R, f=lambda t: ann_spline(np.asarray(t, float)),
              df=du_ann, d2f=d2_ann),
        _zero_piece(R, T),
    ])

    return RadialPotential(grid=grid, samples=samples, hole_radius=r,
                           free_radius=float(R), boundary_charge=mR,
                           kinks=(r,), profile=profile)


def envelope_grid(problem, resolution, *, box_halfwidth=None,
                  relaxation="auto", tol=1e-9, max_iterations=200000,
                  window=True):
    """Projected-SOR solve of the discrete complementarity system.

    At plain nodes ``max(Lap U + 4*pi*alpha, -U) >= 0`` holds with equality
    in at least one slot; ring nodes clamp to the boundary data instead of
    zero; in free-minimizer mode the hole nodes carry the Poisson equation
    with no clamp.  The outer box boundary is pinned at zero, legitimate
    because the solutions of interest have compact support well inside.

    ``relaxation="auto"`` picks the classical optimal factor for the
    active window; pass a number to force one.  A solve that exhausts
    ``max_iterations`` raises ``ConvergenceError`` with the residual.
    """
    M = int(resolution)
    if M < 16:
        raise InvalidInputError("resolution too small")
    r = problem.hole_radius
    metric = problem.metric
    T = (4.0 * SQRT_E * r) if box_halfwidth is None else float(box_halfwidth)
    if T < 4.0 * SQRT_E * r - 1e-12:
        raise InvalidInputError("box must extend past four free radii")
    if T > metric.chart_extent * (1 + 1e-12):
        raise RadiusTooLargeError("box leaves the chart")

    axis = np.linspace(-T, T, M)
    h = axis[1] - axis[0]
    X, Y = np.meshgrid(axis, axis)
    rad = np.hypot(X, Y)
    hole = rad < r
    ring = np.zeros_like(hole)
    ring[1:, :] |= hole[:-1, :]
    ring[:-1, :] |= hole[1:, :]
    ring[:, 1:] |= hole[:, :-1]
    ring[:, :-1] |= hole[:, 1:]
    ring &= ~hole
    free = ~hole & ~ring

    if problem.mode == ENVELOPE_GIVEN_BOUNDARY:
        bdata = problem.boundary_samples(np.arctan2(Y, X))
        obstacle = np.where(ring, bdata, 0.0)
        equality = np.zeros_like(hole)
        gamma_min = float(bdata[ring].min()) if ring.any() else -1.0
    else:
        obstacle = np.zeros_like(rad)
        equality = hole
        gamma_min = -float(metric.density(0.0)) * np.pi * r * r

    source = np.pi * (h * h) * np.asarray(metric.density(rad), dtype=float)

    win = M
    if window:
        R_est = _support_estimate(metric, r, gamma_min)
        win = 2 * int(np.ceil((min(1.8 * R_est, T) / T) * (M / 2))) + 8
        win = min(M, max(win, 32))

    U = np.zeros_like(rad)
    while True:
        i0 = max(0, (M - win) // 2)
        i1 = min(M, i0 + win)
        sl = (slice(i0, i1), slice(i0, i1))
        U_w, res, iters = _psor(U[sl], equality[sl], obstacle[sl],
                                source[sl], relaxation, tol, max_iterations)
        U[sl] = U_w
        if i1 - i0 >= M:
            break
        band = np.concatenate([U_w[1, :], U_w[-2, :], U_w[:, 1], U_w[:, -2]])
        if np.max(np.abs(band)) == 0.0:
            break
        win = min(M, win * 2)  # support touched the window: widen and redo

    return GridField(values=U, box_halfwidth=T, h=h, hole_mask=hole,
                     ring_mask=ring, free_mask=free, hole_radius=r,
                     mode=problem.mode, residual=res, iterations=iters,
                     boundary_values=(obstacle if problem.mode ==
                                      ENVELOPE_GIVEN_BOUNDARY else None))


def _support_estimate(metric, r, gamma_min):
    """Free radius of the constant-density envelope with constant data."""
    a = float(metric.density(0.0))
    api = a * np.pi

    def bval(R):
        return api * (2.0 * R * R * np.log(r / R) + R * R - r * r) - gamma_min

    hi = 2.0 * SQRT_E * r
    while bval(hi) > 0 and hi < 1e6 * r:
        hi *= 2.0
    try:
        return brentq(bval, r * (1 + 1e-9), hi, xtol=1e-12)
    except ValueError:
        return SQRT_E * r


def _psor(U0, equality, obstacle, source, relaxation, tol, max_iterations):
    """Red-black projected SOR on one window: (values, residual, iterations)."""
    M = U0.shape[0]
    if relaxation == "auto":
        omega = 2.0 / (1.0 + np.sin(np.pi / M))
    else:
        omega = float(relaxation)
    if not 0.0 < omega < 2.0:
        raise InvalidInputError("relaxation factor must sit in (0, 2)")

    U = U0.copy()
    inner = (slice(1, -1), slice(1, -1))
    iy, ix = np.meshgrid(np.arange(1, M - 1), np.arange(1, M - 1),
                         indexing="ij")
    colors = ((iy + ix) % 2).astype(bool)
    ob_in = obstacle[inner]
    clamp = ~equality[inner]
    src_in = source[inner]

    def gs_target():
        return 0.25 * (U[2:, 1:-1] + U[:-2, 1:-1]
                       + U[1:-1, 2:] + U[1:-1, :-2]) + src_in

    res = np.inf
    check_every = 16
    view = U[inner]
    for it in range(1, max_iterations + 1):
        for color in (False, True):
            new = (1.0 - omega) * view + omega * gs_target()
            np.minimum(new, ob_in, out=new, where=clamp)
            mask = colors == color
            view[mask] = new[mask]
        if it % check_every == 0 or it == max_iterations:
            fixed = gs_target()
            np.minimum(fixed, ob_in, out=fixed, where=clamp)
            res = float(np.max(np.abs(view - fixed)))
            res /= max(1.0, float(np.max(np.abs(U))))
            if res < tol:
                return U, res, it
    raise ConvergenceError("projected SOR did not converge",
                           residual=res, iterations=max_iterations)


def grid_energy(fieldv, metric):
    """Energy of a grid field against its own discrete measure.

    The discrete curvature-corrected Laplacian supplies the measure
    density; circle charges appear automatically as concentrated rows of
    the discrete Laplacian.  Area element: ``i dz ^ dz~ = 2 dx dy``.
    """
    U = fieldv.values
    h = fieldv.h
    alpha = np.asarray(metric.density(fieldv.radii()), dtype=float)
    lap = np.zeros_like(U)
    lap[1:-1, 1:-1] = (U[2:, 1:-1] + U[:-2, 1:-1] + U[1:-1, 2:]
                       + U[1:-1, :-2] - 4.0 * U[1:-1, 1:-1]) / (h * h)
    dd = lap / (4.0 * np.pi)
    cell = 2.0 * h * h
    i_omega = -cell * float(np.sum(U * alpha))
    i_mu = -cell * float(np.sum(U * (alpha + dd)))
    return EnergyReport(integral_against_omega=i_omega,
                        integral_against_mu=i_mu,
                        total=i_omega + i_mu)


def symmetrize(fieldv, metric, cutoff, *, n_theta=2048):
    """Circular average of a localized grid field, as a radial potential.

    The input must vanish outside the ``cutoff`` radius (holes of radius
    ``r`` use ``cutoff = 2r``).  The average per radius is a trapezoid
    rule over the angle, which on the periodic circle is the uniform
    mean.  Averaging an admissible field for a radially symmetric weight
    yields an admissible radial field whose energy is no larger.
    """
    rad = fieldv.radii()
    outside = rad > cutoff
    scale = max(1.0, float(np.max(np.abs(fieldv.values))))
    if np.any(np.abs(fieldv.values[outside]) > 1e-10 * scale):
        raise NotLocalizedError("field support leaks past the cutoff radius")

    n_rad = max(64, int(np.ceil(2.2 * cutoff / fieldv.h)))
    t = np.linspace(0.0, cutoff, n_rad)
    theta = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    pts_x = t[:, None] * np.cos(theta)[None, :]
    pts_y = t[:, None] * np.sin(theta)[None, :]
    avg = fieldv.interpolate(pts_x, pts_y).mean(axis=1)
    avg = np.minimum(avg, 0.0)
    avg[np.abs(avg) < 1e-14] = 0.0

    top = max(cutoff * 1.001, fieldv.box_halfwidth)
    grid = np.concatenate([t, [top]])
    samples = np.concatenate([avg, [0.0]])
    nz = np.nonzero(np.abs(samples) > 1e-13)[0]
    free_radius = float(grid[min(nz.max() + 1, grid.size - 1)]) if nz.size else 0.0

    r_hole = cutoff / 2.0
    charge = _ring_jump(t, avg, r_hole)
    return RadialPotential(grid=grid, samples=samples, hole_radius=r_hole,
                           free_radius=max(free_radius, r_hole),
                           boundary_charge=max(charge, 0.0), kinks=(r_hole,))


def _ring_jump(t, u, r):
    """Estimated jump of ``t U'`` across ``t = r`` from one-sided fits."""
    du = np.gradient(u, t)
    a = t * du
    w = max(6 * (t[1] - t[0]), 0.03 * r)
    left = (t > r - w) & (t < r - 0.2 * w)
    right = (t < r + w) & (t > r + 0.2 * w)
    if left.sum() < 2 or right.sum() < 2:
        return 0.0
    pl = np.polyfit(t[left] - r, a[left], 1)
    pr = np.polyfit(t[right] - r, a[right], 1)
    return float(pr[-1] - pl[-1])


def field_from_radial(pot, resolution, box_halfwidth):
    """Sample a radial potential onto a grid field (energy cross-checks)."""
    M = int(resolution)
    axis = np.linspace(-box_halfwidth, box_halfwidth, M)
    h = axis[1] - axis[0]
    X, Y = np.meshgrid(axis, axis)
    rad = np.hypot(X, Y)
    vals = np.asarray(pot.value(rad.ravel()), dtype=float).reshape(rad.shape)
    vals[rad >= pot.free_radius] = 0.0
    vals = np.minimum(vals, 0.0)
    hole = rad < pot.hole_radius
    ring = np.zeros_like(hole)
    ring[1:, :] |= hole[:-1, :]
    ring[:-1, :] |= hole[1:, :]
    ring[:, 1:] |= hole[:, :-1]
    ring[:, :-1] |= hole[:, 1:]
    ring &= ~hole
    return GridField(values=vals, box_halfwidth=box_halfwidth, h=h,
                     hole_mask=hole, ring_mask=ring, free_mask=~hole & ~ring,
                     hole_radius=pot.hole_radius, mode="sampled",
                     residual=0.0, iterations=0)
