"""Quadrature and grid helpers shared by the radial solvers."""

from functools import lru_cache

import numpy as np
from scipy.optimize import brentq


@lru_cache(maxsize=None)
def _gauss_nodes(order):
    return np.polynomial.legendre.leggauss(order)


def integrate(f, a, b, *, order=10, cells=16):
    """Composite Gauss-Legendre integral of a smooth vectorized function."""
    if b <= a:
        return 0.0
    edges = np.linspace(a, b, cells + 1)
    x, w = _gauss_nodes(order)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = mid[:, None] + half[:, None] * x[None, :]
    return float(np.sum(w[None, :] * f(pts) * half[:, None]))


def cumulative(f, grid, *, order=10):
    """Cumulative integral of ``f`` along ``grid``, one Gauss panel per cell.

    Returns an array ``C`` with ``C[k] = int_{grid[0]}^{grid[k]} f``.
    """
    grid = np.asarray(grid, dtype=float)
    x, w = _gauss_nodes(order)
    mid = 0.5 * (grid[:-1] + grid[1:])
    half = 0.5 * np.diff(grid)
    pts = mid[:, None] + half[:, None] * x[None, :]
    cell = np.sum(w[None, :] * f(pts), axis=1) * half
    out = np.empty(grid.size)
    out[0] = 0.0
    np.cumsum(cell, out=out[1:])
    return out


def _graded_piece(a, b, n_steps, end_fraction):
    """Nodes on [a, b] whose steps shrink geometrically toward both ends."""
    if n_steps < 8:
        return np.linspace(a, b, n_steps + 1)
    expo = np.minimum(np.arange(n_steps), n_steps - 1 - np.arange(n_steps))

    def smallest_step(q):
        w = np.exp(np.minimum(expo * np.log(q), 500.0))
        return 1.0 / np.sum(w / w[0])

    # Pick the growth ratio so the end cells are ~end_fraction of the piece.
    if smallest_step(1.0 + 1e-12) <= end_fraction:
        q = 1.0
    else:
        q = brentq(lambda t: smallest_step(t) - end_fraction, 1.0 + 1e-12, 4.0,
                   xtol=1e-12)
    w = np.exp(np.minimum(expo * np.log(q), 500.0))
    nodes = a + (b - a) * np.concatenate(([0.0], np.cumsum(w))) / np.sum(w)
    nodes[-1] = b
    return nodes


def graded_grid(breakpoints, n_points=4096, *, end_fraction=1e-5):
    """Radial grid refined geometrically toward every breakpoint.

    ``breakpoints`` must be strictly increasing; they all appear as exact
    nodes so piecewise-smooth integrands can be integrated piece by piece.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2 or np.any(np.diff(bp) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    lengths = np.diff(bp)
    total = lengths.sum()
    alloc = np.maximum(64, np.round(n_points * lengths / total).astype(int))
    parts = []
    for (a, b), n in zip(zip(bp[:-1], bp[1:]), alloc):
        piece = _graded_piece(a, b, int(n), end_fraction)
        parts.append(piece if not parts else piece[1:])
    return np.concatenate(parts)


def piece_slices(grid, breakpoints):
    """Index slices of ``grid`` covering each piece between breakpoints."""
    out = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        i = int(np.searchsorted(grid, a))
        j = int(np.searchsorted(grid, b))
        out.append(slice(i, j + 1))
    return out
