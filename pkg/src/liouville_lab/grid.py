"""Uniform Cartesian grid on a disk with Shortley-Weller boundary treatment.

The disk B_r is covered by an n-by-n node lattice with spacing h = 2r/(n-1),
n odd so that the origin is a node.  Nodes fall into three classes:

* ``interior``            -- strictly inside the disk with all four arms of
                             length h ending at inside nodes,
* ``boundary_adjacent``   -- strictly inside, but at least one arm crosses the
                             circle; the crossing distance (as a fraction of h)
                             is stored per direction for the unequal-arm
                             stencil,
* ``exterior``            -- on or outside the circle; such nodes never carry
                             field values.

The grid also owns the quadrature weights used by the node-based integrals:
each inside node gets the area of its h-by-h cell clipped to the disk (or to a
smaller concentric disk, see :meth:`DiskGrid.cell_areas`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MIN_NODES = 33

# Directions are ordered east, west, north, south throughout this module.
_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))

# Subsampling factor for the area of cells cut by a circle.  16x16 midpoints
# per cut cell keep the clipped-area error per cell below ~1e-3 h^2, which is
# enough for the O(h^2)-accurate integrals built on top.
_CLIP_SUBSAMPLES = 16


class GridConfigError(ValueError):
    """Raised when a grid request violates the supported envelope."""


def _ray_circle_fraction(x, y, dx, dy, h, radius):
    """Fraction t in (0, 1] such that (x + t*h*dx, y + t*h*dy) lies on the circle.

    Assumes the node (x, y) is strictly inside and the full arm endpoint is
    not.  Solves |p + t*h*d|^2 = radius^2 for the positive root.
    """
    # quadratic a t^2 + 2 b t + c = 0 with a = h^2, b = h*(x dx + y dy)
    a = h * h
    b = h * (x * dx + y * dy)
    c = x * x + y * y - radius * radius
    disc = b * b - a * c
    t = (-b + np.sqrt(np.maximum(disc, 0.0))) / a
    return t


@dataclass(frozen=True)
class DiskGrid:
    """Immutable disk grid.  Construct via ``DiskGrid(radius, n)``."""

    radius: float
    n: int
    h: float = field(init=False)

    def __post_init__(self):
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise GridConfigError(f"grid radius must be positive and finite, got {self.radius}")
        if self.n < MIN_NODES:
            raise GridConfigError(f"grid needs at least {MIN_NODES} nodes per side, got n={self.n}")
        if self.n % 2 == 0:
            raise GridConfigError(f"grid size must be odd so the origin is a node, got n={self.n}")
        object.__setattr__(self, "h", 2.0 * self.radius / (self.n - 1))
        self._build()

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _build(self):
        n, r, h = self.n, self.radius, self.h
        axis = np.linspace(-r, r, n)
        # snap the centre exactly to zero (linspace already does for odd n,
        # but be explicit: the origin node is special throughout)
        axis[n // 2] = 0.0
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        rho2 = X * X + Y * Y
        # nodes numerically on the circle count as exterior: their value is
        # boundary data, not an unknown
        inside = rho2 < r * r * (1.0 - 1e-14)

        # neighbour-inside masks, padded with False outside the lattice
        nb_inside = []
        for dx, dy in _DIRS:
            m = np.zeros_like(inside)
            src = inside
            if dx == 1:
                m[:-1, :] = src[1:, :]
            elif dx == -1:
                m[1:, :] = src[:-1, :]
            elif dy == 1:
                m[:, :-1] = src[:, 1:]
            else:
                m[:, 1:] = src[:, :-1]
            nb_inside.append(m)
        all_nb = nb_inside[0] & nb_inside[1] & nb_inside[2] & nb_inside[3]
        interior = inside & all_nb
        boundary_adjacent = inside & ~all_nb

        # arm fractions for the unequal-arm stencil; 1.0 where the neighbour
        # is a regular inside node
        theta = np.ones((4,) + inside.shape)
        bx, by = X[boundary_adjacent], Y[boundary_adjacent]
        for d, (dx, dy) in enumerate(_DIRS):
            cut = boundary_adjacent & ~nb_inside[d]
            t = _ray_circle_fraction(X[cut], Y[cut], dx, dy, h, r)
            # guard against degenerate zero-length arms from roundoff
            theta[d][cut] = np.clip(t, 1e-12, 1.0)

        object.__setattr__(self, "xs", axis)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "inside", inside)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "boundary_adjacent", boundary_adjacent)
        object.__setattr__(self, "exterior", ~inside)
        object.__setattr__(self, "arm_fractions", theta)
        for arr in (X, Y, inside, interior, boundary_adjacent, theta):
            arr.flags.writeable = False
        ci = n // 2
        object.__setattr__(self, "origin_index", (ci, ci))

    # ------------------------------------------------------------------
    # geometry helpers
    # ------------------------------------------------------------------

    def boundary_arm_points(self):
        """Coordinates of the circle points referenced by cut arms.

        Returns ``(ii, jj, d, px, py)`` arrays: node indices, direction index
        and the circle point each cut arm ends at.
        """
        ii_all, jj_all, dd, px, py = [], [], [], [], []
        for d, (dx, dy) in enumerate(_DIRS):
            frac = self.arm_fractions[d]
            # a cut arm is one whose neighbor is not an inside node; the
            # fraction alone cannot tell (a neighbor exactly on the circle
            # has fraction 1.0 but is exterior)
            nb_inside = np.zeros_like(self.inside)
            src = self.inside
            if d == 0:
                nb_inside[:-1, :] = src[1:, :]
            elif d == 1:
                nb_inside[1:, :] = src[:-1, :]
            elif d == 2:
                nb_inside[:, :-1] = src[:, 1:]
            else:
                nb_inside[:, 1:] = src[:, :-1]
            cut = self.boundary_adjacent & ~nb_inside
            ii, jj = np.nonzero(cut)
            t = frac[ii, jj]
            ii_all.append(ii)
            jj_all.append(jj)
            dd.append(np.full(ii.shape, d))
            px.append(self.X[ii, jj] + t * self.h * dx)
            py.append(self.Y[ii, jj] + t * self.h * dy)
        cat = lambda parts: np.concatenate(parts) if parts else np.array([])
        return (cat(ii_all), cat(jj_all), cat(dd), cat(px), cat(py))

    def cell_areas(self, delta=None):
        """Per-node quadrature weights: cell area clipped to the disk B_delta.

        ``delta`` defaults to the grid radius.  Cells fully inside get h^2,
        cells fully outside 0, cut cells a midpoint-subsampled fraction of
        h^2.  Slivers of B_delta covered only by cells of *exterior* nodes are
        reassigned to the adjacent inside node (total area stays exact; the
        value displacement is O(h) on an O(h)-measure band, so integrals keep
        their O(h^2) accuracy).  The result is (n, n), zero at exterior nodes.
        """
        if delta is None:
            delta = self.radius
        if delta <= 0.0:
            return np.zeros((self.n, self.n))
        delta = min(delta, self.radius)
        return self._cell_areas_cached(round(float(delta), 15))

    @lru_cache(maxsize=128)
    def _cell_areas_cached(self, delta):
        h = self.h
        X, Y = self.X, self.Y
        # distance from cell centre (the node) to the origin
        rho = np.hypot(X, Y)
        half_diag = h * np.sqrt(0.5)
        areas = np.zeros_like(X)
        full = rho <= delta - half_diag
        areas[full] = h * h
        cut = (~full) & (rho < delta + half_diag)
        if np.any(cut):
            ii, jj = np.nonzero(cut)
            m = _CLIP_SUBSAMPLES
            offs = (np.arange(m) + 0.5) / m - 0.5
            ox, oy = np.meshgrid(offs, offs, indexing="ij")
            sx = X[ii, jj][:, None] + h * ox.ravel()[None, :]
            sy = Y[ii, jj][:, None] + h * oy.ravel()[None, :]
            frac = np.mean(sx * sx + sy * sy < delta * delta, axis=1)
            areas[ii, jj] = frac * h * h
        orphan = self.exterior & (areas > 0.0)
        if np.any(orphan):
            n = self.n
            for i, j in zip(*np.nonzero(orphan)):
                # hand the sliver to the inward-most inside neighbour
                best = None
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ni, nj = i + di, j + dj
                        if 0 <= ni < n and 0 <= nj < n and self.inside[ni, nj]:
                            d2 = X[ni, nj] ** 2 + Y[ni, nj] ** 2
                            if best is None or d2 < best[0]:
                                best = (d2, ni, nj)
                if best is not None:
                    areas[best[1], best[2]] += areas[i, j]
                areas[i, j] = 0.0
        areas[self.exterior] = 0.0
        areas.flags.writeable = False
        return areas

    def circle_points(self, rho, m=256):
        """m equally spaced points on the circle of radius rho (trapezoid nodes)."""
        t = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        return rho * np.cos(t), rho * np.sin(t), t

    def refined(self):
        """The grid with n -> 2n-1 (halved spacing, same radius)."""
        return DiskGrid(self.radius, 2 * self.n - 1)

    def __repr__(self):
        return f"DiskGrid(radius={self.radius}, n={self.n})"
