"""Scalar fields sampled on a :class:`~liouville_lab.grid.DiskGrid`.

A field is the pair (grid, nodal values) plus, when the field comes from a
closed form, the evaluator itself (and optionally its gradient).  Carrying the
evaluator lets the integral operators refine beyond the grid; everything else
works from the samples alone.  Fields are immutable: operations return new
instances.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .grid import DiskGrid


class FieldShapeError(ValueError):
    pass


class ScalarField:
    """Samples of a scalar function on the inside nodes of a disk grid.

    Parameters
    ----------
    grid : DiskGrid
    values : (n, n) array; entries at exterior nodes are ignored (stored NaN).
    evaluator : optional vectorized callable ``f(x, y) -> values``.  When
        given, the stored samples must agree with it at the nodes to machine
        precision (this is checked).
    gradient : optional callable ``(x, y) -> (fx, fy)`` matching ``evaluator``.
    boundary : optional callable ``(x, y) -> values`` giving Dirichlet data on
        the circle; solver outputs carry their boundary trace here so that
        boundary minima and Shortley-Weller arms never rely on extrapolation.
    name : label used in reports and serialized headers.
    """

    def __init__(self, grid, values, evaluator=None, gradient=None,
                 boundary=None, name="field", check=True):
        if values.shape != (grid.n, grid.n):
            raise FieldShapeError(
                f"values shape {values.shape} does not match grid n={grid.n}")
        vals = np.array(values, dtype=float)
        vals[grid.exterior] = np.nan
        if check and evaluator is not None:
            probe = evaluator(grid.X[grid.inside], grid.Y[grid.inside])
            got = vals[grid.inside]
            scale = max(1.0, float(np.max(np.abs(got))))
            if not np.allclose(got, probe, rtol=0.0, atol=1e-12 * scale):
                raise FieldShapeError(
                    "sampled values disagree with the closed-form evaluator at the nodes")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals
        self.evaluator = evaluator
        self.gradient = gradient
        self.boundary = boundary if boundary is not None else evaluator
        self.name = name

    # ------------------------------------------------------------------
    @classmethod
    def from_function(cls, grid, fn, gradient=None, name="field"):
        vals = np.full((grid.n, grid.n), np.nan)
        vals[grid.inside] = fn(grid.X[grid.inside], grid.Y[grid.inside])
        return cls(grid, vals, evaluator=fn, gradient=gradient, name=name,
                   check=False)

    @classmethod
    def from_values(cls, grid, values, boundary=None, name="field"):
        return cls(grid, values, boundary=boundary, name=name, check=False)

    # ------------------------------------------------------------------
    def with_name(self, name):
        f = ScalarField.__new__(ScalarField)
        f.__dict__.update(self.__dict__)
        f.name = name
        return f

    def value_at_origin(self):
        return float(self.values[self.grid.origin_index])

    def origin_value_refined(self):
        """Value at the origin from a quadratic fit on the 3x3 centre patch.

        Falls back to the origin node sample when the patch is incomplete.
        For evaluator-backed fields the closed form wins.
        """
        if self.evaluator is not None:
            return float(np.asarray(self.evaluator(np.array([0.0]), np.array([0.0])))[0])
        ci, cj = self.grid.origin_index
        patch = self.values[ci - 1:ci + 2, cj - 1:cj + 2]
        if patch.shape != (3, 3) or np.any(np.isnan(patch)):
            return self.value_at_origin()
        h = self.grid.h
        d = np.array([-h, 0.0, h])
        PX, PY = np.meshgrid(d, d, indexing="ij")
        A = np.column_stack([np.ones(9), PX.ravel(), PY.ravel(),
                             PX.ravel() ** 2, PX.ravel() * PY.ravel(), PY.ravel() ** 2])
        coef, *_ = np.linalg.lstsq(A, patch.ravel(), rcond=None)
        return float(coef[0])

    def interpolate(self, px, py):
        """Bilinear interpolation at points strictly inside the node hull.

        Cells touching exterior nodes are not interpolable; callers are
        expected to stay a couple of cells away from the rim (the operators
        that use this enforce it).
        """
        g = self.grid
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        fi = (px + g.radius) / g.h
        fj = (py + g.radius) / g.h
        i0 = np.clip(np.floor(fi).astype(int), 0, g.n - 2)
        j0 = np.clip(np.floor(fj).astype(int), 0, g.n - 2)
        tx = fi - i0
        ty = fj - j0
        v00 = self.values[i0, j0]
        v10 = self.values[i0 + 1, j0]
        v01 = self.values[i0, j0 + 1]
        v11 = self.values[i0 + 1, j0 + 1]
        return ((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
                + (1 - tx) * ty * v01 + tx * ty * v11)

    def at_points(self, px, py):
        """Field values at arbitrary points: closed form if carried, else bilinear."""
        if self.evaluator is not None:
            return np.asarray(self.evaluator(np.asarray(px, float), np.asarray(py, float)))
        return self.interpolate(px, py)

    def boundary_values(self, m=256):
        """Samples of the field on the grid circle (trapezoid nodes).

        Uses the boundary trace / evaluator when available; otherwise falls
        back to bilinear samples on the circle of radius ``radius - 2h``.
        """
        g = self.grid
        bx, by, _ = g.circle_points(g.radius, m)
        if self.boundary is not None:
            return np.asarray(self.boundary(bx, by))
        rho = g.radius - 2.0 * g.h
        bx, by, _ = g.circle_points(rho, m)
        return self.interpolate(bx, by)

    def boundary_min(self, m=256):
        return float(np.min(self.boundary_values(m)))

    # ------------------------------------------------------------------
    # serialization: CSV body (x,y,value rows) + JSON header
    # ------------------------------------------------------------------

    def to_csv(self):
        """CSV string with one ``x,y,value`` row per inside node (row-major)."""
        g = self.grid
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        ii, jj = np.nonzero(g.inside)
        for i, j in zip(ii, jj):
            w.writerow([repr(float(g.X[i, j])), repr(float(g.Y[i, j])),
                        repr(float(self.values[i, j]))])
        return buf.getvalue()

    def header_json(self):
        return json.dumps({"schema": "field/1", "name": self.name,
                           "radius": self.grid.radius, "n": self.grid.n},
                          sort_keys=True)

    def save(self, path_csv, path_json):
        with open(path_csv, "w") as fh:
            fh.write(self.to_csv())
        with open(path_json, "w") as fh:
            fh.write(self.header_json() + "\n")

    @classmethod
    def load(cls, path_csv, path_json):
        with open(path_json) as fh:
            hdr = json.load(fh)
        grid = DiskGrid(hdr["radius"], hdr["n"])
        vals = np.full((grid.n, grid.n), np.nan)
        with open(path_csv) as fh:
            rd = csv.reader(fh)
            next(rd)  # header row
            for sx, sy, sv in rd:
                x, y, v = float(sx), float(sy), float(sv)
                i = int(round((x + grid.radius) / grid.h))
                j = int(round((y + grid.radius) / grid.h))
                vals[i, j] = v
        return cls.from_values(grid, vals, name=hdr.get("name", "field"))

    def __repr__(self):
        finite = self.values[self.grid.inside]
        return (f"ScalarField({self.name!r}, n={self.grid.n}, r={self.grid.radius}, "
                f"range=[{np.min(finite):.4g}, {np.max(finite):.4g}])")
