"""Differential and integral operators on disk fields.

All operators are pure: they take fields (plus weights/radii) and return new
fields or numbers.  Grid-sampled inputs get second-order finite differences
and node-area quadrature; closed-form inputs are routed to adaptive polar
quadrature and exact gradients where they carry them.
"""

from __future__ import annotations

import numpy as np

from .field import ScalarField
from .grid import DiskGrid, _DIRS
from .quadrature import QuadratureResult, adaptive_polar


class OperatorDomainError(ValueError):
    """Raised when an operator is asked to act outside its supported domain."""


# ----------------------------------------------------------------------
# Laplacian: 5-point stencil inside, unequal arms at the rim
# ----------------------------------------------------------------------

def laplacian(f, boundary=None):
    """Discrete Laplacian of ``f`` on interior and boundary-adjacent nodes.

    Interior nodes use the standard 5-point stencil.  Boundary-adjacent nodes
    use the unequal-arm (Shortley-Weller) stencil; the values at the circle
    crossings come from ``boundary`` (default: the field's own boundary trace
    or evaluator).  Both stencils are exact on quadratics.  Nodes whose value
    cannot be formed are NaN in the returned field.
    """
    g = f.grid
    v = f.values
    h = g.h
    out = np.full_like(v, np.nan)

    shifted = []
    for dx, dy in _DIRS:
        s = np.full_like(v, np.nan)
        if dx == 1:
            s[:-1, :] = v[1:, :]
        elif dx == -1:
            s[1:, :] = v[:-1, :]
        elif dy == 1:
            s[:, :-1] = v[:, 1:]
        else:
            s[:, 1:] = v[:, :-1]
        shifted.append(s)

    it = g.interior
    out[it] = (shifted[0][it] + shifted[1][it] + shifted[2][it] + shifted[3][it]
               - 4.0 * v[it]) / (h * h)

    ba = g.boundary_adjacent
    if np.any(ba):
        bfun = boundary if boundary is not None else f.boundary
        arm_vals = [np.array(s, copy=True) for s in shifted]
        if bfun is None:
            # no boundary data: leave rim nodes NaN
            pass
        else:
            ii, jj, dd, px, py = g.boundary_arm_points()
            bv = np.asarray(bfun(px, py), dtype=float)
            for d in range(4):
                sel = dd == d
                arm_vals[d][ii[sel], jj[sel]] = bv[sel]
        tE, tW, tN, tS = (g.arm_fractions[d][ba] for d in range(4))
        uE, uW, uN, uS = (arm_vals[d][ba] for d in range(4))
        uP = v[ba]
        out[ba] = (2.0 / (h * h)) * (
            uE / (tE * (tE + tW)) + uW / (tW * (tE + tW))
            + uN / (tN * (tN + tS)) + uS / (tS * (tN + tS))
            - uP * (1.0 / (tE * tW) + 1.0 / (tN * tS)))
    return ScalarField.from_values(g, out, name=f"lap({f.name})")


def gradient_values(f, boundary=None):
    """Nodal gradient (fx, fy) arrays: centered differences inside, arm-aware
    one-sided differences at the rim.  NaN where not computable."""
    g = f.grid
    v = f.values
    h = g.h
    fx = np.full_like(v, np.nan)
    fy = np.full_like(v, np.nan)

    east = np.full_like(v, np.nan)
    west = np.full_like(v, np.nan)
    north = np.full_like(v, np.nan)
    south = np.full_like(v, np.nan)
    east[:-1, :] = v[1:, :]
    west[1:, :] = v[:-1, :]
    north[:, :-1] = v[:, 1:]
    south[:, 1:] = v[:, :-1]

    it = g.interior
    fx[it] = (east[it] - west[it]) / (2.0 * h)
    fy[it] = (north[it] - south[it]) / (2.0 * h)

    ba = g.boundary_adjacent
    if np.any(ba):
        bfun = boundary if boundary is not None else f.boundary
        arm = [east, west, north, south]
        if bfun is not None:
            ii, jj, dd, px, py = g.boundary_arm_points()
            bv = np.asarray(bfun(px, py), dtype=float)
            for d in range(4):
                sel = dd == d
                arm[d] = np.array(arm[d], copy=True)
                arm[d][ii[sel], jj[sel]] = bv[sel]
        # unequal-arm first derivative (exact on quadratics):,
        # f'(0) = [tW^2 uE - tE^2 uW - (tW^2 - tE^2) uP] / (h tE tW (tE + tW))
        tE, tW, tN, tS = (g.arm_fractions[d][ba] for d in range(4))
        uE, uW, uN, uS = (a[ba] for a in arm)
        uP = v[ba]
        fx[ba] = (tW ** 2 * uE - tE ** 2 * uW - (tW ** 2 - tE ** 2) * uP) \
            / (h * tE * tW * (tE + tW))
        fy[ba] = (tS ** 2 * uN - tN ** 2 * uS - (tS ** 2 - tN ** 2) * uP) \
            / (h * tN * tS * (tN + tS))
    return fx, fy


# ----------------------------------------------------------------------
# Integrals
# ----------------------------------------------------------------------

def dirichlet_energy(f, rho=None):
    """Integral of |grad f|^2 over B_rho by node-area quadrature."""
    g = f.grid
    if rho is None:
        rho = g.radius
    if rho <= 0.0 or rho > g.radius * (1.0 + 1e-12):
        raise OperatorDomainError(f"energy radius {rho} outside (0, {g.radius}]")
    if f.gradient is not None:
        return adaptive_polar(lambda x, y: _grad_sq(f, x, y), rho, tol=1e-10,
                              sites=_sites(f))
    fx, fy = gradient_values(f)
    areas = g.cell_areas(rho)
    dens = fx * fx + fy * fy
    mask = areas > 0.0
    if np.any(~np.isfinite(dens[mask])):
        # rim nodes without boundary data: drop their (tiny-area) cells
        dens = np.where(np.isfinite(dens), dens, 0.0)
    total = float(np.sum(dens[mask] * areas[mask]))
    return QuadratureResult(total, abs(total) * (g.h / rho) ** 2, int(mask.sum()))


def _grad_sq(f, x, y):
    gx, gy = f.gradient(x, y)
    return gx * gx + gy * gy


def _sites(f):
    hint = getattr(f, "concentration_sites", None)
    if hint is None:
        return ()
    return hint() if callable(hint) else tuple(hint)


def weighted_mass(f, weight, delta, tol=1e-9):
    """Integral of W e^f over B_delta.

    Closed-form fields go through adaptive polar quadrature (refined near the
    origin, the advertised concentration sites and the weight zeros); sampled
    fields use node-area quadrature on the clipped cells.
    """
    g = f.grid
    if delta <= 0.0:
        return QuadratureResult(0.0, 0.0, 0)
    if f.evaluator is not None:
        ev = f.evaluator
        fn = lambda x, y: weight(x, y) * np.exp(ev(x, y))
        sites = list(_sites(f))
        for p, a in zip(weight.poles.poles, weight.poles.alphas):
            sites.append((p.real, p.imag, max(abs(p) * 0.25, 1e-12)))
        return adaptive_polar(fn, delta, tol=tol, sites=sites)
    if delta > g.radius * (1.0 + 1e-12):
        raise OperatorDomainError(
            f"mass radius {delta} exceeds the sampled grid radius {g.radius}")
    areas = g.cell_areas(delta)
    mask = areas > 0.0
    vals = weight(g.X[mask], g.Y[mask]) * np.exp(f.values[mask])
    total = float(np.sum(vals * areas[mask]))
    return QuadratureResult(total, abs(total) * (g.h / max(delta, g.h)) ** 2, mask.sum())


def circle_samples(f, rho, m=256):
    """(x, y, theta, values) on the circle of radius rho."""
    g = f.grid
    cx, cy, th = g.circle_points(rho, m)
    if f.evaluator is not None:
        vals = np.asarray(f.evaluator(cx, cy))
    else:
        if rho > g.radius - 2.0 * g.h + 1e-12 * g.radius:
            raise OperatorDomainError(
                f"circle radius {rho} too close to the rim for sampled data "
                f"(need rho <= radius - 2h = {g.radius - 2 * g.h:.6g})")
        vals = f.interpolate(cx, cy)
    return cx, cy, th, vals


def pohozaev_boundary_functional(f, weight, rho, m=256):
    """rho * integral over the circle |x| = rho of
    (|d_nu f|^2 - |grad f|^2 / 2 + W e^f) dsigma.

    Exact gradients are used when the field carries them; otherwise the normal
    derivative comes from a one-sided second-order radial difference of
    interpolated values and the tangential derivative from differentiating the
    circle samples.
    """
    g = f.grid
    cx, cy, th, vals = circle_samples(f, rho, m)
    w_vals = weight(cx, cy)
    if f.gradient is not None:
        gx, gy = f.gradient(cx, cy)
        nx, ny = cx / rho, cy / rho
        dn = gx * nx + gy * ny
        grad_sq = gx * gx + gy * gy
    else:
        h = g.h
        v1 = f.interpolate(cx * (rho - h) / rho, cy * (rho - h) / rho)
        v2 = f.interpolate(cx * (rho - 2 * h) / rho, cy * (rho - 2 * h) / rho)
        dn = (3.0 * vals - 4.0 * v1 + v2) / (2.0 * h)
        dt = np.gradient(np.concatenate([vals[-2:], vals, vals[:2]]),
                         2.0 * np.pi / m)[2:-2] / rho
        grad_sq = dn * dn + dt * dt
    integrand = dn * dn - 0.5 * grad_sq + w_vals * np.exp(vals)
    # trapezoid on the circle: uniform weights, dsigma = rho dtheta
    return float(rho * np.sum(integrand) * (2.0 * np.pi / m) * rho)
