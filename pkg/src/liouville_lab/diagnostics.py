"""Concentration diagnostics: mass quantization, Pohozaev and energy
identities, profile residuals, pointwise bounds, and the scale cascade.

Conventions used throughout:

* masses are integrals of W e^xi over disks; the quantized ladder lives at
  8 pi n, and m-type quantities are masses divided by 2 pi;
* "the peak" means the field value at the node nearest the origin, refined by
  a quadratic fit on its 3x3 neighborhood;
* boundedness of a sequence is operationalized as "no fitted log-trend":
  the least-squares slope of ln|value| against ln k stays below a threshold
  (asymptotic constants are not explicit, so trends are what is testable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .calculus import (OperatorDomainError, circle_samples, dirichlet_energy,
                       pohozaev_boundary_functional, weighted_mass)
from .quadrature import total_mass_ladder

EIGHT_PI = 8.0 * math.pi
PLATEAU_SLOPE = 0.05          # |d ln M / d ln delta| below this counts as flat
ZERO_MASS_FLOOR = 1e-3 * EIGHT_PI
TREND_SLOPE = 0.05            # "no trend" gate for O(1) sequences
SAME_GROUP_TOL = 1e-3         # cascade: ratio settled
SPLIT_GROUP_TOL = 1e-2        # cascade: ratio still drifting -> new group
Z_FLOOR = 1e-8


class DataError(ValueError):
    """Raised when diagnostic input data violates its own invariants."""


def fitted_log_slope(ks, values, floor=1e-12):
    """Least-squares slope of ln|values| vs ln k (the trend detector)."""
    ks = np.asarray(ks, float)
    v = np.maximum(np.abs(np.asarray(values, float)), floor)
    if len(ks) < 2:
        return 0.0
    lx, ly = np.log(ks), np.log(v)
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx)) if np.any(lx) else 0.0


# ----------------------------------------------------------------------
# mass profiles and the quantization ladder
# ----------------------------------------------------------------------

@dataclass
class MassProfile:
    ks: tuple
    deltas: np.ndarray            # descending geometric grid
    masses: np.ndarray            # (K, D)
    errors: np.ndarray            # quadrature error estimates, same shape
    flagged: np.ndarray           # bool, entries that failed to integrate
    mu_local: np.ndarray = None   # per-k mass at the collapse scale L0 tau_k
    mu_scale: np.ndarray = None   # the radii used for mu_local

    def monotone_defect(self):
        """Worst decrease of M_k(delta) along growing delta (should be ~0)."""
        m = np.where(self.flagged, np.nan, self.masses)
        diffs = m[:, :-1] - m[:, 1:]   # deltas descending: earlier >= later
        return float(np.nanmax(np.where(np.isnan(diffs), -np.inf, -diffs), initial=0.0))


def geometric_deltas(r, levels=12, ratio=0.5):
    return r * ratio ** np.arange(levels)


def mass_profile(fields, weights, deltas, taus=None, l0=4.0, tol=1e-8):
    """M_k(delta) for every field/weight pair over a descending delta grid."""
    deltas = np.asarray(deltas, float)
    if np.any(np.diff(deltas) >= 0.0):
        raise DataError("delta grid must be strictly decreasing")
    kk = len(fields)
    masses = np.full((kk, len(deltas)), np.nan)
    errors = np.full_like(masses, np.nan)
    flagged = np.zeros(masses.shape, dtype=bool)
    for k, (fld, w) in enumerate(zip(fields, weights)):
        for i, d in enumerate(deltas):
            try:
                m = weighted_mass(fld, w, d, tol=tol)
                masses[k, i] = float(m)
                errors[k, i] = m.error
            except (OperatorDomainError, FloatingPointError):
                flagged[k, i] = True
    mu_local = mu_scale = None
    if taus is not None:
        mu_local = np.full(kk, np.nan)
        mu_scale = np.full(kk, np.nan)
        for k, (fld, w, tau) in enumerate(zip(fields, weights, taus)):
            if not np.isfinite(tau):
                continue
            rad = l0 * tau
            mu_scale[k] = rad
            if rad <= fld.grid.radius:
                try:
                    mu_local[k] = float(weighted_mass(fld, w, rad, tol=tol))
                except (OperatorDomainError, FloatingPointError):
                    pass
    return MassProfile(tuple(range(1, kk + 1)), deltas, masses, errors, flagged,
                       mu_local, mu_scale)


@dataclass
class QuantizationVerdict:
    sigma_hat: float
    n: object                    # int ladder index, or None when inconclusive
    residual: float
    plateau_quality: float       # worst |d ln M/d ln delta| over the window
    window: tuple                # (delta_low, delta_high) or None
    inconclusive: bool

    def ladder_value(self):
        return None if self.n is None else EIGHT_PI * self.n


def estimate_sigma(mp, slope_tol=PLATEAU_SLOPE):
    """Snap the last-k mass profile to the 8 pi ladder via plateau detection.

    The widest contiguous delta-window with |d ln M/d ln delta| < slope_tol
    gives sigma_hat (mean of M over the window).  Masses below a floor count
    as a plateau at zero.  No plateau at all: small decaying masses give the
    no-blow-up verdict n=0, anything else is inconclusive (never forced to
    the ladder).
    """
    if len(mp.deltas) < 4:
        raise DataError("need at least 4 delta levels")
    defect = mp.monotone_defect()
    err_allow = 10.0 * np.nanmax(np.where(mp.flagged, 0.0, mp.errors), initial=0.0)
    if defect > max(1e-8, err_allow):
        raise DataError(f"mass profile not monotone in delta (defect {defect:.3e})")

    m = mp.masses[-1]
    good = ~mp.flagged[-1] & np.isfinite(m)
    deltas = mp.deltas[good]
    m = m[good]
    if len(m) < 4:
        raise DataError("too few usable mass entries at the last k")

    small = m < ZERO_MASS_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.diff(np.log(np.maximum(m, 1e-300))) / np.diff(np.log(deltas))
    flat = (np.abs(slopes) < slope_tol) | (small[:-1] & small[1:])

    # widest flat run; a run of below-floor masses (the trivial inner tail of
    # a concentrated profile) only counts when no nonzero shelf exists at all
    best = None       # (span, i0, i1) over flat runs holding actual mass
    best_zero = None  # same over all-small runs
    i = 0
    while i < len(flat):
        if flat[i]:
            j = i
            while j + 1 < len(flat) and flat[j + 1]:
                j += 1
            span = abs(math.log(deltas[i] / deltas[j + 1]))
            if np.all(small[i:j + 2]):
                if best_zero is None or span > best_zero[0]:
                    best_zero = (span, i, j + 1)
            elif best is None or span > best[0]:
                best = (span, i, j + 1)
            i = j + 1
        i += 1

    if best is None and best_zero is not None:
        _, i0, i1 = best_zero
        sigma = float(np.mean(m[i0:i1 + 1]))
        return QuantizationVerdict(sigma, 0, sigma / EIGHT_PI, 0.0,
                                   (float(deltas[i1]), float(deltas[i0])), False)
    if best is not None:
        _, i0, i1 = best
        sigma = float(np.mean(m[i0:i1 + 1]))
        quality = float(np.max(np.abs(slopes[i0:i1])))
        n = max(int(round(sigma / EIGHT_PI)), 0)
        return QuantizationVerdict(sigma, n, abs(sigma - EIGHT_PI * n) / EIGHT_PI,
                                   quality, (float(deltas[i1]), float(deltas[i0])), False)
    if float(np.max(m)) < 4.0 * math.pi:
        sigma = float(m[-1])
        return QuantizationVerdict(sigma, 0, sigma / EIGHT_PI, float("nan"), None, False)
    return QuantizationVerdict(float(m[-1]), None, float("nan"), float("nan"), None, True)


# ----------------------------------------------------------------------
# Pohozaev identity
# ----------------------------------------------------------------------

@dataclass
class PohozaevCheck:
    m_hat: float
    mu_hat: float
    algebraic_defect: float      # m^2 - mu^2 - 4(1+alpha)(m - mu)
    lhs: float                   # boundary functional difference P(r_out)-P(r_in)
    rhs: float                   # annulus integral of (2W + x.grad W) e^xi
    identity_gap: float
    quad_tol: float
    r_in: float
    r_out: float
    notes: tuple = ()


def pohozaev_relation_check(fld, weight, r_in, r_out, alpha=None, tol=1e-9):
    """Both forms of the Pohozaev balance on the annulus r_in < |x| < r_out.

    Returns the algebraic defect of the quantization relation built from the
    scaled masses m = mass(B_r_out)/2pi, mu = mass(B_r_in)/2pi, and the raw
    identity gap P(r_out) - P(r_in) - annulus source integral, whose size is
    bounded by the reported quadrature tolerance on exact fields.  A pole
    sitting on either sampling circle shifts that radius inward by h/2
    (recorded in notes).
    """
    g = fld.grid
    if not (0.0 < r_in < r_out <= g.radius):
        raise OperatorDomainError(f"need 0 < r_in < r_out <= {g.radius}")
    if alpha is None:
        alpha = weight.poles.total_order
    notes = []
    moduli = weight.poles.moduli()
    r_in, r_out = float(r_in), float(r_out)
    for name, rad in (("r_in", r_in), ("r_out", r_out)):
        if len(moduli) and np.min(np.abs(moduli - rad)) < 0.5 * g.h:
            new = rad - 0.5 * g.h
            notes.append(f"pole within h/2 of {name}={rad:g}; perturbed to {new:g}")
            if name == "r_in":
                r_in = new
            else:
                r_out = new

    m_out = weighted_mass(fld, weight, r_out, tol=tol)
    m_in = weighted_mass(fld, weight, r_in, tol=tol)
    m_hat = float(m_out) / (2.0 * math.pi)
    mu_hat = float(m_in) / (2.0 * math.pi)
    defect = m_hat ** 2 - mu_hat ** 2 - 4.0 * (1.0 + alpha) * (m_hat - mu_hat)

    p_out = pohozaev_boundary_functional(fld, weight, r_out)
    p_in = pohozaev_boundary_functional(fld, weight, r_in)
    lhs = p_out - p_in

    if fld.evaluator is not None:
        from .quadrature import adaptive_polar

        def dens(x, y):
            return weight.pohozaev_density(x, y) * weight(x, y) * np.exp(fld.evaluator(x, y))

        sites = []
        hint = getattr(fld, "concentration_sites", None)
        if hint is not None:
            sites.extend(hint() if callable(hint) else hint)
        for p in weight.poles.poles:
            sites.append((p.real, p.imag, max(0.25 * abs(p), g.h)))
        rhs_q = adaptive_polar(dens, r_out, r_inner=r_in, tol=tol, sites=sites)
        rhs = float(rhs_q)
        quad_tol = m_out.error + m_in.error + rhs_q.error + 1e-12 * max(abs(lhs), abs(rhs))
    else:
        areas = g.cell_areas(r_out) - g.cell_areas(r_in)
        log_w = weight.log_values(g.X, g.Y)
        dens_nodes = weight.pohozaev_density(g.X, g.Y) * np.exp(log_w + np.where(g.inside, fld.values, 0.0))
        mask = (areas > 0.0) & g.inside & np.isfinite(dens_nodes)
        rhs = float(np.sum(dens_nodes[mask] * areas[mask]))
        quad_tol = m_out.error + m_in.error + abs(rhs) * (g.h / r_in) ** 2 \
            + abs(lhs) * (g.h / r_in) ** 2
    return PohozaevCheck(m_hat, mu_hat, defect, lhs, rhs, lhs - rhs, quad_tol,
                         r_in, r_out, tuple(notes))


# ----------------------------------------------------------------------
# far-field gradient
# ----------------------------------------------------------------------

@dataclass
class FarFieldFit:
    mu_hat: float
    defect: float                # max |grad xi + mu x/|x|^2| * |x|^2
    per_circle_mu: np.ndarray


def _gradient_at(fld, px, py):
    if fld.gradient is not None:
        return fld.gradient(px, py)
    from .calculus import gradient_values
    fx, fy = gradient_values(fld)
    g = fld.grid
    fxf = np.where(np.isfinite(fx), fx, 0.0)
    fyf = np.where(np.isfinite(fy), fy, 0.0)
    from .field import ScalarField
    gx = ScalarField.from_values(g, np.where(g.inside, fxf, np.nan)).interpolate(px, py)
    gy = ScalarField.from_values(g, np.where(g.inside, fyf, np.nan)).interpolate(px, py)
    return gx, gy


def gradient_far_field_check(fld, weight, rhos, m=256):
    """Fit grad xi ~ -mu x/|x|^2 on sample circles; defect scaled by |x|^2.

    The fitted mu approximates the scaled mass seen from outside; on exact
    bubbles the radial derivative is -m(rho)/rho exactly.
    """
    rhos = np.asarray(rhos, float)
    samples = []
    per_mu = np.empty(len(rhos))
    for i, rho in enumerate(rhos):
        th = np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
        px, py = rho * np.cos(th), rho * np.sin(th)
        gx, gy = _gradient_at(fld, px, py)
        radial = (gx * px + gy * py) / rho
        per_mu[i] = -float(np.mean(radial)) * rho
        samples.append((px, py, gx, gy))
    # least squares for  grad xi = -mu x/|x|^2  over all samples at once:
    # mu = -sum (grad xi . x) / sum (1/|x|^2)
    num = den = 0.0
    for px, py, gx, gy in samples:
        r2 = px * px + py * py
        num += float(np.sum(-(gx * px + gy * py) / r2))
        den += float(np.sum(1.0 / r2))
    mu_hat = num / den if den else 0.0
    defect = 0.0
    for px, py, gx, gy in samples:
        r2 = px * px + py * py
        ex = gx + mu_hat * px / r2
        ey = gy + mu_hat * py / r2
        defect = max(defect, float(np.max(np.hypot(ex, ey) * r2)))
    return FarFieldFit(mu_hat, defect, per_mu)


# ----------------------------------------------------------------------
# energy and profile identities
# ----------------------------------------------------------------------

@dataclass
class IdentityValue:
    value: float
    applicable: bool = True
    detail: dict = dc_field(default_factory=dict)


def energy_identity_check(fld, weight, r):
    """e = int_{B_r} |grad xi|^2 - 16 pi (xi(0) + ln W(0)); O(1) sequences
    along least-mass families.  Weights vanishing at the origin make the
    identity inapplicable (flagged, not computed)."""
    w0 = weight.at_origin()
    if not (w0 > 0.0) or not np.isfinite(math.log(w0) if w0 > 0 else -1):
        return IdentityValue(float("nan"), applicable=False, detail={"w0": w0})
    energy = dirichlet_energy(fld, r)
    peak = fld.origin_value_refined()
    val = float(energy) - 16.0 * math.pi * (peak + math.log(w0))
    return IdentityValue(val, True, {"energy": float(energy), "peak": peak,
                                     "log_w0": math.log(w0),
                                     "energy_err": energy.error})


def profile_residual(fld, w0, r, poles=(), exclude_factor=2.0):
    """sup over B_r of |xi - matched bubble profile|, poles excluded.

    The matched profile is  ln( e^p / (1 + (e^p/8) w0 |x|^2)^2 )  with p the
    refined peak value; nodes within ``exclude_factor`` grid spacings of a
    pole are left out.
    """
    if not (w0 > 0.0):
        raise OperatorDomainError(f"profile comparison needs w0 > 0, got {w0}")
    g = fld.grid
    peak = fld.origin_value_refined()
    rho2 = g.X ** 2 + g.Y ** 2
    with np.errstate(divide="ignore"):
        t = peak + math.log(w0 / 8.0) + np.log(rho2)
    model = peak - 2.0 * np.logaddexp(0.0, t)
    mask = g.inside & (rho2 <= r * r)
    for p in poles:
        p = complex(p)
        mask &= (g.X - p.real) ** 2 + (g.Y - p.imag) ** 2 > (exclude_factor * g.h) ** 2
    if not mask.any():
        raise OperatorDomainError("no nodes left after pole exclusion")
    return float(np.nanmax(np.abs(fld.values - model)[mask]))


@dataclass
class PointwiseBound:
    c_star: float
    violations: int
    two_sided: float
    n_nodes: int
    applicable: bool = True


def pointwise_upper_bound_check(fld, r, eps, exclusion_radius, c_cap=None):
    """Best constant in  xi <= min_boundary xi + (4+eps) ln(1/|x|) + C  over
    the annulus exclusion_radius <= |x| <= r, plus the two-sided version with
    exponent exactly 4.  ``violations`` counts nodes exceeding ``c_cap``.
    """
    if not (0.0 < eps < 1.0):
        raise OperatorDomainError(f"eps must be in (0,1), got {eps}")
    g = fld.grid
    rho = np.hypot(g.X, g.Y)
    mask = g.inside & (rho >= exclusion_radius) & (rho <= r)
    if not mask.any():
        return PointwiseBound(float("nan"), 0, float("nan"), 0, applicable=False)
    minb = float(np.min(circle_samples(fld, r)[3]))
    with np.errstate(divide="ignore"):
        lead = np.log(1.0 / rho)
    upper = fld.values - minb - (4.0 + eps) * lead
    two = np.abs(fld.values - minb - 4.0 * lead)
    c_star = float(np.nanmax(upper[mask]))
    violations = int(np.sum(upper[mask] > c_cap)) if c_cap is not None else 0
    return PointwiseBound(c_star, violations, float(np.nanmax(two[mask])),
                          int(mask.sum()))


def boundary_oscillation(fld, rho, m=256):
    """max - min of the field over the circle |x| = rho."""
    vals = circle_samples(fld, rho, m)[3]
    return float(np.max(vals) - np.min(vals))


def peak_boundary_relation(fld, weight, r):
    """xi(0) + min_boundary xi + 2 ln W(0): the least-mass O(1) combination."""
    w0 = weight.at_origin()
    if not (w0 > 0.0):
        return IdentityValue(float("nan"), applicable=False, detail={"w0": w0})
    peak = fld.origin_value_refined()
    minb = float(np.min(circle_samples(fld, r)[3]))
    return IdentityValue(peak + minb + 2.0 * math.log(w0), True,
                         {"peak": peak, "boundary_min": minb, "w0": w0})


# ----------------------------------------------------------------------
# scale cascade
# ----------------------------------------------------------------------

@dataclass
class CascadeReport:
    s1: int
    groups: tuple                # tuple of tuples of sorted pole indices
    eps_by_k: np.ndarray         # |p_(s1), k| per k
    z: tuple                     # limits p_j/eps for the fastest group
    q: tuple                     # limits p_j/|p_s| for slower poles (j > s1)
    diverging: tuple             # per j > s1: |p_j|/eps -> infinity
    exponents: tuple             # fitted e_j (moduli ~ k^-e_j)
    unresolved: tuple            # adjacent pairs whose ratio neither settled nor split
    order: tuple                 # permutation mapping sorted slots to input indices
    ks: tuple

    @property
    def resolved(self):
        return not self.unresolved


def _pole_table(family_or_poles, ks=None):
    if hasattr(family_or_poles, "pole_config"):
        fam = family_or_poles
        ks = list(fam.ks())
        rows = [[complex(p) for p in fam.pole_config(k).poles] for k in ks]
    else:
        rows = [[complex(p) for p in row] for row in family_or_poles]
        ks = list(ks) if ks is not None else list(range(1, len(rows) + 1))
    s = len(rows[0])
    if any(len(r) != s for r in rows):
        raise DataError("pole count must be constant along the family")
    return np.array(rows, dtype=complex), np.asarray(ks, float)


def detect_cascade(family_or_poles, ks=None):
    """Classify pole trajectories into scale groups (fastest first).

    Input: a collapsing family, or an explicit per-k list of pole positions.
    Poles are put in ascending-modulus order at the last k (the asymptotic
    order); adjacent poles share a group when their modulus ratio has settled
    (relative change between the last two k below 1e-3) and split when it
    still drifts by more than 1e-2; the band in between is reported as
    unresolved.  z-limits are taken at the last k.
    """
    table, kvals = _pole_table(family_or_poles, ks)
    kk, s = table.shape
    if kk < 4:
        raise DataError("cascade detection needs at least 4 family steps")
    moduli = np.abs(table)
    if np.any(moduli <= 0.0):
        raise DataError("pole at the origin has no scale; cascade undefined")
    order = tuple(int(i) for i in np.argsort(moduli[-1], kind="stable"))
    table = table[:, order]
    moduli = moduli[:, order]

    lx = np.log(kvals)
    lx0 = lx - lx.mean()
    exponents = tuple(float(-(lx0 @ (np.log(moduli[:, j]) - np.log(moduli[:, j]).mean()))
                            / (lx0 @ lx0)) for j in range(s))

    splits = []         # boundaries between sorted slots
    unresolved = []
    for j in range(s - 1):
        ratio = moduli[:, j + 1] / moduli[:, j]
        rel = abs(ratio[-1] / ratio[-2] - 1.0)
        if rel < SAME_GROUP_TOL:
            continue
        if rel > SPLIT_GROUP_TOL:
            splits.append(j + 1)
        else:
            unresolved.append((j, j + 1))
    bounds = [0] + splits + [s]
    groups = tuple(tuple(range(a, b)) for a, b in zip(bounds, bounds[1:]))
    s1 = len(groups[0])

    eps_by_k = moduli[:, s1 - 1]
    if np.any(np.diff(eps_by_k) >= 0.0):
        raise DataError("collapse scale eps_k must decrease strictly in k")
    z = tuple(complex(c) for c in table[-1, :s1] / eps_by_k[-1])
    if any(abs(c) <= Z_FLOOR for c in z):
        raise DataError("fast-group limit z_j fell below the detection floor")
    tau_last = moduli[-1, -1]
    q = tuple(complex(c) for c in table[-1, s1:] / tau_last)
    diverging = []
    for j in range(s1, s):
        r = moduli[:, j] / eps_by_k
        diverging.append(bool(r[-1] > r[-2] > r[0] * (1.0 + 1e-9) if kk > 2 else r[-1] > r[-2]))
    return CascadeReport(s1, groups, eps_by_k, z, q, tuple(diverging),
                         exponents, tuple(unresolved), order, tuple(float(k) for k in kvals))


def peak_scale_divergence_check(fields, family):
    """The blow-up combination xi_k(0) + 2 ln eps_k + 2 sum a_j ln|p_jk|.

    Returns (values, fitted slope vs ln k, monotone-increase verdict);
    a genuine collapsing blow-up family must diverge to +infinity.
    """
    ks = list(family.ks())
    vals = []
    for fld, k in zip(fields, ks):
        eps = family.eps_at(k)
        cfg = family.pole_config(k)
        acc = fld.origin_value_refined() + 2.0 * math.log(eps)
        for p, a in zip(cfg.poles, cfg.alphas):
            acc += 2.0 * a * math.log(abs(p))
        vals.append(acc)
    vals = np.array(vals)
    lx = np.log(np.asarray(ks, float))
    lx0 = lx - lx.mean()
    slope = float((lx0 @ (vals - vals.mean())) / (lx0 @ lx0))
    increasing = bool(np.all(np.diff(vals) > 0.0))
    return vals, slope, increasing


# ----------------------------------------------------------------------
# full-plane mass ladder
# ----------------------------------------------------------------------

@dataclass
class LadderVerdict:
    total: float
    sigma: float
    n: int
    residual: float
    ok: bool
    boundary_case: bool
    applicable: bool
    radius: float
    tail: float


def total_mass_ladder_check(u, betas=None, weight=None, start_radius=1.0,
                            tail_tol=1e-4, sites=(), tol=1e-7):
    """Integrate e^u over the plane and place the total on the 8 pi ladder.

    ``u`` is the singular-reconstructed solution (its exponential is the
    full density); alternatively pass the regular part plus ``weight`` and
    the density W e^u is assembled here, with betas defaulting to the pole
    orders.  The total equals 4 pi (sum beta_j + 1 + sigma); sigma <= 1 is
    the boundary (standard bubble) case, reported but not failed.  A tail
    that refuses to decay marks the field non-integrable and the check
    inapplicable.
    """
    ev = getattr(u, "evaluator", u)
    if sites == () and hasattr(u, "sites"):
        sites = u.sites
    if weight is not None:
        if betas is None:
            betas = tuple(weight.poles.alphas)
        fn = lambda x, y: weight(x, y) * np.exp(ev(x, y))
        sites = tuple(sites) + tuple(
            (p.real, p.imag, max(abs(p) * 0.25, 1e-12)) for p in weight.poles.poles)
    else:
        fn = lambda x, y: np.exp(ev(x, y))
    if betas is None:
        betas = ()
    total, err, tail, integrable, radius = total_mass_ladder(
        fn, start_radius, tail_tol=tail_tol, sites=sites, tol=tol)
    if not integrable:
        return LadderVerdict(total, float("nan"), 0, float("nan"), False, False,
                             False, radius, tail)
    sigma = total / (4.0 * math.pi) - 1.0 - float(sum(betas))
    n = max(int(round(total / EIGHT_PI)), 0)
    residual = abs(total - EIGHT_PI * n) / EIGHT_PI
    boundary = abs(sigma - 1.0) <= 0.05
    ok = residual <= max(1e-3, 10.0 * (err + tail) / EIGHT_PI) and (sigma > 1.0 or boundary)
    return LadderVerdict(total, sigma, n, residual, ok, boundary, True, radius, tail)


# ----------------------------------------------------------------------
# aggregate report
# ----------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    """Everything the estimates talk about, for one family run."""
    ks: tuple
    mass: MassProfile
    verdict: QuantizationVerdict
    pohozaev: tuple              # PohozaevCheck per k (may be empty)
    energy: tuple                # IdentityValue per k
    profile: tuple               # floats per k
    oscillation: tuple           # floats per k
    peak_relation: tuple         # IdentityValue per k
    peak_data: tuple             # dicts: peak, boundary_min, w0 per k
    green_defect: tuple = ()     # (lap_sup, quad_tol) pairs per k, if computed
    pointwise: tuple = ()
    cascade: object = None
    tolerances: dict = dc_field(default_factory=dict)

    def sequence_slopes(self):
        out = {}
        for name, seq in (("energy", [e.value for e in self.energy if e.applicable]),
                          ("profile", list(self.profile)),
                          ("peak_relation", [p.value for p in self.peak_relation
                                             if p.applicable])):
            if len(seq) >= 2:
                out[name] = fitted_log_slope(range(1, len(seq) + 1), seq)
        return out

    def bounded_verdicts(self, gate=TREND_SLOPE):
        return {name: slope < gate for name, slope in self.sequence_slopes().items()}


def run_diagnostics(fields, weights, deltas, family=None, names=("quantization",
                    "identities"), r=None, tol=1e-8, slope_tol=PLATEAU_SLOPE,
                    green_pairs=None):
    """Assemble a DiagnosticsReport for one field-per-k run.

    The mass profile, quantization verdict, and per-k identity sequences
    are always computed (they are the report's spine); ``names`` switches
    the heavier extras on: 'pohozaev' (annulus balance per k), 'cascade'
    (needs a family with moving poles), 'green' (regular-part Laplacian
    sup; pass precomputed ``green_pairs`` to skip re-decomposing).
    Individual checks that cannot run on a given field are recorded as
    inapplicable or skipped, never fatal.
    """
    fields = list(fields)
    weights = list(weights)
    assert len(fields) == len(weights) and fields, "one weight per field"
    ks = tuple(family.ks())[:len(fields)] if family is not None \
        else tuple(range(1, len(fields) + 1))
    if r is None:
        r = min(f.grid.radius for f in fields)
    taus = [family.tau_at(k) for k in ks] if family is not None else None

    mp = mass_profile(fields, weights, deltas, taus=taus, tol=tol)
    verdict = estimate_sigma(mp, slope_tol=slope_tol)

    energy, peak_rel, profile, osc, peak_data = [], [], [], [], []
    for k, fld, w in zip(ks, fields, weights):
        energy.append(energy_identity_check(fld, w, r))
        pr = peak_boundary_relation(fld, w, r)
        peak_rel.append(pr)
        peak_data.append(dict(pr.detail) if pr.applicable
                         else {"w0": w.at_origin()})
        poles = getattr(getattr(w, "poles", None), "poles", ())
        w0 = w.at_origin()
        try:
            profile.append(profile_residual(fld, w0, r, poles=poles))
        except OperatorDomainError:
            profile.append(float("nan"))
        osc.append(boundary_oscillation(fld, r))

    pohozaev = ()
    if "pohozaev" in names:
        checks = []
        nan = float("nan")
        alpha = family.total_alpha() if family is not None else None
        for k, fld, w in zip(ks, fields, weights):
            tau = family.tau_at(k) if family is not None else 0.0
            r_in = max(4.0 * tau, 6.0 * fld.grid.h)
            r_out = 0.9 * r
            if r_in < r_out:
                checks.append(pohozaev_relation_check(fld, w, r_in, r_out,
                                                      alpha=alpha, tol=tol))
            else:
                # collapse scale still wider than the annulus: keep the row
                # (aligned with ks) but mark it empty
                checks.append(PohozaevCheck(nan, nan, nan, nan, nan, nan,
                                            tol, r_in, r_out,
                                            notes=("window-empty",)))
        pohozaev = tuple(checks)

    cascade = None
    if "cascade" in names and family is not None and family.pole_rules:
        cascade = detect_cascade(family)

    green = ()
    if green_pairs is not None:
        green = tuple(green_pairs)
    elif "green" in names:
        from .solver import green_decompose
        pairs = []
        for fld, w in zip(fields, weights):
            dec = green_decompose(fld, w)
            pairs.append((dec.lap_regular_sup, dec.quad_tol))
        green = tuple(pairs)

    return DiagnosticsReport(ks, mp, verdict, pohozaev, tuple(energy),
                             tuple(profile), tuple(osc), tuple(peak_rel),
                             tuple(peak_data), green, (), cascade,
                             {"quadrature": tol, "plateau_slope": slope_tol})
