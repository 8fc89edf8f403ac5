"""Exact blow-up families for -Delta u = W e^u on the plane.

Two closed-form constructions are implemented:

* ``radial_bubble(alpha, lam)``: the rotationally symmetric solution for the
  merged weight |x|^(2 alpha),

      u = ln( 8 (1+alpha)^2 lam^2 / (1 + lam^2 |x|^(2(1+alpha)))^2 ),

  with full-plane weighted mass 8 pi (1 + alpha).

* ``developing_map_field(map, poles)``: with F' = prod (z - p_j)^(a_j) and
  f = lam (F - c), the field

      u = ln( 8 lam^2 / (1 + |f|^2)^2 )

  solves -Delta u = prod |x - p_j|^(2 a_j) e^u exactly (h = 1); its full-plane
  mass is 8 pi deg F.  As lam grows the mass concentrates in bubbles of width
  ~ 1/(lam |F'(root)|) at the roots of F - c, which all collapse to the origin
  together with the poles in centered mode.

``CollapsingFamily`` packages k-indexed schedules of these fields (shrinking
pole moduli, growing lam) plus the solver-seeded perturbed-bubble variant used
for the least-mass experiments.  Everything evaluates in log form so that
|F| up to ~1e150 and far-field radii up to 10^3 times the base grid stay
inside float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import expit

from .field import ScalarField
from .grid import DiskGrid
from .weights import ConfigValidationError, PoleConfig, WeightSpec

MAX_MAP_DEGREE = 64
RESCALE_RADIUS_CAP = 1e3
_PROBE_COUNT = 8


# ----------------------------------------------------------------------
# closed-form solution wrapper
# ----------------------------------------------------------------------

class ClosedFormSolution:
    """A closed-form field: evaluator + gradient + weight + metadata.

    ``sample(grid)`` attaches everything to a :class:`ScalarField` so the
    operators can pick the exact paths.
    """

    def __init__(self, evaluator, gradient, weight, name, sites=(),
                 total_mass=None, meta=None):
        self.evaluator = evaluator
        self.gradient = gradient
        self.weight = weight
        self.name = name
        self.sites = tuple(sites)
        self.total_mass = total_mass
        self.meta = dict(meta or {})

    def __call__(self, x, y):
        return self.evaluator(x, y)

    def sample(self, grid):
        fld = ScalarField.from_function(grid, self.evaluator,
                                        gradient=self.gradient, name=self.name)
        fld.concentration_sites = lambda: self.sites
        fld.weight = self.weight
        fld.source = self
        return fld


# ----------------------------------------------------------------------
# radial bubble
# ----------------------------------------------------------------------

def radial_bubble(alpha, lam):
    """Exact rotationally symmetric solution for the weight |x|^(2 alpha)."""
    alpha = int(alpha)
    if alpha < 0:
        raise ConfigValidationError(f"bubble zero order must be >= 0, got {alpha}")
    if not (lam > 0.0 and np.isfinite(lam)):
        raise ConfigValidationError(f"bubble amplitude must be positive, got {lam}")
    peak = math.log(8.0 * (1 + alpha) ** 2 * lam * lam)
    two_p = 2.0 * (1 + alpha)
    log_lam2 = 2.0 * math.log(lam)

    def evaluator(x, y):
        rho2 = np.asarray(x, float) ** 2 + np.asarray(y, float) ** 2
        with np.errstate(divide="ignore"):
            t = log_lam2 + 0.5 * two_p * np.log(rho2)
        return peak - 2.0 * np.logaddexp(0.0, t)

    def gradient(x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        rho2 = x * x + y * y
        with np.errstate(divide="ignore"):
            t = log_lam2 + 0.5 * two_p * np.log(rho2)
        s = expit(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            fac = -2.0 * two_p * s / rho2
        if alpha == 0:
            fac = np.where(rho2 == 0.0, -4.0 * lam * lam, fac)
        else:
            fac = np.where(rho2 == 0.0, 0.0, fac)
        return fac * x, fac * y

    if alpha >= 1:
        poles = PoleConfig((0j,), (alpha,))
    else:
        poles = PoleConfig()
    weight = WeightSpec(poles=poles)
    width = lam ** (-1.0 / (1 + alpha))
    return ClosedFormSolution(
        evaluator, gradient, weight, name=f"bubble(a{alpha},lam{lam:g})",
        sites=((0.0, 0.0, width),),
        total_mass=8.0 * math.pi * (1 + alpha),
        meta={"kind": "radial_bubble", "alpha": alpha, "lam": lam, "width": width})


def bubble_mass_closed_form(alpha, lam, delta):
    """Closed-form mass of the radial bubble inside B_delta (test oracle and
    plateau reference): 8 pi (1+alpha) T / (1+T), T = lam^2 delta^(2(1+alpha))."""
    t = 2.0 * math.log(lam) + 2.0 * (1 + alpha) * math.log(delta)
    return 8.0 * math.pi * (1 + alpha) * float(expit(t))


def flat_bubble(lam, w0):
    """Bubble for a constant weight w0 > 0: -Delta u = w0 e^u.

    This is the least-mass comparison profile: mass 8 pi concentrated at
    width 1/lam, peak ln(8 lam^2 / w0).
    """
    base = radial_bubble(0, lam)
    shift = math.log(w0)

    def evaluator(x, y, _b=base.evaluator):
        return _b(x, y) - shift

    def gradient(x, y, _g=base.gradient):
        return _g(x, y)

    weight = WeightSpec(h=lambda x, y: np.full(np.broadcast(x, y).shape, w0),
                        bounds=(0.5 * w0, 2.0 * w0), normalized=False)
    return ClosedFormSolution(
        evaluator, gradient, weight, name=f"flatbubble(lam{lam:g})",
        sites=((0.0, 0.0, 1.0 / lam),), total_mass=8.0 * math.pi,
        meta={"kind": "flat_bubble", "lam": lam, "w0": w0})


# ----------------------------------------------------------------------
# developing maps
# ----------------------------------------------------------------------

def polynomial_primitive(cfg):
    """Ascending coefficients of F with F' = prod (z - p_j)^(a_j), F(0) = 0.

    Plain coefficient convolution followed by termwise integration.
    """
    deriv = np.array([1.0 + 0.0j])
    for p, a in zip(cfg.poles, cfg.alphas):
        for _ in range(a):
            deriv = np.convolve(deriv, np.array([-p, 1.0 + 0.0j]))
    degree = len(deriv)  # deg F = deg F' + 1
    if degree + 1 > MAX_MAP_DEGREE + 1:
        raise ConfigValidationError(
            f"developing map degree {degree} exceeds the supported {MAX_MAP_DEGREE}")
    coeffs = np.zeros(degree + 1, dtype=complex)
    coeffs[1:] = deriv / np.arange(1, degree + 1)
    return coeffs


class DevelopingMap:
    """Polynomial developing map data: F (ascending coeffs), amplitude, shift.

    On construction the derivative of F is checked against the factored form
    prod (z - p_j)^(a_j) at eight seeded random probe points (relative 1e-10).
    The map keeps the roots of F - shift so far-field evaluation can switch to
    the overflow-free factored logarithm.
    """

    def __init__(self, coeffs, lam, poles, shift=None, seed=0):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 1 or len(coeffs) < 2:
            raise ConfigValidationError("developing map needs a polynomial of degree >= 1")
        degree = len(coeffs) - 1
        if degree > MAX_MAP_DEGREE:
            raise ConfigValidationError(
                f"developing map degree {degree} exceeds the supported {MAX_MAP_DEGREE}")
        if not (lam > 0.0 and np.isfinite(lam)):
            raise ConfigValidationError(f"map amplitude must be positive, got {lam}")
        if degree != poles.map_degree:
            raise ConfigValidationError(
                f"polynomial degree {degree} does not match 1 + sum(alphas) = {poles.map_degree}")
        self.coeffs = coeffs
        self.lam = float(lam)
        self.poles = poles
        self.shift = complex(coeffs[0]) if shift is None else complex(shift)
        self.degree = degree

        rng = np.random.default_rng(seed)
        scale = max(1.0, *(abs(p) for p in poles.poles)) if poles.count else 1.0
        z = (rng.standard_normal(_PROBE_COUNT) + 1j * rng.standard_normal(_PROBE_COUNT)) * scale
        dcoeffs = np.polynomial.polynomial.polyder(coeffs)
        got = np.polynomial.polynomial.polyval(z, dcoeffs)
        want = np.ones_like(z)
        for p, a in zip(poles.poles, poles.alphas):
            want = want * (z - p) ** a
        denom = np.maximum(np.abs(want), 1e-30)
        if np.max(np.abs(got - want) / denom) > 1e-10:
            raise ConfigValidationError(
                "polynomial derivative does not match the factored pole form at probe points")

        shifted = np.array(coeffs)
        shifted[0] -= self.shift
        self.roots = np.polynomial.polynomial.polyroots(shifted)
        self.leading = complex(coeffs[-1])
        # largest |z| for which direct Horner evaluation stays inside float64
        mags = np.abs(coeffs)
        mags[mags == 0.0] = 1e-300
        with np.errstate(divide="ignore"):
            self._log_safe = min((600.0 - np.log(mags[i])) / max(i, 1)
                                 for i in range(len(coeffs)))

    def is_centered(self):
        return abs(complex(self.coeffs[0]) - self.shift) == 0.0

    # -- robust complex evaluation helpers --------------------------------

    def _direct(self, z):
        w = np.polynomial.polynomial.polyval(z, self.coeffs) - self.shift
        dw = np.polynomial.polynomial.polyval(
            z, np.polynomial.polynomial.polyder(self.coeffs))
        return w, dw

    def log_modulus(self, z):
        """ln |lam (F(z) - shift)| without overflow, any |z|."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape)
        near = np.abs(z) <= math.exp(min(self._log_safe, 700.0))
        if np.any(near):
            w, _ = self._direct(z[near])
            with np.errstate(divide="ignore"):
                out[near] = np.log(self.lam) + np.log(np.abs(w))
        if np.any(~near):
            zz = z[~near]
            acc = np.full(zz.shape, math.log(self.lam) + math.log(abs(self.leading)))
            for r in self.roots:
                acc = acc + np.log(np.abs(zz - r))
            out[~near] = acc
        return out

    def bubble_sites(self):
        """(x, y, width) per root of F - shift: the concentration spots."""
        sites = []
        dk = self.coeffs
        for r in self.roots:
            width = None
            fact = 1.0
            dcur = np.array(dk)
            for order in range(1, self.degree + 1):
                dcur = np.polynomial.polynomial.polyder(dcur)
                fact *= order
                val = abs(np.polynomial.polynomial.polyval(r, dcur))
                if val > 1e-250:
                    width = (fact / (self.lam * val)) ** (1.0 / order)
                    break
            sites.append((float(r.real), float(r.imag), float(width or 1.0 / self.lam)))
        return tuple(sites)

    def to_dict(self):
        return {"coeffs": [[c.real, c.imag] for c in self.coeffs],
                "lam": self.lam, "shift": [self.shift.real, self.shift.imag],
                "poles": self.poles.to_dict()}


def developing_map_field(dm):
    """Exact field of a developing map (weight h = 1)."""
    lam = dm.lam
    peak_const = math.log(8.0) + 2.0 * math.log(lam)
    log_safe = dm._log_safe

    def evaluator(x, y):
        z = np.asarray(x, float) + 1j * np.asarray(y, float)
        t = dm.log_modulus(z)
        return peak_const - 2.0 * np.logaddexp(0.0, 2.0 * t)

    def gradient(x, y):
        z = np.asarray(x, float) + 1j * np.asarray(y, float)
        t = dm.log_modulus(z)
        out = np.empty(z.shape, dtype=complex)
        direct = (t <= 200.0) & (np.abs(z) <= math.exp(min(log_safe, 700.0)))
        if np.any(direct):
            w, dw = dm._direct(z[direct])
            aw = lam * np.abs(w)
            s = expit(2.0 * t[direct])
            with np.errstate(invalid="ignore", divide="ignore"):
                q = np.where(w != 0, dw / np.where(w != 0, w, 1.0), 0.0)
            out[direct] = s * q
        far = ~direct
        if np.any(far):
            zz = z[far]
            q = np.zeros(zz.shape, dtype=complex)
            for r in dm.roots:
                q = q + 1.0 / (zz - r)
            out[far] = expit(2.0 * t[far]) * q
        gx = -4.0 * out.real
        gy = 4.0 * out.imag
        return gx, gy

    weight = WeightSpec(poles=dm.poles)
    return ClosedFormSolution(
        evaluator, gradient, weight,
        name=f"map(d{dm.degree},lam{dm.lam:g})",
        sites=dm.bubble_sites(),
        total_mass=8.0 * math.pi * dm.degree,
        meta={"kind": "developing_map", "degree": dm.degree, "lam": dm.lam})


# ----------------------------------------------------------------------
# rescaling and singular parts
# ----------------------------------------------------------------------

def rescaled_weight(weight, tau):
    """The change-of-variables weight: poles q_j = p_j / tau, h_tau(y) = h(tau y)."""
    poles = PoleConfig(tuple(p / tau for p in weight.poles.poles),
                       weight.poles.alphas)
    if weight.h is None:
        return WeightSpec(poles=poles)
    h_old = weight.h
    h_new = lambda x, y: h_old(tau * np.asarray(x, float), tau * np.asarray(y, float))
    g_old = weight.grad_log_h
    g_new = None
    if g_old is not None:
        def g_new(x, y):
            gx, gy = g_old(tau * np.asarray(x, float), tau * np.asarray(y, float))
            return tau * gx, tau * gy
    return WeightSpec(poles=poles, h=h_new, bounds=weight.bounds,
                      grad_log_h=g_new, normalized=weight.normalized)


def rescale(fld, tau, alpha_total, grid=None):
    """Zoomed field  phi(x) = f(tau x) + 2 (1 + alpha_total) ln tau.

    With the rescaled weight this is again an exact solution; the mass inside
    B_delta of the original equals the mass inside B_(delta/tau) of the zoom.
    The zoom grid keeps n and takes radius min(r/tau, 1000 r).
    """
    if not (0.0 < tau <= 1.0 + 1e-12):
        raise ConfigValidationError(f"rescale factor must be in (0, 1], got {tau}")
    g = fld.grid
    lift = 2.0 * (1.0 + alpha_total) * math.log(tau)
    if grid is None:
        radius = min(g.radius / tau, RESCALE_RADIUS_CAP * g.radius)
        grid = DiskGrid(radius, g.n)
    if fld.evaluator is not None:
        ev_old = fld.evaluator
        ev = lambda x, y: ev_old(tau * np.asarray(x, float), tau * np.asarray(y, float)) + lift
        grad = None
        if fld.gradient is not None:
            g_old = fld.gradient
            def grad(x, y):
                gx, gy = g_old(tau * np.asarray(x, float), tau * np.asarray(y, float))
                return tau * gx, tau * gy
        out = ScalarField.from_function(grid, ev, gradient=grad,
                                        name=f"zoom({fld.name},{tau:g})")
    else:
        ev = lambda x, y: fld.interpolate(tau * np.asarray(x, float),
                                          tau * np.asarray(y, float)) + lift
        out = ScalarField.from_function(grid, ev, name=f"zoom({fld.name},{tau:g})")
    old_sites = getattr(fld, "concentration_sites", None)
    if old_sites is not None:
        sites = tuple((sx / tau, sy / tau, w / tau) for sx, sy, w in old_sites())
        out.concentration_sites = lambda: sites
    return out


def singular_part(fld, cfg):
    """u = f + sum 2 a_j ln |x - p_j| at the nodes.

    Nodes that coincide with a pole cannot carry the logarithm; they are
    excluded (NaN) and reported.  Returns (field, excluded_points).
    """
    g = fld.grid
    vals = np.array(fld.values)
    logw = cfg.log_weight(g.X, g.Y)
    hit = g.inside & ~np.isfinite(logw)
    vals[g.inside] = vals[g.inside] + logw[g.inside]
    vals[hit] = np.nan
    excluded = [(float(x), float(y)) for x, y in zip(g.X[hit], g.Y[hit])]
    out = ScalarField.from_values(g, vals, name=f"singular({fld.name})")
    return out, excluded


# ----------------------------------------------------------------------
# collapsing families
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PoleRule:
    """One pole trajectory p_k = modulus0 * k^(-exponent) * direction."""
    direction: complex
    modulus0: float
    exponent: float
    alpha: int

    def __post_init__(self):
        d = complex(self.direction)
        m = abs(d)
        if m == 0.0:
            raise ConfigValidationError("pole direction cannot be zero")
        # idempotent normalization: already-unit directions pass through so
        # serialization round-trips bit-for-bit
        if abs(m - 1.0) > 1e-12:
            d = d / m
        object.__setattr__(self, "direction", d)
        if not (self.modulus0 > 0.0):
            raise ConfigValidationError(f"pole base modulus must be positive, got {self.modulus0}")
        if not (self.exponent > 0.0):
            raise ConfigValidationError(
                f"pole collapse exponent must be positive, got {self.exponent}")
        if int(self.alpha) < 1:
            raise ConfigValidationError(f"zero orders must be >= 1, got {self.alpha}")
        object.__setattr__(self, "alpha", int(self.alpha))

    def position(self, k):
        return self.direction * self.modulus0 * float(k) ** (-self.exponent)

    def to_dict(self):
        return {"direction": [self.direction.real, self.direction.imag],
                "modulus0": self.modulus0, "exponent": self.exponent,
                "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        return cls(complex(d["direction"][0], d["direction"][1]),
                   d["modulus0"], d["exponent"], d["alpha"])


@dataclass(frozen=True)
class LamSchedule:
    """Amplitude schedule: geometric lam0 * base^k or power lam0 * k^gamma."""
    kind: str
    lam0: float
    rate: float

    def __post_init__(self):
        if self.kind not in ("geometric", "power"):
            raise ConfigValidationError(f"unknown amplitude schedule kind {self.kind!r}")
        if not (self.lam0 > 0.0):
            raise ConfigValidationError(f"amplitude lam0 must be positive, got {self.lam0}")
        if self.kind == "geometric" and self.rate < 1.0:
            raise ConfigValidationError(
                "geometric amplitude schedules need base >= 1 (nondecreasing)")
        if self.kind == "power" and self.rate < 0.0:
            raise ConfigValidationError(
                "power amplitude schedules need exponent >= 0 (nondecreasing)")

    def value(self, k):
        if self.kind == "geometric":
            return self.lam0 * self.rate ** k
        return self.lam0 * float(k) ** self.rate

    def to_dict(self):
        return {"kind": self.kind, "lam0": self.lam0, "rate": self.rate}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["lam0"], d["rate"])


@dataclass(frozen=True)
class FamilyMember:
    k: int
    lam: float
    tau: float
    eps: float
    weight: WeightSpec
    pole_config: PoleConfig
    exact: object = None   # ClosedFormSolution for exact kinds
    seed: object = None    # ClosedFormSolution used as guess/boundary for solve kinds


FAMILY_SCHEMA = "family-rule/1"
FAMILY_KINDS = ("radial_bubble", "developing_map", "perturbed_bubble")


class CollapsingFamily:
    """k-indexed family of weights/fields with collapsing zero set.

    * ``radial_bubble``: no pole rules, single merged zero of order ``alpha``
      held at the origin; members are exact bubbles with lam_k growing.
    * ``developing_map``: s >= 1 pole trajectories; members are exact
      developing-map fields anchored at the collapse point (full mass
      8 pi deg F).
    * ``perturbed_bubble``: s >= 1 pole trajectories; members carry a flat
      bubble seed matched to W_k(0) whose trace is the Dirichlet data for the
      solver (the least-mass construction).
    """

    def __init__(self, kind, k_range, lam, pole_rules=(), alpha=0):
        if kind not in FAMILY_KINDS:
            raise ConfigValidationError(f"unknown family kind {kind!r}")
        k_min, k_max = int(k_range[0]), int(k_range[1])
        if not (1 <= k_min <= k_max):
            raise ConfigValidationError(f"need 1 <= k_min <= k_max, got {k_range}")
        self.kind = kind
        self.k_min, self.k_max = k_min, k_max
        self.lam = lam
        self.pole_rules = tuple(pole_rules)
        self.alpha = int(alpha)
        if kind == "radial_bubble":
            if self.pole_rules:
                raise ConfigValidationError(
                    "radial bubble families describe the merged zero via 'alpha', not pole rules")
            if self.alpha < 0:
                raise ConfigValidationError(f"alpha must be >= 0, got {alpha}")
        else:
            if len(self.pole_rules) < 1:
                raise ConfigValidationError(
                    "collapsing families need at least one pole trajectory")
            for i, a in enumerate(self.pole_rules):
                for b in self.pole_rules[i + 1:]:
                    if abs(a.direction - b.direction) < 1e-12 \
                            and abs(a.modulus0 - b.modulus0) < 1e-12 * a.modulus0 \
                            and abs(a.exponent - b.exponent) < 1e-12:
                        raise ConfigValidationError(
                            "two pole rules coincide; poles must stay pairwise distinct")

    # -- schedules ------------------------------------------------------

    def ks(self):
        return range(self.k_min, self.k_max + 1)

    def lam_at(self, k):
        return self.lam.value(k)

    def pole_config(self, k):
        if not self.pole_rules:
            if self.alpha >= 1:
                return PoleConfig((0j,), (self.alpha,))
            return PoleConfig()
        cfg = PoleConfig(tuple(r.position(k) for r in self.pole_rules),
                         tuple(r.alpha for r in self.pole_rules))
        return cfg.sorted_by_modulus()

    def tau_at(self, k):
        """Slowest pole scale max_j |p_{j,k}| (pole families only)."""
        if not self.pole_rules:
            return float("nan")
        return max(abs(r.position(k)) for r in self.pole_rules)

    def eps_at(self, k):
        """Fastest-group scale: the largest modulus among the poles sharing
        the maximal collapse exponent."""
        if not self.pole_rules:
            return float("nan")
        e_max = max(r.exponent for r in self.pole_rules)
        return max(abs(r.position(k)) for r in self.pole_rules
                   if abs(r.exponent - e_max) < 1e-12)

    def total_alpha(self):
        if not self.pole_rules:
            return self.alpha
        return sum(r.alpha for r in self.pole_rules)

    # -- members --------------------------------------------------------

    def member(self, k):
        if not (self.k_min <= k <= self.k_max):
            raise ConfigValidationError(f"k={k} outside family range [{self.k_min}, {self.k_max}]")
        lam = self.lam_at(k)
        cfg = self.pole_config(k)
        if self.kind == "radial_bubble":
            sol = radial_bubble(self.alpha, lam)
            return FamilyMember(k, lam, self.tau_at(k), self.eps_at(k),
                                sol.weight, cfg, exact=sol)
        if self.kind == "developing_map":
            coeffs = polynomial_primitive(cfg)
            dm = DevelopingMap(coeffs, lam, cfg)
            sol = developing_map_field(dm)
            return FamilyMember(k, lam, self.tau_at(k), self.eps_at(k),
                                sol.weight, cfg, exact=sol)
        # perturbed bubble: seed only, the solver supplies the field
        weight = WeightSpec(poles=cfg)
        w0 = weight.at_origin()
        if w0 <= 0.0:
            raise ConfigValidationError(
                "perturbed-bubble families need W(0) > 0 (poles off the origin)")
        seed = flat_bubble(lam, w0)
        return FamilyMember(k, lam, self.tau_at(k), self.eps_at(k),
                            weight, cfg, seed=seed)

    def validate_schedules(self):
        """tau strictly decreasing, lam nondecreasing over the k range."""
        ks = list(self.ks())
        lams = [self.lam_at(k) for k in ks]
        if any(b < a for a, b in zip(lams, lams[1:])):
            raise ConfigValidationError("amplitude schedule must be nondecreasing in k")
        if self.pole_rules:
            taus = [self.tau_at(k) for k in ks]
            if len(taus) > 1 and any(b >= a for a, b in zip(taus, taus[1:])):
                raise ConfigValidationError("pole scale tau_k must decrease strictly in k")
        return self

    # -- serialization ----------------------------------------------------

    def to_dict(self):
        return {"schema": FAMILY_SCHEMA, "kind": self.kind,
                "k_range": [self.k_min, self.k_max],
                "lam": self.lam.to_dict(),
                "poles": [r.to_dict() for r in self.pole_rules],
                "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != FAMILY_SCHEMA:
            raise ConfigValidationError(
                f"unsupported family rule schema {d.get('schema')!r}, expected {FAMILY_SCHEMA!r}")
        return cls(d["kind"], tuple(d["k_range"]), LamSchedule.from_dict(d["lam"]),
                   tuple(PoleRule.from_dict(r) for r in d.get("poles", [])),
                   d.get("alpha", 0))


def make_family(rule):
    """Build and validate a collapsing family from a rule dict."""
    fam = CollapsingFamily.from_dict(rule) if isinstance(rule, dict) else rule
    return fam.validate_schedules()
