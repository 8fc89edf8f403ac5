"""Closed-form families: bubbles, developing maps, rescaling, k-schedules."""

import math
import types

import numpy as np
import pytest
from hypothesis import given, strategies as st

from liouville_lab import (
    CollapsingFamily,
    ConfigValidationError,
    DevelopingMap,
    DiskGrid,
    LamSchedule,
    PoleConfig,
    PoleRule,
    bubble_mass_closed_form,
    developing_map_field,
    flat_bubble,
    laplacian,
    make_family,
    polynomial_primitive,
    radial_bubble,
    rescale,
    rescaled_weight,
    singular_part,
    weighted_mass,
)

TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------------------
# radial / flat bubbles
# ----------------------------------------------------------------------

def test_radial_bubble_validation():
    with pytest.raises(ConfigValidationError):
        radial_bubble(-1, 2.0)
    with pytest.raises(ConfigValidationError):
        radial_bubble(1, 0.0)
    with pytest.raises(ConfigValidationError):
        radial_bubble(1, float("inf"))


def test_radial_bubble_peak_mass_and_sites():
    for alpha, lam in [(0, 3.0), (2, 7.0), (4, 1.5)]:
        sol = radial_bubble(alpha, lam)
        # peak value ln(8 (1+alpha)^2 lam^2)
        want = math.log(8.0 * (1 + alpha) ** 2 * lam * lam)
        assert abs(float(sol(0.0, 0.0)) - want) < 1e-12
        assert abs(sol.total_mass - 8.0 * math.pi * (1 + alpha)) < 1e-12
        (sx, sy, width), = sol.sites
        assert sx == sy == 0.0
        assert abs(width - lam ** (-1.0 / (1 + alpha))) < 1e-12
    # zero set bookkeeping: alpha >= 1 puts a pole of that order at 0
    assert radial_bubble(3, 2.0).weight.poles.alphas == (3,)
    assert radial_bubble(0, 2.0).weight.poles.count == 0


def test_radial_bubble_gradient_matches_difference_quotient():
    sol = radial_bubble(2, 5.0)
    pts = [(0.31, -0.12), (0.05, 0.07), (-0.6, 0.44)]
    h = 1e-5
    for x, y in pts:
        gx, gy = sol.gradient(x, y)
        dx = (sol(x + h, y) - sol(x - h, y)) / (2 * h)
        dy = (sol(x, y + h) - sol(x, y - h)) / (2 * h)
        assert abs(gx - dx) < 1e-5 * max(1.0, abs(dx))
        assert abs(gy - dy) < 1e-5 * max(1.0, abs(dy))


def test_radial_bubble_solves_equation(disk65):
    # -lap u = |x|^(2 alpha) e^u, checked with the grid laplacian; the
    # evaluator supplies the rim trace so the defect is pure truncation.
    sol = radial_bubble(1, 2.0)
    fld = sol.sample(disk65)
    lap = laplacian(fld, boundary=sol.evaluator)
    src = np.exp(sol.weight.log_values(disk65.X, disk65.Y) + fld.values)
    defect = np.abs(lap.values + src)[disk65.interior]
    assert np.max(defect) < 1e-2 * np.max(src[disk65.interior])


@given(alpha=st.integers(0, 5),
       lam=st.floats(0.5, 50.0),
       delta=st.floats(0.05, 20.0))
def test_bubble_window_mass_monotone_and_bounded(alpha, lam, delta):
    m = bubble_mass_closed_form(alpha, lam, delta)
    full = 8.0 * math.pi * (1 + alpha)
    assert 0.0 < m < full
    assert bubble_mass_closed_form(alpha, lam, 2 * delta) > m
    # window >> 1/lam captures essentially everything
    assert bubble_mass_closed_form(alpha, lam * 1e12, delta) > 0.999 * full


def test_flat_bubble_is_shifted_zero_order_bubble():
    lam, w0 = 4.0, 2.5
    sol = flat_bubble(lam, w0)
    base = radial_bubble(0, lam)
    x = np.linspace(-0.8, 0.8, 7)
    assert np.allclose(sol(x, x), base(x, x) - math.log(w0), atol=1e-12)
    assert abs(sol.total_mass - 8.0 * math.pi) < 1e-12
    assert np.allclose(sol.weight.h(x, x), w0)


def test_flat_bubble_solves_equation(disk65):
    lam, w0 = 3.0, 0.7
    sol = flat_bubble(lam, w0)
    fld = sol.sample(disk65)
    lap = laplacian(fld, boundary=sol.evaluator)
    src = w0 * np.exp(fld.values)
    defect = np.abs(lap.values + src)[disk65.interior]
    assert np.max(defect) < 1e-2 * np.max(src[disk65.interior])


# ----------------------------------------------------------------------
# developing maps
# ----------------------------------------------------------------------

_POLE_POOL = [0.3 + 0.0j, -0.25 + 0.1j, 0.05 - 0.4j, -0.15 - 0.2j]


@given(idx=st.lists(st.integers(0, 3), min_size=1, max_size=3, unique=True),
       orders=st.lists(st.integers(1, 2), min_size=3, max_size=3))
def test_polynomial_primitive_derivative_property(idx, orders):
    cfg = PoleConfig(tuple(_POLE_POOL[i] for i in idx),
                     tuple(orders[:len(idx)]))
    coeffs = polynomial_primitive(cfg)
    assert coeffs[0] == 0.0  # F(0) = 0
    got = np.polynomial.polynomial.polyder(coeffs)
    want = np.array([1.0 + 0.0j])
    for p, a in zip(cfg.poles, cfg.alphas):
        for _ in range(a):
            want = np.convolve(want, np.array([-p, 1.0 + 0.0j]))
    assert np.allclose(got, want, atol=1e-12)
    assert len(coeffs) - 1 == cfg.map_degree


def test_polynomial_primitive_degree_cap():
    cfg = PoleConfig((0.3 + 0j,), (70,))
    with pytest.raises(ConfigValidationError):
        polynomial_primitive(cfg)


def test_developing_map_validation():
    cfg = PoleConfig((0.3 + 0j,), (1,))
    coeffs = polynomial_primitive(cfg)
    with pytest.raises(ConfigValidationError):
        DevelopingMap(np.array([1.0 + 0j]), 2.0, cfg)          # degree 0
    with pytest.raises(ConfigValidationError):
        DevelopingMap(coeffs, -1.0, cfg)                       # bad amplitude
    with pytest.raises(ConfigValidationError):                 # degree mismatch
        DevelopingMap(coeffs, 2.0, PoleConfig((0.3 + 0j,), (2,)))
    bad = np.array(coeffs)
    bad[1] += 0.3                                              # wrong derivative
    with pytest.raises(ConfigValidationError):
        DevelopingMap(bad, 2.0, cfg)


def test_developing_map_log_modulus_near_and_far():
    cfg = PoleConfig((0.3 + 0j, -0.2 + 0.1j), (1, 2))
    coeffs = polynomial_primitive(cfg)
    dm = DevelopingMap(coeffs, 2.0, cfg)
    assert dm.is_centered()

    z = np.array([0.1 + 0.2j, -0.4 - 0.1j, 0.9 + 0.0j])
    direct = np.log(np.abs(dm.lam * (
        np.polynomial.polynomial.polyval(z, coeffs) - dm.shift)))
    assert np.allclose(dm.log_modulus(z), direct, atol=1e-12)

    # far field: direct Horner would overflow, the factored path must not
    big = np.array([1e80 + 0j])
    got = float(dm.log_modulus(big)[0])
    want = math.log(dm.lam * abs(dm.leading)) + dm.degree * math.log(1e80)
    assert np.isfinite(got)
    assert abs(got - want) < 1e-6 * abs(want)


def test_developing_map_field_mass_sites_and_equation(disk65):
    cfg = PoleConfig((0.3 + 0j,), (1,))
    dm = DevelopingMap(polynomial_primitive(cfg), 2.0, cfg)
    sol = developing_map_field(dm)
    assert abs(sol.total_mass - 8.0 * math.pi * 2) < 1e-12
    assert len(sol.sites) == dm.degree  # one bubble per root of F - shift

    fld = sol.sample(disk65)
    lap = laplacian(fld, boundary=sol.evaluator)
    src = np.exp(sol.weight.log_values(disk65.X, disk65.Y) + fld.values)
    defect = np.abs(lap.values + src)
    ok = disk65.interior & np.isfinite(defect)
    assert np.max(defect[ok]) < 1e-2 * np.max(src[ok])

    # once the amplitude concentrates the bubbles, the unit window holds
    # essentially the whole 8 pi deg F
    dm_tight = DevelopingMap(polynomial_primitive(cfg), 40.0, cfg)
    tight = developing_map_field(dm_tight).sample(disk65)
    m = weighted_mass(tight, tight.weight, 0.98)
    assert abs(float(m) / (8.0 * math.pi * 2) - 1.0) < 0.02


def test_developing_map_gradient_matches_difference_quotient():
    cfg = PoleConfig((0.3 + 0j, -0.2 + 0.1j), (1, 1))
    dm = DevelopingMap(polynomial_primitive(cfg), 3.0, cfg)
    sol = developing_map_field(dm)
    h = 1e-5
    for x, y in [(0.12, -0.33), (0.5, 0.2), (-0.71, -0.05)]:
        gx, gy = sol.gradient(np.array([x]), np.array([y]))
        dx = (sol(x + h, y) - sol(x - h, y)) / (2 * h)
        dy = (sol(x, y + h) - sol(x, y - h)) / (2 * h)
        assert abs(float(gx[0]) - dx) < 1e-5 * max(1.0, abs(dx))
        assert abs(float(gy[0]) - dy) < 1e-5 * max(1.0, abs(dy))


# ----------------------------------------------------------------------
# rescaling
# ----------------------------------------------------------------------

def test_rescaled_weight_moves_poles_and_composes_h():
    w = radial_bubble(2, 3.0).weight
    out = rescaled_weight(w, 0.5)
    assert out.poles.alphas == (2,)
    assert out.poles.poles == (0j,)
    wf = flat_bubble(2.0, 1.7).weight
    out2 = rescaled_weight(wf, 0.25)
    assert np.allclose(out2.h(0.4, -0.8), wf.h(0.1, -0.2))


def test_rescale_validation(disk65):
    fld = radial_bubble(0, 2.0).sample(disk65)
    for tau in (0.0, -0.5, 1.5):
        with pytest.raises(ConfigValidationError):
            rescale(fld, tau, 0)


def test_rescale_preserves_equation_and_mass(disk65):
    # zoom of an exact solution is again exact for the rescaled weight,
    # and masses match window-for-window.
    cfg = PoleConfig((0.25 + 0j, -0.2 + 0.05j), (1, 1))
    dm = DevelopingMap(polynomial_primitive(cfg), 1.5, cfg)
    sol = developing_map_field(dm)
    fld = sol.sample(disk65)
    tau = 0.5
    zoom = rescale(fld, tau, sum(cfg.alphas))
    assert zoom.grid.radius == pytest.approx(disk65.radius / tau)
    w_tau = rescaled_weight(sol.weight, tau)

    lap = laplacian(zoom, boundary=zoom.evaluator)
    src = np.exp(w_tau.log_values(zoom.grid.X, zoom.grid.Y) + zoom.values)
    defect = np.abs(lap.values + src)
    ok = zoom.grid.interior & np.isfinite(defect)
    assert np.max(defect[ok]) < 5e-2

    for delta in (0.2, 0.45, 0.8):
        m_orig = float(weighted_mass(fld, sol.weight, delta))
        m_zoom = float(weighted_mass(zoom, w_tau, delta / tau))
        assert abs(m_zoom - m_orig) < 1e-6 * max(1.0, abs(m_orig))

    # concentration sites move with the zoom
    zs = zoom.concentration_sites()
    os = fld.concentration_sites()
    assert len(zs) == len(os)
    assert zs[0][0] == pytest.approx(os[0][0] / tau)
    assert zs[0][2] == pytest.approx(os[0][2] / tau)


def test_singular_part_excludes_pole_nodes(disk65):
    cfg = PoleConfig((0j,), (2,))  # pole exactly on the center node
    fld = flat_bubble(2.0, 1.0).sample(disk65)
    out, excluded = singular_part(fld, cfg)
    assert (0.0, 0.0) in excluded
    i = disk65.n // 2
    assert np.isnan(out.values[i, i])
    # off the pole: plain shift by 2 alpha ln |x|
    x, y = disk65.X[i, i + 5], disk65.Y[i, i + 5]
    want = fld.values[i, i + 5] + 4.0 * math.log(math.hypot(x, y))
    assert out.values[i, i + 5] == pytest.approx(want)


# ----------------------------------------------------------------------
# schedules and families
# ----------------------------------------------------------------------

def test_pole_rule_normalizes_and_validates():
    r = PoleRule(3.0 + 4.0j, 0.5, 1.0, 2)
    assert abs(abs(r.direction) - 1.0) < 1e-15
    assert abs(r.position(4)) == pytest.approx(0.5 / 4.0)
    assert r.position(1) == pytest.approx(r.direction * 0.5)
    with pytest.raises(ConfigValidationError):
        PoleRule(0.0, 0.5, 1.0, 1)
    with pytest.raises(ConfigValidationError):
        PoleRule(1.0, -0.5, 1.0, 1)
    with pytest.raises(ConfigValidationError):
        PoleRule(1.0, 0.5, 0.0, 1)
    with pytest.raises(ConfigValidationError):
        PoleRule(1.0, 0.5, 1.0, 0)
    assert PoleRule.from_dict(r.to_dict()) == r


def test_lam_schedule_values_and_validation():
    g = LamSchedule("geometric", 2.0, 4.0)
    assert g.value(3) == pytest.approx(2.0 * 64.0)
    p = LamSchedule("power", 5.0, 1.5)
    assert p.value(4) == pytest.approx(5.0 * 8.0)
    for bad in [("ramp", 1.0, 2.0), ("geometric", 0.0, 2.0),
                ("geometric", 1.0, 0.5), ("power", 1.0, -1.0)]:
        with pytest.raises(ConfigValidationError):
            LamSchedule(*bad)
    assert LamSchedule.from_dict(g.to_dict()) == g


def _two_scale_rules():
    return (PoleRule(1.0, 0.5, 1.0, 1),
            PoleRule(-1.0, 0.4, 2.0, 1),
            PoleRule(1j, 0.45, 2.0, 2))


def test_family_scales_track_slowest_and_fastest_groups():
    fam = CollapsingFamily("developing_map", (1, 6),
                           LamSchedule("geometric", 10.0, 2.0),
                           _two_scale_rules())
    k = 3
    assert fam.tau_at(k) == pytest.approx(0.5 / 3.0)          # slowest rule
    assert fam.eps_at(k) == pytest.approx(0.45 / 9.0)         # fastest group
    assert fam.total_alpha() == 4
    assert fam.lam_at(k) == pytest.approx(80.0)
    cfg = fam.pole_config(k)
    mods = [abs(p) for p in cfg.poles]
    assert mods == sorted(mods)
    assert list(fam.ks()) == [1, 2, 3, 4, 5, 6]


def test_family_kind_constraints():
    lam = LamSchedule("geometric", 2.0, 2.0)
    with pytest.raises(ConfigValidationError):
        CollapsingFamily("mystery", (1, 3), lam)
    with pytest.raises(ConfigValidationError):
        CollapsingFamily("radial_bubble", (1, 3), lam,
                         pole_rules=_two_scale_rules())
    with pytest.raises(ConfigValidationError):
        CollapsingFamily("developing_map", (1, 3), lam)  # needs pole rules
    with pytest.raises(ConfigValidationError):
        CollapsingFamily("developing_map", (3, 1), lam, _two_scale_rules())
    r = PoleRule(1.0, 0.5, 1.0, 1)
    with pytest.raises(ConfigValidationError):
        CollapsingFamily("developing_map", (1, 3), lam, (r, r))


def test_family_members_exact_kinds():
    fam = CollapsingFamily("radial_bubble", (1, 4),
                           LamSchedule("power", 3.0, 1.0), alpha=2)
    mem = fam.member(2)
    assert mem.k == 2 and mem.lam == pytest.approx(6.0)
    assert math.isnan(mem.tau)
    assert mem.exact is not None and mem.seed is None
    assert mem.exact.meta["kind"] == "radial_bubble"

    fam2 = CollapsingFamily("developing_map", (1, 5),
                            LamSchedule("geometric", 2.0, 2.0),
                            (PoleRule(1.0, 0.3, 1.0, 1),))
    mem2 = fam2.member(3)
    assert mem2.exact.total_mass == pytest.approx(16.0 * math.pi)
    assert mem2.tau == pytest.approx(0.1)
    with pytest.raises(ConfigValidationError):
        fam2.member(6)
    with pytest.raises(ConfigValidationError):
        fam2.member(0)


def test_family_perturbed_member_seeds_flat_bubble():
    fam = CollapsingFamily("perturbed_bubble", (1, 4),
                           LamSchedule("geometric", 8.0, 2.0),
                           (PoleRule(1.0, 0.3, 1.0, 1),
                            PoleRule(-1.0, 0.35, 1.0, 1)))
    mem = fam.member(2)
    assert mem.exact is None and mem.seed is not None
    assert mem.seed.meta["kind"] == "flat_bubble"
    # the seed is matched to the weight value at the collapse point,
    # W(0) = prod |p_j|^(2 a_j) with |p_1| = 0.15, |p_2| = 0.175 at k = 2
    assert mem.seed.meta["w0"] == pytest.approx(mem.weight.at_origin())
    assert mem.weight.at_origin() == pytest.approx((0.15 ** 2) * (0.175 ** 2))


def test_family_perturbed_rejects_degenerate_origin_weight():
    # modulus so small that |p|^(2a) underflows to exactly 0
    fam = CollapsingFamily("perturbed_bubble", (1, 2),
                           LamSchedule("geometric", 8.0, 2.0),
                           (PoleRule(1.0, 1e-200, 1.0, 2),))
    with pytest.raises(ConfigValidationError):
        fam.member(1)


def test_validate_schedules_guards():
    fam = make_family(CollapsingFamily(
        "developing_map", (1, 4), LamSchedule("geometric", 2.0, 2.0),
        (PoleRule(1.0, 0.3, 1.0, 1),)))
    assert fam.k_max == 4

    # a decreasing amplitude stub must be refused
    bad_lam = types.SimpleNamespace(value=lambda k: 1.0 / k)
    fam_bad = CollapsingFamily("developing_map", (1, 4), bad_lam,
                               (PoleRule(1.0, 0.3, 1.0, 1),))
    with pytest.raises(ConfigValidationError):
        fam_bad.validate_schedules()

    # a non-shrinking pole trajectory stub must be refused
    frozen = types.SimpleNamespace(direction=1.0 + 0j, modulus0=0.3,
                                   exponent=1.0, alpha=1,
                                   position=lambda k: 0.3 + 0j)
    fam_frozen = CollapsingFamily("developing_map", (1, 4),
                                  LamSchedule("geometric", 2.0, 2.0),
                                  (frozen,))
    with pytest.raises(ConfigValidationError):
        fam_frozen.validate_schedules()


@given(kind=st.sampled_from(["radial_bubble", "developing_map",
                             "perturbed_bubble"]),
       k_min=st.integers(1, 3), span=st.integers(0, 5),
       lam0=st.floats(0.5, 100.0), rate=st.floats(1.0, 4.0),
       alpha=st.integers(0, 3),
       n_rules=st.integers(1, 3))
def test_family_serialization_round_trip(kind, k_min, span, lam0, rate,
                                         alpha, n_rules):
    dirs = [1.0 + 0j, -1.0 + 0j, 0.5 + 0.5j]
    rules = tuple(PoleRule(dirs[i], 0.3 + 0.1 * i, 1.0 + 0.5 * i, 1 + i)
                  for i in range(n_rules))
    fam = CollapsingFamily(kind, (k_min, k_min + span),
                           LamSchedule("geometric", lam0, rate),
                           pole_rules=() if kind == "radial_bubble" else rules,
                           alpha=alpha if kind == "radial_bubble" else 0)
    doc = fam.to_dict()
    back = CollapsingFamily.from_dict(doc)
    assert back.to_dict() == doc
    assert back.kind == fam.kind and back.k_min == fam.k_min
    assert back.total_alpha() == fam.total_alpha()


def test_family_from_dict_rejects_unknown_schema():
    with pytest.raises(ConfigValidationError):
        CollapsingFamily.from_dict({"schema": "family-rule/9", "kind":
                                    "radial_bubble", "k_range": [1, 2],
                                    "lam": {"kind": "geometric", "lam0": 1.0,
                                            "rate": 2.0}})


def test_make_family_accepts_rule_dicts():
    doc = {"schema": "family-rule/1", "kind": "radial_bubble",
           "k_range": [1, 3], "lam": {"kind": "power", "lam0": 2.0,
                                      "rate": 1.0}, "poles": [], "alpha": 1}
    fam = make_family(doc)
    assert fam.alpha == 1 and fam.lam_at(2) == pytest.approx(4.0)
