import numpy as np
import pytest
from hypothesis import given, strategies as st

from liouville_lab import ConfigValidationError, PoleConfig, WeightSpec

small_complex = st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)) \
    .map(lambda t: complex(*t))


def _distinct_poleset(draw_poles, alphas):
    seen = []
    for p in draw_poles:
        if all(abs(p - q) > 1e-6 for q in seen):
            seen.append(p)
    return PoleConfig(tuple(seen), tuple(alphas[:len(seen)]))


def test_duplicate_poles_rejected_with_merge_hint():
    with pytest.raises(ConfigValidationError) as exc:
        PoleConfig((0.3 + 0j, 0.3 + 0j), (1, 1))
    msg = str(exc.value)
    assert "pairwise distinct" in msg and "summed order" in msg


def test_nearly_coincident_poles_rejected():
    with pytest.raises(ConfigValidationError):
        PoleConfig((0.3 + 0j, 0.3 + 1e-14j), (1, 2))


def test_zero_order_validation():
    with pytest.raises(ConfigValidationError):
        PoleConfig((0.3 + 0j,), (0,))
    with pytest.raises(ConfigValidationError):
        PoleConfig((0.3 + 0j,), (-2,))
    with pytest.raises(ConfigValidationError):
        PoleConfig((0.3 + 0j, 0.5j), (1,))


def test_counts_and_degree():
    cfg = PoleConfig((0.2 + 0j, -0.5j), (2, 3))
    assert cfg.count == 2
    assert cfg.total_order == 5
    assert cfg.map_degree == 6


def test_sorted_by_modulus_is_stable():
    cfg = PoleConfig((0.5 + 0j, 0.1j, -0.5 + 0j), (1, 2, 3))
    s = cfg.sorted_by_modulus()
    assert abs(s.poles[0]) <= abs(s.poles[1]) <= abs(s.poles[2])
    assert s.alphas == (2, 1, 3)   # ties keep input order


def test_log_weight_matches_direct_product():
    cfg = PoleConfig((0.2 + 0.1j, -0.4j), (1, 2))
    x = np.array([0.5, -0.3, 0.0])
    y = np.array([0.1, 0.6, 0.0])
    direct = np.ones_like(x)
    for p, a in zip(cfg.poles, cfg.alphas):
        direct *= ((x - p.real) ** 2 + (y - p.imag) ** 2) ** a
    assert np.allclose(np.exp(cfg.log_weight(x, y)), direct)
    assert np.allclose(cfg.polynomial_part(x, y), direct)


def test_log_weight_is_minus_infinity_at_a_pole():
    cfg = PoleConfig((0.25 + 0j,), (1,))
    v = cfg.log_weight(np.array([0.25]), np.array([0.0]))
    assert v[0] == -np.inf


@given(st.lists(small_complex, min_size=1, max_size=4),
       st.lists(st.integers(1, 4), min_size=4, max_size=4))
def test_pole_config_round_trip(poles, alphas):
    cfg = _distinct_poleset(poles, alphas)
    back = PoleConfig.from_dict(cfg.to_dict())
    assert back.poles == cfg.poles and back.alphas == cfg.alphas


def test_weight_at_origin():
    cfg = PoleConfig((0.5 + 0j, -0.25j), (1, 2))
    w = WeightSpec(poles=cfg)
    assert w.at_origin() == pytest.approx(0.5 ** 2 * 0.25 ** 4)


def test_weight_with_pole_at_origin_vanishes_there():
    w = WeightSpec(poles=PoleConfig((0j,), (2,)))
    assert w.at_origin() == 0.0


def test_h_bounds_are_certified():
    with pytest.raises(ConfigValidationError):
        WeightSpec(h=lambda x, y: 1.0 + 2.0 * x * x, bounds=(0.5, 2.0))
    ok = WeightSpec(h=lambda x, y: 1.0 + 0.4 * x, bounds=(0.5, 2.0))
    assert ok.h_values(0.5, 0.0) == pytest.approx(1.2)


def test_h_normalization_checked():
    with pytest.raises(ConfigValidationError):
        WeightSpec(h=lambda x, y: 1.5 + 0.0 * x, bounds=(0.5, 2.0))
    WeightSpec(h=lambda x, y: 1.5 + 0.0 * x, bounds=(0.5, 2.0),
               normalized=False)


def test_pohozaev_density_constant_weight():
    w = WeightSpec()
    x = np.array([0.3, -0.2])
    y = np.array([0.0, 0.4])
    # W = 1: (2W + x.grad W)/W = 2
    assert np.allclose(w.pohozaev_density(x, y), 2.0)


def test_pohozaev_density_radial_monomial():
    # W = |x|^(2a): the density is 2(1 + a) everywhere off the pole
    a = 3
    w = WeightSpec(poles=PoleConfig((0j,), (a,)))
    x = np.array([0.3, -0.2, 0.05])
    y = np.array([0.1, 0.4, -0.5])
    assert np.allclose(w.pohozaev_density(x, y), 2.0 * (1 + a))
