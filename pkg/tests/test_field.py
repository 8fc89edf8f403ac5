import numpy as np
import pytest
from hypothesis import given, strategies as st

from liouville_lab import DiskGrid, FieldShapeError, ScalarField

coeff = st.floats(-5.0, 5.0, allow_nan=False)


def quad_field(grid, a, b, c, d, e, f0):
    fn = lambda x, y: a * x * x + b * x * y + c * y * y + d * x + e * y + f0
    return ScalarField.from_function(grid, fn), fn


def test_from_function_masks_exterior(disk33):
    fld, fn = quad_field(disk33, 1.0, 0.0, 2.0, 0.0, 0.0, 3.0)
    assert np.all(np.isnan(fld.values[disk33.exterior]))
    assert np.allclose(fld.values[disk33.inside],
                       fn(disk33.X[disk33.inside], disk33.Y[disk33.inside]))


def test_values_are_immutable(disk33):
    fld, _ = quad_field(disk33, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        fld.values[16, 16] = 9.9


def test_shape_mismatch_rejected(disk33):
    with pytest.raises(FieldShapeError):
        ScalarField(disk33, np.zeros((5, 5)))


def test_evaluator_consistency_checked(disk33):
    vals = np.zeros((disk33.n, disk33.n))
    with pytest.raises(FieldShapeError):
        ScalarField(disk33, vals, evaluator=lambda x, y: x + 1.0)


@given(a=coeff, b=coeff, c=coeff, d=coeff, e=coeff, f0=coeff)
def test_origin_value_refined_exact_on_quadratics(a, b, c, d, e, f0):
    g = DiskGrid(1.0, 33)
    fld, _ = quad_field(g, a, b, c, d, e, f0)
    sampled = ScalarField.from_values(g, fld.values)
    scale = 1.0 + max(abs(v) for v in (a, b, c, d, e, f0))
    assert sampled.origin_value_refined() == pytest.approx(f0, abs=1e-9 * scale)


def test_origin_value_refined_prefers_evaluator(disk33):
    fld = ScalarField.from_function(disk33, lambda x, y: np.cos(3.0 * x))
    assert fld.origin_value_refined() == pytest.approx(1.0, abs=1e-15)


def test_interpolate_second_order():
    fn = lambda x, y: np.sin(2.0 * x) * np.cos(y)
    errs = []
    for n in (33, 65):
        g = DiskGrid(1.0, n)
        fld = ScalarField.from_values(
            g, np.where(g.inside, fn(g.X, g.Y), np.nan))
        th = np.linspace(0.0, 2 * np.pi, 40)
        px, py = 0.4 * np.cos(th), 0.4 * np.sin(th)
        errs.append(float(np.max(np.abs(fld.interpolate(px, py) - fn(px, py)))))
    assert errs[0] / errs[1] >= 3.0


def test_save_load_round_trip(tmp_path, disk33):
    fld, _ = quad_field(disk33, 0.5, -1.0, 2.0, 0.0, 1.0, -3.0)
    pc, pj = tmp_path / "f.csv", tmp_path / "f.json"
    fld.save(pc, pj)
    back = ScalarField.load(pc, pj)
    assert back.grid.n == disk33.n and back.grid.radius == disk33.radius
    assert np.allclose(back.values[disk33.inside], fld.values[disk33.inside])
    assert np.all(np.isnan(back.values[disk33.exterior]))


def test_boundary_trace_used_for_minimum(disk33):
    fld = ScalarField.from_function(disk33, lambda x, y: x)
    assert fld.boundary_min() == pytest.approx(-1.0, abs=1e-12)


def test_at_points_falls_back_to_bilinear(disk33):
    fn = lambda x, y: x + 2.0 * y
    fld = ScalarField.from_values(
        disk33, np.where(disk33.inside, fn(disk33.X, disk33.Y), np.nan))
    assert fld.at_points(0.1, 0.2) == pytest.approx(0.5, abs=1e-12)
