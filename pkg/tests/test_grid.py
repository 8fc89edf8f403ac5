import numpy as np
import pytest

from liouville_lab import DiskGrid, GridConfigError


def test_node_classification_partitions_lattice(disk65):
    g = disk65
    total = g.interior.astype(int) + g.boundary_adjacent.astype(int) \
        + g.exterior.astype(int)
    assert np.all(total == 1)
    assert np.array_equal(g.inside, g.interior | g.boundary_adjacent)


def test_origin_is_a_node(disk65):
    i, j = disk65.origin_index
    assert disk65.X[i, j] == 0.0 and disk65.Y[i, j] == 0.0
    assert disk65.interior[i, j]


def test_spacing():
    g = DiskGrid(2.0, 33)
    assert g.h == pytest.approx(2.0 * 2.0 / 32)
    assert np.allclose(np.diff(g.xs), g.h)


def test_cell_areas_sum_to_disk_area():
    for n, rel in ((33, 4e-3), (129, 3e-4)):
        g = DiskGrid(1.0, n)
        a = g.cell_areas()
        assert a[g.exterior].sum() == 0.0
        assert float(a.sum()) == pytest.approx(np.pi, rel=rel)


def test_clipped_cell_areas_sum_to_window_area(disk65):
    for delta in (0.3, 0.7, 1.0):
        a = disk65.cell_areas(delta)
        assert float(a.sum()) == pytest.approx(np.pi * delta * delta, rel=5e-3)


def test_arm_fractions_unit_in_the_interior(disk65):
    g = disk65
    assert np.all(g.arm_fractions[:, g.interior] == 1.0)
    cut = g.arm_fractions[:, g.boundary_adjacent]
    assert np.all((cut > 0.0) & (cut <= 1.0))
    assert np.any(cut < 1.0)


def test_boundary_arm_points_lie_on_the_circle(disk65):
    ii, jj, dd, px, py = disk65.boundary_arm_points()
    assert len(px) > 0 and len(px) == len(ii) == len(dd)
    assert np.allclose(np.hypot(px, py), disk65.radius, atol=1e-10)


def test_circle_points(disk65):
    x, y, th = disk65.circle_points(0.5, m=64)
    assert np.allclose(np.hypot(x, y), 0.5)
    assert len(th) == 64


def test_refined_doubles_resolution(disk33):
    f = disk33.refined()
    assert f.n == 2 * disk33.n - 1
    assert f.radius == disk33.radius
    assert f.h == pytest.approx(disk33.h / 2.0)


def test_validation_errors():
    with pytest.raises(GridConfigError):
        DiskGrid(1.0, 32)          # even
    with pytest.raises(GridConfigError):
        DiskGrid(1.0, 31)          # too coarse
    with pytest.raises(GridConfigError):
        DiskGrid(-1.0, 33)
    with pytest.raises(GridConfigError):
        DiskGrid(float("inf"), 33)


def test_grid_arrays_are_frozen(disk33):
    with pytest.raises(ValueError):
        disk33.X[0, 0] = 5.0
