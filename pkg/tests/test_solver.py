"""Dirichlet Newton solver, continuation, and the log-potential split."""

import math

import numpy as np
import pytest

from liouville_lab import (
    ConvergenceRecord,
    DevelopingMap,
    DirichletProblem,
    DiskGrid,
    NewtonParams,
    PoleConfig,
    SolverFailure,
    WeightSpec,
    developing_map_field,
    flat_bubble,
    green_decompose,
    harmonic_extension,
    polynomial_primitive,
    radial_bubble,
    solve_dirichlet,
)
from liouville_lab.solver import (
    RIM_COLLAR,
    RIM_DEFECT_BOUND,
    RIM_TAIL_BOUND,
    WEIGHT_FLOOR,
)


def test_frozen_solver_constants():
    # downstream tolerance arithmetic bakes these in; changing them is an
    # interface change, not a tweak
    assert WEIGHT_FLOOR == 1e-300
    assert RIM_DEFECT_BOUND == 0.35
    assert RIM_COLLAR == 4
    assert RIM_TAIL_BOUND == 2e-3


def test_harmonic_extension_exact_on_harmonic_quadratic(disk65):
    # x^2 - y^2 is harmonic and the unequal-arm stencil is exact on
    # quadratics, so the extension must match to linear-solver tolerance
    bnd = lambda x, y: np.asarray(x) ** 2 - np.asarray(y) ** 2
    ext = harmonic_extension(disk65, bnd)
    want = bnd(disk65.X, disk65.Y)
    err = np.abs(ext.values - want)[disk65.inside]
    assert np.max(err) < 1e-9


def test_solve_recovers_bubble_from_its_trace(disk65):
    sol = flat_bubble(0.8, 1.0)
    prob = DirichletProblem(WeightSpec(), sol.evaluator, disk65)
    u = solve_dirichlet(prob)
    r = u.record
    assert r.converged
    assert r.stages == 1
    newton_iters = len([s for s in r.steps if s.get("kind") == "newton"]) - 1
    assert newton_iters <= 20
    assert r.quadratic_tail()
    assert r.max_principle_ok
    assert r.final_residual <= r.tol_effective
    err = np.abs(u.values - sol.evaluator(disk65.X, disk65.Y))[disk65.inside]
    assert np.max(err) < 5e-3  # second-order truncation at n = 65


def test_solve_recovers_singular_weight_solution(disk65):
    # weight |x|^2: exact answer is the order-1 radial bubble
    sol = radial_bubble(1, 1.5)
    prob = DirichletProblem(sol.weight, sol.evaluator, disk65)
    u = solve_dirichlet(prob)
    assert u.record.converged
    err = np.abs(u.values - sol.evaluator(disk65.X, disk65.Y))[disk65.inside]
    assert np.max(err) < 5e-3


def test_weight_below_floor_returns_harmonic_extension(disk65):
    w = WeightSpec(h=lambda x, y: np.full(np.broadcast(x, y).shape, 1e-305),
                   bounds=(1e-306, 1e-304), normalized=False)
    bnd = lambda x, y: np.asarray(x) ** 2 - np.asarray(y) ** 2
    u = solve_dirichlet(DirichletProblem(w, bnd, disk65))
    r = u.record
    assert r.converged
    assert "weight below floor" in r.message
    assert r.steps[0]["kind"] == "sentinel"
    err = np.abs(u.values - bnd(disk65.X, disk65.Y))[disk65.inside]
    assert np.max(err) < 1e-9


def test_failure_carries_best_iterate(disk65):
    sol = flat_bubble(50.0, 1.0)
    prob = DirichletProblem(WeightSpec(), sol.evaluator, disk65)
    with pytest.raises(SolverFailure) as exc:
        solve_dirichlet(prob, NewtonParams(max_iter=2), auto_continue=False)
    e = exc.value
    assert e.best_field is not None
    assert e.record is not None and not e.record.converged
    assert np.isfinite(e.record.final_residual)
    assert e.best_field.grid is disk65


def test_trust_cap_rescues_far_below_start(disk65):
    # a start 13 levels under the data forces huge Newton directions; the
    # sup-norm cap must keep the walk on the minimal branch and converge
    prob = DirichletProblem(WeightSpec(),
                            lambda x, y: np.full(np.shape(x), -2.0),
                            disk65, initial=np.full((65, 65), -15.0))
    u = solve_dirichlet(prob, auto_continue=False)
    r = u.record
    assert r.converged
    assert any("cap" in s.get("solver", "") for s in r.steps)
    assert r.max_principle_ok
    assert r.min_interior >= -2.0 - 1e-8


def test_far_above_start_fails_toward_the_fold(disk65):
    # descending from far above the minimal branch walks into the turning
    # point where the linearization degenerates; the solver must refuse
    # honestly rather than hop branches
    prob = DirichletProblem(WeightSpec(),
                            lambda x, y: np.full(np.shape(x), -2.0),
                            disk65, initial=np.full((65, 65), 8.0))
    with pytest.raises(SolverFailure):
        solve_dirichlet(prob)


def test_boundary_ramp_chain_records_stages(disk65):
    sol = flat_bubble(0.8, 1.0)
    prob = DirichletProblem(WeightSpec(), sol.evaluator, disk65).with_ramp()
    u = solve_dirichlet(prob)
    assert u.record.stages == 5  # four lowered stages + the target
    assert u.record.converged
    err = np.abs(u.values - sol.evaluator(disk65.X, disk65.Y))[disk65.inside]
    assert np.max(err) < 5e-3


def test_shifted_problem_lowers_boundary(disk65):
    prob = DirichletProblem(WeightSpec(), lambda x, y: np.zeros(np.shape(x)),
                            disk65)
    low = prob.shifted(3.0)
    x = np.array([0.5])
    assert low.boundary(x, x)[0] == pytest.approx(-3.0)


# ----------------------------------------------------------------------
# convergence-record classification
# ----------------------------------------------------------------------

def _record_with(residuals):
    rec = ConvergenceRecord()
    for i, r in enumerate(residuals):
        rec.log(kind="newton", stage=0, iter=i, residual=r,
                sup_residual=r, step=1.0, solver="lu")
    return rec


def test_quadratic_tail_detects_contraction_order():
    assert _record_with([1e-1, 1e-2, 1e-4, 1e-8]).quadratic_tail()
    # geometric (order-1) decay is not quadratic
    assert not _record_with([1e-1, 1e-2, 1e-3, 1e-4]).quadratic_tail()
    # too short to classify
    assert not _record_with([1e-1, 1e-3]).quadratic_tail()
    # round-off floor after the quadratic burst must not mask it
    assert _record_with([1e-1, 1e-2, 1e-4, 5e-17, 6e-17]).quadratic_tail()
    # non-monotone garbage
    assert not _record_with([1e-1, 2e-1, 1e-1, 2e-1]).quadratic_tail()


def test_final_residual_empty_record():
    assert ConvergenceRecord().final_residual == np.inf


# ----------------------------------------------------------------------
# log-potential (Green) split
# ----------------------------------------------------------------------

def test_green_decompose_exact_two_bubble_field(disk65):
    cfg = PoleConfig((0.3 + 0j,), (1,))
    dm = DevelopingMap(polynomial_primitive(cfg), 30.0, cfg)
    sol = developing_map_field(dm)
    fld = sol.sample(disk65)
    dec = green_decompose(fld, sol.weight)

    # the disk holds essentially the full 16 pi (tail beyond the rim ~ 1%)
    assert abs(dec.source_mass / (16.0 * math.pi) - 1.0) < 0.02
    # FFT and direct summation must agree to round-off
    assert dec.probe_rel_err < 1e-12
    assert not dec.flagged
    # split reassembles the field exactly
    recon = dec.newtonian.values + dec.regular.values + fld.boundary_min()
    err = np.abs(recon - fld.values)[disk65.inside]
    assert np.max(err) < 1e-12
    # the remainder is discretely harmonic up to the predicted quadrature
    # tolerance (truncation of the cell sums), with real margin
    assert dec.lap_regular_sup <= dec.quad_tol
    assert dec.quad_tol_interior <= dec.quad_tol
    # circle trace of the log potential is finite and 2 pi periodic
    th = np.linspace(0.0, 2.0 * math.pi, 9)
    bv = dec.boundary_values(th)
    assert np.all(np.isfinite(bv))
    assert bv[0] == pytest.approx(bv[-1], abs=1e-9)


def test_green_decompose_flags_nothing_on_smooth_field(disk65):
    sol = flat_bubble(2.0, 1.0)
    fld = sol.sample(disk65)
    dec = green_decompose(fld, sol.weight, probes=7, seed=3)
    assert not dec.flagged
    assert dec.probe_rel_err < 1e-12
    assert abs(dec.source_mass / (8.0 * math.pi) - 1.0) < 0.25  # wide bubble
    assert dec.lap_regular_sup <= dec.quad_tol
