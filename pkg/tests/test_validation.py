import json

import numpy as np
import pytest

from heattube.config import RunConfig
from heattube.conventions import Conventions, load_conventions
from heattube.geometry import ShapeCoefficients, build_mesh
from heattube.validation import (
    GradientCheckRow,
    LocalCheckResult,
    ManufacturedSolution,
    convergence_study,
    determine_conventions,
    family_shape,
    fd_gradient_check,
    gradient_sign_from_rows,
    heat_residual,
    local_shape_derivative_check,
    reference_problem,
    write_convention_report,
)

SMALL = RunConfig(n_time=12, n_space=16, n_fourier=2, n_legendre=1)


@pytest.mark.parametrize("t,x,y", [(0.3, 0.4, 0.1), (0.8, -0.2, 0.5), (1.0, 0.0, -0.7)])
def test_manufactured_solution_solves_heat_equation(t, x, y):
    sol = ManufacturedSolution()
    v = sol.evaluate(t, x, y)[0]
    assert abs(v) > 1e-4
    assert heat_residual(sol, t, x, y) < 1e-9


def test_closed_form_matches_adaptive_quadrature():
    sol = ManufacturedSolution()
    x = np.array([0.3, -0.25, 0.6])
    y = np.array([0.0, 0.35, -0.5])
    for t in (0.05, 0.5, 1.0):
        closed = sol.evaluate(t, x, y)
        quad = sol.evaluate_adaptive(t, x, y, tol=1e-12)
        for c, q in zip(closed, quad):
            assert np.allclose(c, q, rtol=1e-8, atol=1e-12)


def test_manufactured_solution_vanishes_initially_and_scales():
    sol = ManufacturedSolution()
    assert np.all(np.array(sol.evaluate(0.0, 0.4, 0.2)) == 0.0)
    twice = ManufacturedSolution(amplitude=2.0)
    assert np.allclose(twice.evaluate(0.7, 0.4, 0.2), 2 * np.array(sol.evaluate(0.7, 0.4, 0.2)), rtol=1e-14)
    zero = ManufacturedSolution(amplitude=0.0)
    m = build_mesh(family_shape("static"), 1.0, 8, 12)
    d, tr = zero.traces(m)
    assert np.all(d == 0) and np.all(tr == 0)


def test_clearance_and_placement():
    sol = ManufacturedSolution()
    m = build_mesh(family_shape("moving"), 1.0, 10, 16)
    assert sol.clearance(m) > 0.1
    with pytest.raises(ValueError):
        ManufacturedSolution(radius=0.5).traces(build_mesh(ShapeCoefficients.circle(0.3, 0, 1), 1.0, 4, 8))
    with pytest.raises(ValueError):
        ManufacturedSolution(radius=-1.0)


def test_family_shapes():
    with pytest.raises(ValueError):
        family_shape("spiral")
    m = build_mesh(family_shape("moving"), 1.0, 10, 16)
    assert np.ptp(m.radius[:, 0]) > 0.05


def test_convergence_study_needs_three_levels():
    with pytest.raises(ValueError):
        convergence_study("static", ((10, 10), (20, 20)))


def test_reference_problem_layout():
    coeffs, f, g = reference_problem(SMALL)
    assert f.shape == g.shape == (13, 16)
    assert coeffs.coeffs.shape == (2, 4)
    assert np.all(np.isfinite(g)) and np.abs(g).max() > 0


def test_gradient_check_rows():
    assert GradientCheckRow(0, 1e-4, 0.0, 0.0).rel_error == 0.0
    assert GradientCheckRow(0, 1e-4, 1.0, 1.1).rel_error == pytest.approx(0.1 / 1.1)
    zero = np.zeros(SMALL.n_parameters)
    rows = fd_gradient_check(SMALL, [zero], eps_schedule=(1e-4,))
    assert rows[0].analytic == 0.0 and rows[0].rel_error == 0.0
    with pytest.raises(ValueError):
        fd_gradient_check(SMALL, [np.zeros(3)])


def test_gradient_sign_vote():
    agree = [GradientCheckRow(0, 1e-4, 1.0, 0.9), GradientCheckRow(1, 1e-4, -2.0, -2.1)]
    flip = [GradientCheckRow(0, 1e-4, -1.0, 0.9), GradientCheckRow(1, 1e-4, 2.0, -2.1)]
    assert gradient_sign_from_rows(agree) == 1
    assert gradient_sign_from_rows(flip) == -1
    with pytest.raises(ValueError):
        gradient_sign_from_rows([GradientCheckRow(0, 1e-4, 0.0, 0.0)])


def test_analytic_gradient_follows_finite_differences_in_sign():
    rng = np.random.default_rng(2)
    rows = fd_gradient_check(SMALL, [rng.standard_normal(SMALL.n_parameters) for _ in range(3)], eps_schedule=(1e-4,))
    assert gradient_sign_from_rows(rows) == 1
    assert all(r.analytic * r.finite_difference > 0 for r in rows)


def test_local_check_zero_direction():
    res = local_shape_derivative_check(SMALL, np.zeros(SMALL.n_parameters))
    assert res.linearized == 0.0 and res.gradient == 0.0 and res.discrepancy == 0.0
    assert LocalCheckResult(1.0, 0.5).discrepancy == pytest.approx(0.5)


@pytest.mark.slow
def test_shipped_conventions_are_reproduced(tmp_path):
    conv, summary = determine_conventions()
    assert conv == load_conventions()
    assert summary["curvature_factor"]["0.5"]["order"] >= 1.4
    assert summary["jump_sign"]["1"] < summary["jump_sign"]["-1"]
    jpath, tpath = write_convention_report(conv, summary, tmp_path)
    assert Conventions(**json.loads(jpath.read_text())) == conv
    assert "curvature_factor = 0.5" in tpath.read_text()
