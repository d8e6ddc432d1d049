import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curlforce import HamiltonianSpec, metric
from curlforce.errors import InsufficientSamples, NoInvertibleSolution, NotTwoDimensional, StencilOutsideDomain
from curlforce.families import QuadraticFamily, build_quadratic
from curlforce.verify import (
    CheckResult,
    SampleGrid,
    VerificationReport,
    affine_span,
    aggregate_case,
    check_affine_span,
    check_g_properties,
    check_pseudo_metric,
    check_regular,
    check_velocity_independence,
    classify_T,
    force_jacobian,
    fundamental_residuals,
    g_property_residuals,
    pseudo_conservative_residual,
    run_all,
    solve_pseudo_metric,
    tag_T,
)

from conftest import BOX, example_spec
from oracles import VELOCITY_DEPENDENT

COSH = "cosh(p1)*sqrt(x1^2 + 1)"


def spec(text, n, box=BOX):
    return HamiltonianSpec.from_expr(text, n, [[box] * n])


# velocity independence ---------------------------------------------------------------------


def test_standard_residuals_vanish():
    H = spec("0.5*p1^2 + 0.5*p2^2 + x1^2*x2 + sin(x2)", 2)
    rep = check_velocity_independence(H, SampleGrid.regular(H, per_axis=4))
    for name in ("fund1", "fund2", "force_spread"):
        assert rep[name].max_residual <= 1e-12


def test_cosh_residuals():
    H = spec(COSH, 1)
    rep = check_velocity_independence(H, SampleGrid.regular(H, per_axis=9, shrink=0.0, p_range=(-2, 2)))
    assert rep["fund2"].max_residual <= 1e-10
    assert rep.passed


def test_velocity_dependent_fixture_fails():
    H = spec(VELOCITY_DEPENDENT, 1)
    grid = SampleGrid(np.linspace(-1.5, 1.5, 5)[:, None], np.array([[-1.0], [0.0], [1.0]]))
    rep = check_velocity_independence(H, grid)
    assert rep["force_spread"].max_residual > 0.1
    assert rep["fund2"].max_residual > 0.1
    assert not rep.passed


def test_one_dimensional_fund1_is_trivial():
    f1, _ = fundamental_residuals(spec(VELOCITY_DEPENDENT, 1), [0.3], [0.7])
    assert f1 == 0.0


def test_skipped_points_are_counted():
    H = spec("0.5*p1^2 + log(x1)", 1, (-1.0, 1.0))
    grid = SampleGrid(np.array([[-0.5], [0.5]]), np.array([[0.0]]))
    rep = check_velocity_independence(H, grid)
    assert rep["fund1"].skipped == 1 and rep["fund1"].evaluated == 1


# g properties -----------------------------------------------------------------------------


def test_quadratic_g_properties_exact():
    H = build_quadratic(QuadraticFamily([[2.0, 0.5], [0.5, 1.0]], "x1^2 + x1*x2 + 0.25*x2^4", [[BOX, BOX]]))
    rep = check_g_properties(H, SampleGrid.regular(H, per_axis=3))
    for name, res in rep.checks.items():
        assert res.evaluated > 0 and res.max_residual <= 1e-11, name


@pytest.mark.parametrize("name", ["separable", "seesaw_a", "seesaw_b", "cosh_shm"])
def test_example_g_properties(name):
    H = example_spec(name)
    rep = check_g_properties(H, SampleGrid.regular(H, per_axis=3))
    assert rep.passed, rep.summary()
    assert set(rep.checks) == {"g.P1", "g.P2", "g.P3a", "g.P3b", "g.P4", "g.P5"}


def test_seesaw_b_p5():
    H = example_spec("seesaw_b")
    res = g_property_residuals(H, [0.7, -0.3], [0.4, 0.2])
    assert res["P5"] <= 1e-9
    T = force_jacobian(lambda x: np.array([0.0, -2 * x[0]]), [0.7, -0.3])
    assert np.allclose(T, [[0.0, -2.0], [0.0, 0.0]], atol=1e-9)


def test_velocity_dependent_violates_g_properties():
    H = spec(VELOCITY_DEPENDENT, 1)
    res = g_property_residuals(H, [0.8], [1.0])
    assert max(res["P2"], res["P3a"]) > 1e-3


# regularity -------------------------------------------------------------------------------


def test_regular_standard():
    H = spec("0.5*p1^2 + 0.5*p2^2", 2)
    rep = check_regular(H, SampleGrid.regular(H, per_axis=3))
    assert rep.passed
    assert rep["regularity.singularity"].detail["min_abs_det"] == pytest.approx(1.0)


def test_regular_cosh_det_is_H():
    H = spec(COSH, 1)
    grid = SampleGrid.regular(H, per_axis=5)
    rep = check_regular(H, grid)
    assert rep.passed
    assert rep["regularity.singularity"].detail["min_abs_det"] >= 1.0
    assert rep["regularity.round_trip"].detail["success_rate"] == 1.0


def test_regular_fails_for_cubic():
    H = spec("0.5*p1^3 + 0.5*x1^2", 1)
    rep = check_regular(H, SampleGrid.regular(H, per_axis=5))
    assert not rep.passed
    assert rep["regularity.singularity"].detail["min_abs_det"] == 0.0


# affine span ------------------------------------------------------------------------------


def _span(H, per_axis=3):
    grid = SampleGrid.regular(H, per_axis=per_axis, p_range=(-1.5, 1.5))
    return affine_span(H, grid.x_points[:5], grid.p_points)


def test_affine_span_quadratic_is_a_point():
    H = build_quadratic(QuadraticFamily([[2.0, 0.5], [0.5, 1.0]], "x1^2", [[BOX, BOX]]))
    res = _span(H)
    assert res.dimensions == [0] * 5 and res.constant


def test_affine_span_cosh_is_a_line():
    res = _span(spec(COSH, 1), per_axis=5)
    assert res.dimensions == [1] * 5 and res.constant and res.dimension_stable


def test_affine_span_seesaw_a():
    res = _span(example_spec("seesaw_a"))
    assert all(d < 3 for d in res.dimensions)
    assert len(set(res.dimensions)) == 1 and res.constant


def test_affine_span_needs_samples():
    with pytest.raises(InsufficientSamples):
        affine_span(example_spec("separable"), [[0.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]])


def test_check_affine_span_reports():
    H = example_spec("separable")
    rep = check_affine_span(H, SampleGrid.regular(H, per_axis=3))
    assert rep.passed and rep["affine_span"].evaluated == 5


# classification ---------------------------------------------------------------------------


def test_tags():
    assert tag_T(np.diag([-1.0, -3.0])) == "distinct_real"
    assert tag_T(np.array([[-1.0, 0.0], [-2.0, -1.0]])) == "single_eigenvalue_nonisotropic"
    assert tag_T(-np.eye(2)) == "isotropic"
    assert tag_T(np.array([[0.0, 1.0], [-1.0, 0.0]])) == "complex_pair"
    assert aggregate_case(["isotropic", "distinct_real", "single_eigenvalue_nonisotropic"]) == 2
    assert aggregate_case(["isotropic"]) == 4


@pytest.mark.parametrize("name, case", [("separable", 2), ("seesaw_a", 3), ("seesaw_b", 3)])
def test_classify_examples(name, case):
    H = example_spec(name)
    assert classify_T(H, SampleGrid.regular(H, per_axis=5).x_points).case == case


def test_classify_callables():
    xs = SampleGrid.regular(example_spec("separable"), per_axis=4).x_points
    assert classify_T(lambda x: -np.asarray(x), xs).case == 4
    assert classify_T(lambda x: np.array([-x[0] - 2 * x[1], 2 * x[0]]), xs).case == 1


def test_classify_errors():
    with pytest.raises(NotTwoDimensional):
        classify_T(spec(COSH, 1), [[0.0]])
    with pytest.raises(StencilOutsideDomain):
        classify_T(example_spec("separable"), [[2.0 - 1e-7, 0.0]])


def test_case_one_only_for_quadratic():
    # M = diag(1, -1), U = x^2/2 + 2xy gives complex eigenvalues
    H = build_quadratic(QuadraticFamily(np.diag([1.0, -1.0]), "0.5*x1^2 + 2*x1*x2", [[BOX, BOX]]))
    grid = SampleGrid.regular(H, per_axis=3)
    cls = classify_T(H, grid.x_points)
    assert cls.case == 1
    pm = solve_pseudo_metric(cls.T_samples)
    F = lambda x: np.array([-x[0] - 2 * x[1], 2 * x[0]])
    assert pseudo_conservative_residual(F, pm, grid.x_points.min(axis=0), grid.x_points) <= 1e-9


# pseudo-metric ----------------------------------------------------------------------------


def test_pseudo_metric_conservative():
    pm = solve_pseudo_metric([np.array([[-2.0, 0.3], [0.3, -1.0]]), np.array([[-1.0, 0.0], [0.0, 4.0]])])
    assert np.allclose(pm.c, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("F", [lambda x: np.array([0.0, -2 * x[0]]),
                               lambda x: np.array([-x[0], -x[1] - 2 * x[0]])])
def test_pseudo_metric_seesaw_forces(F):
    xs = SampleGrid.regular(example_spec("separable"), per_axis=3).x_points
    pm = solve_pseudo_metric([force_jacobian(F, x) for x in xs])
    assert abs(pm.c[1, 1]) <= 1e-9
    assert abs(np.linalg.det(pm.M)) > 1e-6
    assert pseudo_conservative_residual(F, pm, xs.min(axis=0), xs) <= 1e-9


def test_pseudo_metric_rejects_curl():
    # three independent constraints leave only c = 0
    Ts = [np.array([[0.0, -1.0], [1.0, 0.0]]), np.array([[1.0, 2.0], [0.0, 3.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])]
    with pytest.raises(NoInvertibleSolution):
        solve_pseudo_metric(Ts)


@pytest.mark.parametrize("name", ["separable", "seesaw_a", "seesaw_b"])
def test_check_pseudo_metric_examples(name):
    H = example_spec(name)
    rep, pm = check_pseudo_metric(H, SampleGrid.regular(H, per_axis=5))
    assert rep["pseudo_metric"].max_residual <= 1e-7
    assert abs(np.linalg.det(pm.M)) > 1e-6
    assert np.max(np.abs(pm.c)) == pytest.approx(1.0)


# reports ----------------------------------------------------------------------------------


@given(st.floats(0, 1e3, allow_nan=False), st.floats(0, 1e3), st.integers(0, 3))
def test_pass_iff_residual_within_tolerance(residual, tol, evaluated):
    res = CheckResult("c", residual, tol, evaluated=evaluated)
    assert res.passed == (evaluated > 0 and residual <= tol)


def test_report_merge_and_dict():
    a = VerificationReport()
    a.add(CheckResult("one", 0.0, 1.0, evaluated=1))
    b = VerificationReport()
    b.add(CheckResult("two", 2.0, 1.0, evaluated=1))
    merged = a.merge(b)
    assert not merged.passed and merged.tolerances == {"one": 1.0, "two": 1.0}
    d = merged.to_dict()
    assert d["pass"] is False
    assert [c["name"] for c in d["checks"]] == ["one", "two"]
    assert d["checks"][1]["pass"] is False and d["checks"][0]["residual"] == 0.0


def test_metric_g22_seesaw_example():
    H = example_spec("seesaw_a")
    assert metric(H, ([0.3, 0.4], [1.0, -0.5])).lower[1, 1] == pytest.approx(0.0, abs=1e-12)


def test_run_all_examples_pass():
    H = example_spec("seesaw_b")
    rep = run_all(H, SampleGrid.regular(H, per_axis=3))
    assert rep.passed, rep.summary()
