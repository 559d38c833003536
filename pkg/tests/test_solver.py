import numpy as np
import pytest

from modules.dsd import CompositionSpec, compose_region
from modules.errors import InputError
from modules.grid import InhomogeneityField, PixelGrid, shape_integrals
from modules.solver import (
    SolverConfig,
    SparseCscProblem,
    _is_stationary,
    brute_force_cardinal_sc,
    extract_support,
    objective,
    project_l1,
    separable_objective,
    solve,
    solve_constrained,
    solve_disjoint_closed_form,
    solve_regularized,
    subgradient,
    superposition,
)
from tests.builders import binary_field, box, random_field, random_rect


@pytest.fixture
def two_box_problem(grid10):
    sigma = box(grid10, 0, 5, 0, 5)
    shapes = [sigma, box(grid10, 5, 10, 5, 10)]
    return SparseCscProblem(binary_field(sigma), shapes)


def test_objective_at_zero_is_zero(rng, grid10):
    problem = SparseCscProblem(random_field(grid10, rng), [random_rect(grid10, rng) for _ in range(4)])
    assert objective(problem, np.zeros(4)) == 0.0


def test_pixel_and_cell_objectives_agree(rng, grid10):
    shapes = [random_rect(grid10, rng, 2, 7) for _ in range(5)]
    problem = SparseCscProblem(random_field(grid10, rng), shapes)
    for _ in range(50):
        alpha = rng.normal(size=5) * 2
        cell = separable_objective(problem.p, problem.q, problem.B @ alpha)
        assert objective(problem, alpha) == pytest.approx(cell, abs=1e-9)


def test_subgradient_matches_finite_differences(rng, grid10):
    problem = SparseCscProblem(random_field(grid10, rng), [random_rect(grid10, rng) for _ in range(3)])
    alpha = rng.normal(size=3)
    h = 1e-7
    g = subgradient(problem, alpha)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (objective(problem, alpha + e) - objective(problem, alpha - e)) / (2 * h)
        assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-6)


def test_project_l1():
    v = np.array([3.0, -1.0, 0.5])
    out = project_l1(v, 2.0)
    assert np.abs(out).sum() == pytest.approx(2.0)
    np.testing.assert_allclose(out, [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(project_l1(v, 10.0), v)
    np.testing.assert_array_equal(project_l1(v, 0.0), np.zeros(3))
    with pytest.raises(InputError):
        project_l1(v, -1.0)


def test_zero_budget_returns_zero(two_box_problem):
    solution = solve_constrained(two_box_problem.with_budget(0.0))
    np.testing.assert_array_equal(solution.alpha, [0.0, 0.0])
    assert solution.objective == 0.0
    assert solution.converged
    assert extract_support(two_box_problem, solution.alpha).is_empty


def test_single_matching_shape_is_recovered(two_box_problem):
    solution = solve_constrained(two_box_problem.with_budget(1.0))
    np.testing.assert_allclose(solution.alpha, [1.0, 0.0], atol=1e-6)
    assert solution.support == ((0,), ())
    assert solution.objective == pytest.approx(-25.0)
    assert extract_support(two_box_problem, solution.alpha) == two_box_problem.dictionary[0]


def test_regularized_form(two_box_problem):
    solution = solve_regularized(two_box_problem.with_penalty(0.5))
    np.testing.assert_allclose(solution.alpha, [1.0, 0.0], atol=1e-6)
    assert solution.penalized_objective == pytest.approx(-25.0 + 0.5)
    # a penalty above every per-pixel gain keeps alpha at zero
    heavy = solve(two_box_problem.with_penalty(30.0))
    np.testing.assert_allclose(heavy.alpha, [0.0, 0.0], atol=1e-6)


def test_regularized_solve_reports_convergence(two_box_problem):
    solution = solve_regularized(two_box_problem.with_penalty(0.5))
    assert solution.polished
    assert solution.converged
    assert solution.iterations_used <= SolverConfig().max_iters
    assert solve_regularized(two_box_problem.with_penalty(30.0)).converged


def test_stationarity_check(two_box_problem):
    lam = two_box_problem.with_penalty(0.5)
    assert _is_stationary(lam, np.array([1.0, 0.0]), None, 0.5)
    # inside [0, 1] the first cell still pays off faster than the penalty
    assert not _is_stationary(lam, np.array([0.5, 0.0]), None, 0.5)
    assert not _is_stationary(lam, np.array([1.0, -0.2]), None, 0.5)
    # on the budget boundary the only descent directions leave the ball
    assert _is_stationary(two_box_problem, np.array([0.5, 0.0]), 0.5, 0.0)
    assert not _is_stationary(two_box_problem, np.array([0.5, 0.0]), 1.0, 0.0)


def test_problem_validation(grid10):
    field = binary_field(box(grid10, 0, 2, 0, 2))
    with pytest.raises(InputError):
        SparseCscProblem(field, [])
    with pytest.raises(InputError):
        SparseCscProblem(field, [box(grid10, 0, 2, 0, 2)], budget=1.0, penalty=1.0)
    with pytest.raises(InputError):
        SparseCscProblem(field, [box(PixelGrid(3, 3), 0, 2, 0, 2)])
    with pytest.raises(InputError):
        solve_constrained(SparseCscProblem(field, [box(grid10, 0, 2, 0, 2)]))
    with pytest.raises(InputError):
        SolverConfig(max_iters=0)


def test_solution_report_uses_labels(two_box_problem):
    solution = solve(two_box_problem.with_budget(1.0))
    report = solution.as_dict(["left", "right"])
    assert report["support"] == {"positive": ["left"], "negative": []}
    assert report["l1_norm"] == pytest.approx(1.0)


def test_disjoint_closed_form():
    from modules.grid import ShapeIntegrals
    integrals = ShapeIntegrals(P=[1.0, 0.0, 5.0, 2.0], Q=[4.0, 1.0, 1.0, 2.0])
    # net = (-3, -1, 4, 0)
    assert solve_disjoint_closed_form(integrals, 1).indices == (0,)
    assert solve_disjoint_closed_form(integrals, 2).indices == (0, 1)
    selection = solve_disjoint_closed_form(integrals, 3)
    assert selection.indices == (0, 1)
    assert not selection.unique  # the zero-net shape could be added at no cost


def test_brute_force_finds_the_composition(grid10):
    shapes = [box(grid10, 0, 6, 0, 6), box(grid10, 2, 4, 2, 4), box(grid10, 7, 10, 7, 10)]
    spec = CompositionSpec((0,), (1,))
    sigma = compose_region(shapes, spec)
    problem = SparseCscProblem(binary_field(sigma), shapes)
    result = brute_force_cardinal_sc(problem, 2)
    assert result.spec == spec
    assert result.value == pytest.approx(-32.0)
    assert result.ties == 1
    single = brute_force_cardinal_sc(problem, 1)
    assert single.spec == CompositionSpec((0,))
    assert single.value == pytest.approx(-32.0 + 4.0)


def test_brute_force_limits(two_box_problem):
    with pytest.raises(InputError):
        brute_force_cardinal_sc(two_box_problem, 3)


def test_superposition_and_support(grid10):
    a, b = box(grid10, 0, 4, 0, 4), box(grid10, 2, 6, 2, 6)
    problem = SparseCscProblem(binary_field(a), [a, b])
    level = superposition(problem, [1.0, -1.0])
    assert level[grid10.index(0, 0)] == 1.0
    assert level[grid10.index(3, 3)] == 0.0
    assert level[grid10.index(5, 5)] == -1.0
    assert extract_support(problem, [1.0, -1.0]) == a.difference(b)
    with pytest.raises(InputError):
        extract_support(problem, [1.0, 0.0], level=1.0)


def test_scaling_the_field_keeps_the_minimizer(grid10):
    sigma = box(grid10, 1, 5, 1, 5)
    shapes = [sigma, box(grid10, 3, 8, 3, 8)]
    field = binary_field(sigma)
    base = solve(SparseCscProblem(field, shapes, budget=1.0))
    scaled = solve(SparseCscProblem(field.scaled(3.0), shapes, budget=1.0))
    np.testing.assert_allclose(base.alpha, scaled.alpha, atol=1e-6)
    assert scaled.objective == pytest.approx(3.0 * base.objective)


def test_shape_integrals_of_the_dictionary(two_box_problem):
    integrals = shape_integrals(two_box_problem.field, two_box_problem.dictionary)
    np.testing.assert_allclose(integrals.net, [-25.0, 25.0])


def test_disjoint_field_with_ties_is_deterministic():
    grid = PixelGrid(6, 1)
    field = InhomogeneityField(grid, np.zeros(6), np.ones(6))
    shapes = [box(grid, 0, 2, 0, 1), box(grid, 2, 4, 0, 1), box(grid, 4, 6, 0, 1)]
    first = solve(SparseCscProblem(field, shapes, budget=3.0))
    second = solve(SparseCscProblem(field, shapes, budget=3.0))
    np.testing.assert_array_equal(first.alpha, second.alpha)
    assert first.objective == pytest.approx(-6.0)
