import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _bruteforce import brute_force_cost, rational_marginal, spanning_trees
from sphere_ot.measures import TestFunction, make_density
from sphere_ot.specfun import CostFunction, QuadraticCost
from sphere_ot.sphere import SphereGrid, build_grid
from sphere_ot.transport import (ConvergenceError, InfeasibleMarginals, cost_matrix, dual_objective,
                                 entropic_scale, export_plan, inf_convolution, solve_entropic,
                                 solve_entropic_ladder, solve_exact, sphere_inf_convolution)


@pytest.mark.parametrize("seed", range(100))
def test_exact_solver_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n1, n2 = rng.integers(1, 5, size=2)
    a, b = rational_marginal(rng, n1), rational_marginal(rng, n2)
    C = rng.integers(0, 20, size=(n1, n2))
    expected = brute_force_cost(C.tolist(), a, b)
    plan = solve_exact(np.array(a, dtype=float), np.array(b, dtype=float), C.astype(float))
    assert plan.primal_cost == pytest.approx(float(expected), abs=1e-12)


def test_brute_force_tree_count():
    # spanning trees of K_{n1,n2} number n1^(n2-1) n2^(n1-1) (Scoins)
    assert len(spanning_trees(3, 4)) == 3**3 * 4**2
    assert len(spanning_trees(4, 4)) == 4**3 * 4**3


# ---------------------------------------------------------------- cost matrix


def two_point_grid(angle):
    pts = np.array([[0.0, 0.0, 1.0], [math.sin(angle), 0.0, math.cos(angle)]])
    return SphereGrid(2, pts, np.array([0.5, 0.5]), "custom")


def test_cost_matrix_examples():
    C = cost_matrix(two_point_grid(math.pi / 2), CostFunction(2))
    assert C[0, 1] == pytest.approx(1.2928932, abs=5e-8)
    np.testing.assert_array_equal(np.diag(C), 0.0)
    Cq = cost_matrix(two_point_grid(1.0), QuadraticCost(3))
    assert Cq[0, 1] == pytest.approx(1.0, rel=1e-14)
    single = SphereGrid(2, np.array([[1.0, 0.0, 0.0]]), np.array([1.0]), "custom")
    np.testing.assert_array_equal(cost_matrix(single, CostFunction(2)), [[0.0]])


def test_cost_matrix_symmetric_and_finite():
    C = cost_matrix(build_grid(2, 200, "fibonacci"), CostFunction(2))
    np.testing.assert_array_equal(C, C.T)
    assert np.all(np.isfinite(C)) and C.min() == 0.0


def test_cost_matrix_rejects_antipodes():
    pts = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    with pytest.raises(ValueError):
        cost_matrix(SphereGrid(2, pts, np.array([0.5, 0.5]), "custom"), CostFunction(2))


# ---------------------------------------------------------------- exact solver


@pytest.fixture(scope="module")
def instance():
    grid = build_grid(2, 150, "fibonacci")
    C = cost_matrix(grid, CostFunction(2))
    f = make_density("zonal-exp", grid, kappa=2.0)
    return grid, C, f, solve_exact(grid.weights, f.masses, C)


def test_exact_plan_invariants(instance):
    grid, C, f, plan = instance
    rows, cols = plan.marginal_residuals(grid.weights, f.masses)
    assert rows <= 1e-10 and cols <= 1e-10
    assert np.all(plan.coupling >= 0)
    assert len(plan.support) <= 2 * grid.size - 1
    assert np.max(plan.phi[:, None] + plan.psi[None, :] - C) <= 1e-9
    # the gap is zero in exact arithmetic; allow rounding of the two sums
    assert -1e-12 <= plan.duality_gap <= 1e-9 * (1 + abs(plan.primal_cost))
    assert plan.primal_cost == pytest.approx(float(np.sum(plan.coupling * C)), rel=1e-15)


def test_exact_solver_is_deterministic(instance):
    grid, C, f, plan = instance
    again = solve_exact(grid.weights, f.masses, C)
    np.testing.assert_array_equal(again.coupling, plan.coupling)
    np.testing.assert_array_equal(again.phi, plan.phi)


def test_strong_duality_through_dual_objective(instance):
    grid, C, f, plan = instance
    assert dual_objective(-plan.psi, grid.weights, f.masses, C) == pytest.approx(plan.primal_cost, abs=1e-9)


def test_c_transform_closure(instance):
    grid, C, f, plan = instance
    psi = inf_convolution(-plan.phi, C.T)
    phi2 = inf_convolution(-psi, C)
    on_support = np.unique(plan.support[:, 0])
    np.testing.assert_allclose(phi2[on_support], plan.phi[on_support], atol=1e-9)


def test_identical_marginals_cost_nothing():
    grid = build_grid(2, 50, "fibonacci")
    C = cost_matrix(grid, CostFunction(2))
    plan = solve_exact(grid.weights, grid.weights, C)
    assert plan.primal_cost == 0.0
    np.testing.assert_allclose(plan.coupling, np.diag(grid.weights), atol=1e-15)


def test_two_point_unique_plan():
    C = np.array([[0.0, 0.7], [0.7, 0.0]])
    plan = solve_exact([1.0, 0.0], [0.0, 1.0], C)
    assert plan.primal_cost == pytest.approx(0.7, abs=1e-15)


def test_massless_nodes_get_feasible_duals():
    grid = build_grid(2, 80, "fibonacci")
    C = cost_matrix(grid, CostFunction(2))
    f = make_density("half-cap", grid)
    plan = solve_exact(f.masses, grid.weights, C)
    assert np.all(np.isfinite(plan.phi)) and np.all(np.isfinite(plan.psi))
    assert np.max(plan.phi[:, None] + plan.psi[None, :] - C) <= 1e-9
    assert -1e-12 <= plan.duality_gap <= 1e-9 * (1 + plan.primal_cost)


def test_infeasible_marginals():
    C = np.zeros((2, 2))
    with pytest.raises(InfeasibleMarginals):
        solve_exact([0.5, 0.6], [0.5, 0.5], C)
    with pytest.raises(InfeasibleMarginals):
        solve_exact([1.5, -0.5], [0.5, 0.5], C)
    with pytest.raises(ValueError):
        solve_exact([0.5, 0.5], [0.5, 0.5], np.zeros((3, 2)))


def _random_instance(seed, n=6):
    rng = np.random.default_rng(seed)
    a = rng.random(n)
    b = rng.random(n)
    return a / a.sum(), b / b.sum(), rng.random((n, n)) * 3, rng


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_weak_duality_for_random_potentials(seed):
    a, b, C, rng = _random_instance(seed)
    primal = solve_exact(a, b, C).primal_cost
    phi = rng.normal(scale=2.0, size=len(b))
    assert dual_objective(phi, a, b, C) <= primal + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_cost_monotonicity(seed):
    a, b, C, rng = _random_instance(seed)
    smaller = C * rng.random(C.shape)
    assert solve_exact(a, b, smaller).primal_cost <= solve_exact(a, b, C).primal_cost + 1e-12


def test_relabeling_invariance(instance):
    grid, C, f, plan = instance
    perm = np.random.default_rng(1).permutation(grid.size)
    pg = grid.permuted(perm)
    C2 = cost_matrix(pg, CostFunction(2))
    plan2 = solve_exact(pg.weights, f.masses[perm], C2)
    assert plan2.primal_cost == pytest.approx(plan.primal_cost, abs=1e-12)


# ---------------------------------------------------------------- inf-convolution


def test_inf_convolution_examples():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(inf_convolution([0.0, 0.0], C), [0.0, 0.0])
    np.testing.assert_array_equal(inf_convolution([0.0, 10.0], C), [0.0, 1.0])
    assert dual_objective([3.0, 3.0], [0.5, 0.5], [0.2, 0.8], C) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_inf_convolution_below_phi(seed):
    a, b, C, rng = _random_instance(seed)
    np.fill_diagonal(C, 0.0)
    phi = rng.normal(size=len(a))
    assert np.all(inf_convolution(phi, C) <= phi)


def test_sphere_inf_convolution_against_dense_grid():
    dense = build_grid(2, 20_000, "fibonacci")
    probes = build_grid(2, 12, "monte-carlo", seed=3).points
    c = CostFunction(2)
    g = TestFunction.zonal([0.2, 1.0, -0.6], [1.0, 1.0, 0.0])
    for eps in (0.3, -0.5):
        continuum = sphere_inf_convolution(g, probes, c, eps)
        d = 2 * np.arctan2(np.linalg.norm(probes[:, None] - dense.points[None], axis=2),
                           np.linalg.norm(probes[:, None] + dense.points[None], axis=2))
        discrete = np.min(eps * g(dense.points)[None, :] + c(d), axis=1)
        assert np.all(continuum <= discrete + 1e-12)
        np.testing.assert_allclose(continuum, discrete, atol=2e-3)
        assert np.all(continuum <= eps * g(probes) + 1e-15)


def test_sphere_inf_convolution_second_order():
    grid = build_grid(2, 50, "fibonacci")
    g = TestFunction.coordinate(2, 3)
    eps = 1e-3
    Q = sphere_inf_convolution(g, grid.points, CostFunction(2), eps)
    coeff = (Q - eps * g(grid.points)) / eps**2
    np.testing.assert_allclose(coeff, -g.grad_sq(grid.points) / 2, atol=2e-3)


# ---------------------------------------------------------------- entropic solver


def test_entropic_identical_marginals():
    grid = build_grid(2, 60, "fibonacci")
    C = cost_matrix(grid, CostFunction(2))
    costs = []
    for eps in (0.5, 0.1, 0.02):
        plan = solve_entropic(grid.weights, grid.weights, C, eps, max_iters=20_000)
        assert plan.primal_cost <= eps * math.log(grid.size)
        costs.append(plan.primal_cost)
    assert costs == sorted(costs, reverse=True)
    assert costs[-1] < 0.1 * costs[0]


def test_entropic_two_point():
    c = 1.2928932
    C = np.array([[0.0, c], [c, 0.0]])
    plan = solve_entropic([1.0, 0.0], [0.0, 1.0], C, 1e-3 * c)
    assert plan.primal_cost == pytest.approx(c, rel=1e-3)


def test_entropic_rounded_plan_is_feasible_upper_bound(instance):
    grid, C, f, exact = instance
    plan = solve_entropic(grid.weights, f.masses, C, 0.05)
    rows, cols = plan.marginal_residuals(grid.weights, f.masses)
    assert rows <= 1e-12 and cols <= 1e-12
    assert np.all(plan.coupling >= 0)
    assert plan.primal_cost >= exact.primal_cost - 1e-12
    assert np.max(plan.phi[:, None] + plan.psi[None, :] - C) <= 1e-9
    assert plan.duality_gap >= -1e-12


def test_entropic_ladder_approaches_exact(instance):
    grid, C, f, exact = instance
    scale = entropic_scale(C)
    plans = solve_entropic_ladder(grid.weights, f.masses, C, [m * scale for m in (0.1, 0.05, 0.01, 0.002)],
                                  tol=1e-6, max_iters=20_000)
    costs = [p.primal_cost for p in plans]
    assert costs == sorted(costs, reverse=True)
    assert abs(costs[-1] - exact.primal_cost) <= 0.01 * exact.primal_cost


def test_max_cost_ladder_still_decreases(instance):
    grid, C, f, exact = instance
    plans = solve_entropic_ladder(grid.weights, f.masses, C, [m * C.max() for m in (0.1, 0.05, 0.01)],
                                  tol=1e-6, max_iters=20_000)
    costs = [p.primal_cost for p in plans]
    assert costs == sorted(costs, reverse=True)
    assert costs[-1] >= exact.primal_cost


def test_entropic_non_convergence_reports_diagnostics(instance):
    grid, C, f, _ = instance
    with pytest.raises(ConvergenceError) as info:
        solve_entropic(grid.weights, f.masses, C, 1e-3, max_iters=10, tol=1e-14)
    assert info.value.diagnostics["iterations"] == 10
    assert info.value.diagnostics["marginal_error"] > 1e-14


def test_entropic_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        solve_entropic([1.0], [1.0], np.zeros((1, 1)), 0.0)


# ---------------------------------------------------------------- export


def test_export_plan(tmp_path):
    C = np.array([[0.0, 0.7], [0.7, 0.0]])
    plan = solve_exact([1.0, 0.0], [0.0, 1.0], C)
    path = tmp_path / "plan.txt"
    export_plan(plan, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "0,1,1"
    assert lines[-1].startswith("# cost=0.69999999999999996 gap=")
