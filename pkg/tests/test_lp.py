"""Discretized-LP solver: construction, certificates, convergence."""

import numpy as np
import pytest

from lipnoise.lp import (
    DEFAULT_SCHEDULE,
    LpStatus,
    build_primal,
    check_dual_feasibility,
    convergence_study,
    duality_gap_report,
    solve,
)


def grid_laplace(inst):
    """Laplace density sampled on the grid and renormalized to unit grid mass.

    Feasibility of this vector is checkable by hand: the one-step ratio is
    e^{-eps nu} on each half-line, and |1 - r| / (1 + r) = tanh(eps nu / 2)
    never exceeds eps nu / 2, so the midpoint-averaged Lipschitz rows hold
    with slack.  It doubles as a primal upper bound on the optimum.
    """
    g = 0.5 * inst.eps * np.exp(-inst.eps * np.abs(inst.v))
    return g / (inst.nu * g.sum())


def pair_residuals(inst, g):
    # positive entries mean a violated |g_{i+1}-g_i|/nu <= eps (g_i+g_{i+1})/2
    diff = np.abs(np.diff(g)) / inst.nu
    bound = inst.eps * (g[:-1] + g[1:]) / 2.0
    return diff - bound


# ---------------------------------------------------------------------------
# construction


def test_build_shapes():
    inst = build_primal(1.0, 5.0, 0.1)
    assert inst.N == 101
    assert inst.pairs == 100
    assert inst.v[0] == -5.0
    assert inst.v[-1] == 5.0
    assert np.allclose(np.diff(inst.v), 0.1)
    assert np.allclose(inst.c, 0.1 * inst.v**2)


def test_build_rejects_non_integral_grid():
    with pytest.raises(ValueError):
        build_primal(1.0, 5.0, 0.3)


@pytest.mark.parametrize(
    "eps,M,nu",
    [(0.0, 5.0, 0.1), (-1.0, 5.0, 0.1), (1.0, 0.0, 0.1), (1.0, 5.0, -0.1),
     (float("nan"), 5.0, 0.1), (1.0, float("inf"), 0.1)],
)
def test_build_rejects_bad_parameters(eps, M, nu):
    with pytest.raises(ValueError):
        build_primal(eps, M, nu)


def test_grid_laplace_is_feasible():
    inst = build_primal(1.0, 5.0, 0.1)
    g = grid_laplace(inst)
    assert np.all(g >= 0)
    assert inst.nu * g.sum() == pytest.approx(1.0, abs=1e-12)
    assert pair_residuals(inst, g).max() <= 1e-9


def test_coarse_grid_is_degenerate_but_well_posed():
    inst = build_primal(1.0, 4.0, 2.0)
    assert inst.degenerate
    sol = solve(inst)
    assert sol.status is LpStatus.OPTIMAL
    # mass may collapse toward the single zero-cost point
    assert sol.objective == pytest.approx(0.0, abs=1e-10)


def test_fine_grid_is_not_degenerate():
    assert not build_primal(1.0, 5.0, 0.1).degenerate


# ---------------------------------------------------------------------------
# solve: frozen optima and certificates


def test_canonical_instance_optimum():
    sol = solve(build_primal(1.0, 8.0, 0.05))
    assert sol.status is LpStatus.OPTIMAL
    assert 1.96 <= sol.objective <= 2.04
    assert sol.objective == pytest.approx(1.9724715772556138, rel=1e-12)
    assert sol.gap <= 1e-7
    assert sol.method == "ipm+crossover"


def test_scaled_instance_optimum():
    sol = solve(build_primal(2.0, 4.0, 0.025))
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.5, rel=0.02)


def test_tiny_instance_matches_hand_solution():
    """M = nu gives a 3-variable LP solvable in closed form.

    Mass concentrates at v = 0 as fast as the Lipschitz rows allow:
    g_edge = rho g_mid with rho = (1 - eps nu/2)/(1 + eps nu/2) = 9/11,
    and nu (1 + 2 rho) g_mid = 1 pins the level.  The cost is then
    2 nu M^2 g_edge = 0.144 / 5.8.
    """
    inst = build_primal(1.0, 0.2, 0.2)
    assert inst.N == 3
    sol = solve(inst)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.144 / 5.8, rel=1e-12)
    g_mid = 1.0 / (0.2 * (1.0 + 2.0 * 9.0 / 11.0))
    assert sol.g[1] == pytest.approx(g_mid, rel=1e-10)
    assert sol.g[0] == pytest.approx(9.0 / 11.0 * g_mid, rel=1e-10)


@pytest.mark.parametrize("M,nu", [(5.0, 0.1), (8.0, 0.05)])
def test_solution_self_consistency(M, nu):
    inst = build_primal(1.0, M, nu)
    sol = solve(inst)
    assert sol.status is LpStatus.OPTIMAL
    budget = 1e-7 * (1.0 + abs(sol.objective))
    assert sol.gap <= budget
    for value in sol.residuals.values():
        assert value <= budget
    # recompute feasibility from scratch rather than trusting the report
    assert np.all(sol.g >= -1e-12)
    assert inst.nu * sol.g.sum() == pytest.approx(1.0, abs=budget)
    assert pair_residuals(inst, sol.g).max() <= budget


def test_optimum_below_grid_laplace_cost():
    inst = build_primal(1.0, 8.0, 0.05)
    sol = solve(inst)
    assert sol.objective <= float(inst.c @ grid_laplace(inst)) + 1e-12


def test_optimal_profile_is_symmetric():
    sol = solve(build_primal(1.0, 8.0, 0.05))
    assert np.max(np.abs(sol.g - sol.g[::-1])) <= 1e-12


def test_optimal_profile_is_log_linear_in_the_interior():
    inst = build_primal(1.0, 8.0, 0.05)
    sol = solve(inst)
    mid = inst.N // 2
    lo, hi = mid + mid // 10, inst.N - mid // 10
    slopes = np.diff(np.log(sol.g[lo:hi])) / inst.nu
    assert np.max(np.abs(slopes + inst.eps)) <= 0.01 * inst.eps


def test_complementary_slackness():
    sol = solve(build_primal(1.0, 8.0, 0.05))
    assert float(np.minimum(sol.kappa, sol.mu).max()) <= 1e-7


def test_weak_duality():
    sol = solve(build_primal(1.0, 6.0, 0.1))
    assert sol.dual_objective <= sol.objective + 1e-9


def test_interior_point_alone_meets_tolerance():
    inst = build_primal(1.0, 6.0, 0.1)
    sol = solve(inst, crossover=False)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.method == "ipm"
    assert sol.rel_gap <= 1e-7
    # crossover tightens the same instance to roundoff
    assert solve(inst).gap <= 1e-12


def test_exact_scaling_law():
    # v -> v/2 maps (eps, M, nu) onto (2 eps, M/2, nu/2); cost scales by 1/4
    coarse = solve(build_primal(1.0, 6.0, 0.1))
    fine = solve(build_primal(2.0, 3.0, 0.05))
    assert fine.objective == pytest.approx(coarse.objective / 4.0, rel=1e-10)


def test_dense_matrices_certify_small_solution():
    inst = build_primal(1.0, 1.0, 0.5)
    A, b, c = inst.dense_matrices()
    assert A.shape == (2 * inst.pairs + 1, 3 * inst.N - 2)
    sol = solve(inst)
    a_lo, a_hi = inst.row_coefficients()
    slo = a_lo * sol.g[:-1] + a_hi * sol.g[1:]
    sup = a_hi * sol.g[:-1] + a_lo * sol.g[1:]
    x = np.concatenate([sol.g, slo, sup])
    assert np.max(np.abs(A @ x - b)) <= 1e-9
    assert float(c @ x) == pytest.approx(sol.objective, rel=1e-12)


# ---------------------------------------------------------------------------
# dual certificates


def test_dual_certificate_is_clean_at_the_optimum():
    inst = build_primal(1.0, 8.0, 0.05)
    sol = solve(inst)
    assert check_dual_feasibility(inst, sol.lam, sol.kappa, sol.mu) <= 1e-8


def test_perturbed_dual_is_flagged():
    inst = build_primal(1.0, 8.0, 0.05)
    sol = solve(inst)
    viol = check_dual_feasibility(inst, sol.lam + 0.1, sol.kappa, sol.mu)
    # every stationarity row gains nu * 0.1, and some row was tight
    assert viol >= 0.1 * inst.nu * 0.99


def test_negative_multipliers_are_flagged():
    inst = build_primal(1.0, 1.0, 0.5)
    bad = np.full(inst.pairs, -1.0)
    assert check_dual_feasibility(inst, 0.0, bad, np.zeros(inst.pairs)) >= 1.0


def test_dual_check_rejects_wrong_shape():
    inst = build_primal(1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        check_dual_feasibility(inst, 0.0, np.zeros(3), np.zeros(inst.pairs))


def test_gap_report_contents():
    inst = build_primal(1.0, 8.0, 0.05)
    sol = solve(inst)
    rep = duality_gap_report(inst, sol)
    assert rep["status"] == "Optimal"
    assert rep["gap"] <= 1e-7
    assert rep["certified_lower_bound"] == rep["dual_objective"]
    assert rep["certified_lower_bound"] <= rep["primal_objective"] + 1e-9
    assert rep["max_min_kappa_mu"] <= 1e-7
    assert rep["dual_feasibility_violation"] <= 1e-8
    assert rep["method"] == "ipm+crossover"


# ---------------------------------------------------------------------------
# convergence study


def test_default_study_errors_decrease():
    rows = convergence_study(1.0)
    assert len(rows) == len(DEFAULT_SCHEDULE)
    assert all(row.status == "Optimal" for row in rows)
    errs = [row.abs_error for row in rows]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert rows[-1].rel_error < 0.01  # M = 10, nu = 0.025 lands within 1%
    assert rows[-1].theory == pytest.approx(2.0)


def test_single_row_schedule():
    rows = convergence_study(1.0, schedule=[(5.0, 0.1)])
    assert len(rows) == 1
    assert rows[0].N == 101


def test_study_scaling_invariance():
    base = convergence_study(1.0)
    rescaled = convergence_study(
        0.5, schedule=[(2.0 * m, 2.0 * nu) for m, nu in DEFAULT_SCHEDULE])
    for a, b in zip(base, rescaled):
        assert abs(a.rel_error - b.rel_error) <= 1e-6
        # absolute errors pick up the 1/eps^2 of the target itself
        assert b.abs_error == pytest.approx(4.0 * a.abs_error, rel=1e-6)
        assert b.theory == pytest.approx(8.0)


def test_default_schedule_rescales_with_eps():
    rows = convergence_study(2.0)
    assert rows[0].M == pytest.approx(2.0)
    assert rows[0].nu == pytest.approx(0.1)
    assert abs(rows[0].rel_error - convergence_study(1.0)[0].rel_error) <= 1e-6
