"""Dual ODE certificates.

Order matters: the closed forms are first shown to satisfy the ODE
algebraically (residual checks); only then are they used as oracles for
the shooting integrator.
"""

import math

import numpy as np
import pytest

from lipnoise.duals import (
    CertificateError,
    Feasibility,
    bisect_lambda_star,
    closed_form_dual_residual,
    closed_form_eta,
    inflection_point_1d,
    integrate_dual_1d,
    integrate_dual_radial,
    negative_branch_eta_1d,
    theoretical_lambda_star,
    verify_separable_dual,
)
from lipnoise.params import Grid1D


# ---------------------------------------------------------------------------
# closed forms satisfy the ODE (the oracle layer)


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_scalar_closed_form_residual(eps):
    rep = closed_form_dual_residual(eps, kind="1d")
    assert rep.max_abs <= 1e-12
    assert rep.lam == theoretical_lambda_star("1d", eps)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_radial_closed_form_residual(n):
    rep = closed_form_dual_residual(1.0, kind="radial", n=n)
    assert rep.max_abs <= 1e-12


def test_residual_shifts_linearly_in_lambda():
    rep = closed_form_dual_residual(1.0, kind="1d", lam=2.1)
    # lambda enters the ODE additively, so the defect is exactly 0.1
    assert np.allclose(rep.residuals, 0.1, atol=1e-12)
    assert rep.max_abs == pytest.approx(0.1, abs=1e-12)


def test_negative_branch_satisfies_linear_ode():
    # eta' - eps eta = v^2 - lam while eta < 0 (|eta| = -eta there)
    eps, lam = 1.3, 1.1
    v = np.linspace(0.0, 2.0, 201)
    eta = negative_branch_eta_1d(v, eps, lam)
    assert np.all(eta[1:] < 0)
    h = 1e-6
    eta_p = (negative_branch_eta_1d(v + h, eps, lam)
             - negative_branch_eta_1d(v - h, eps, lam)) / (2 * h)
    res = eta_p - eps * eta - (v * v - lam)
    assert np.abs(res).max() < 1e-8


def test_closed_form_eta_is_odd():
    v = np.linspace(-3.0, 3.0, 13)
    assert np.allclose(closed_form_eta(v, 1.0) + closed_form_eta(-v, 1.0), 0.0, atol=1e-15)


# ---------------------------------------------------------------------------
# shooting integrator against the oracles


def test_trajectory_matches_critical_closed_form():
    traj = integrate_dual_1d(2.0, 1.0)
    ref = closed_form_eta(traj.grid, 1.0)
    rel = np.abs(traj.eta - ref) / (1.0 + np.abs(ref))
    # error carries an e^{eps v} mode: tight early, looser at the far end
    assert rel[traj.grid <= 12.0].max() < 1e-6
    assert rel.max() < 1e-3
    assert traj.verdict is Feasibility.INFEASIBLE


@pytest.mark.parametrize("n", [2, 3])
def test_radial_trajectory_matches_closed_form(n):
    lam = theoretical_lambda_star("radial", 1.0, n)
    traj = integrate_dual_radial(lam, 1.0, n)
    ref = closed_form_eta(traj.grid, 1.0, n)
    rel = np.abs(traj.eta - ref) / (1.0 + np.abs(ref))
    assert rel[traj.grid <= 12.0].max() < 1e-6
    assert rel.max() < 1e-3
    assert traj.verdict is Feasibility.INFEASIBLE


def test_negative_branch_matches_integration():
    eps, lam = 1.0, 1.9
    traj = integrate_dual_1d(lam, eps)
    cut = traj.grid[traj.grid <= 0.9 * traj.crossings[0][0]]
    ref = negative_branch_eta_1d(cut, eps, lam)
    assert np.abs(traj.eval(cut) - ref).max() < 5e-8


def test_zero_lambda_is_feasible_everywhere():
    traj = integrate_dual_1d(0.0, 1.0)
    assert traj.verdict is Feasibility.FEASIBLE
    assert np.all(traj.eta[1:] >= 0)


def test_radial_n1_reduces_to_scalar():
    a = integrate_dual_1d(1.7, 1.0)
    b = integrate_dual_radial(1.7, 1.0, 1)
    assert np.array_equal(a.eta, b.eta)
    assert a.verdict is b.verdict


def test_verdict_families():
    for lam, want in [(1.6, Feasibility.FEASIBLE), (1.9, Feasibility.FEASIBLE),
                      (2.0, Feasibility.INFEASIBLE), (2.2, Feasibility.INFEASIBLE)]:
        assert integrate_dual_1d(lam, 1.0).verdict is want
    for lam, want in [(5.8, Feasibility.FEASIBLE), (6.0, Feasibility.INFEASIBLE),
                      (6.6, Feasibility.INFEASIBLE)]:
        assert integrate_dual_radial(lam, 1.0, 2).verdict is want


def test_short_horizon_is_inconclusive_near_critical():
    traj = integrate_dual_1d(1.99999, 1.0, v_max=6.0)
    assert traj.verdict is Feasibility.INCONCLUSIVE
    assert not traj.crossings


def test_feasibility_monotone_on_lambda_ladder():
    last_feasible = True
    for lam in np.linspace(0.5, 3.0, 11):
        v = integrate_dual_1d(float(lam), 1.0).verdict
        assert v in (Feasibility.FEASIBLE, Feasibility.INFEASIBLE)
        feasible = v is Feasibility.FEASIBLE
        # once infeasible, never feasible again
        assert not (feasible and not last_feasible)
        last_feasible = feasible


def test_weak_duality_bounds_feasible_lambda():
    mse = 2.0  # scalar mechanism at eps = 1
    for lam in (0.5, 1.0, 1.5, 1.99):
        assert integrate_dual_1d(lam, 1.0).verdict is Feasibility.FEASIBLE
        assert lam <= mse
    for lam in (2.01, 2.5, 4.0):
        assert integrate_dual_1d(lam, 1.0).verdict is Feasibility.INFEASIBLE


# ---------------------------------------------------------------------------
# breakpoints


def test_breakpoints_near_critical():
    traj = integrate_dual_1d(1.9, 1.0)
    v1, v2, v3 = traj.breakpoints
    assert v1 == pytest.approx(math.log(20.0), abs=1e-3)
    assert v1 == pytest.approx(inflection_point_1d(1.0, 1.9), abs=1e-6)
    assert v1 <= v2 <= v3
    # v2 is the trajectory minimum, v3 its zero crossing
    assert traj.eval(v2) <= traj.eval(v2 - 0.05) + 1e-12
    assert traj.eval(v2) <= traj.eval(v2 + 0.05) + 1e-12
    assert abs(traj.eval(v3)) < 1e-7
    assert v3 == pytest.approx(traj.crossings[0][0], abs=1e-9)


def test_positive_branch_stays_increasing():
    traj = integrate_dual_1d(1.9, 1.0)
    v3 = traj.breakpoints[2]
    tail = traj.grid >= v3 + 1e-6
    assert np.all(traj.eta_prime[tail] >= -1e-9)


def test_inflection_point_requires_subcritical_lambda():
    with pytest.raises(ValueError):
        inflection_point_1d(1.0, 2.0)  # delta = 0
    with pytest.raises(ValueError):
        inflection_point_1d(1.0, -0.1)  # delta > 2
    # same delta at eps=2 needs lam = 1.9/4; breakpoint scales as 1/eps
    assert inflection_point_1d(2.0, 0.475) * 2.0 == pytest.approx(
        inflection_point_1d(1.0, 1.9), rel=1e-12)


# ---------------------------------------------------------------------------
# bisection


@pytest.mark.parametrize("eps", [0.5, 1.0, 2.0])
def test_bisect_scalar(eps):
    res = bisect_lambda_star(eps, kind="1d", tol=1e-3)
    theory = 2.0 / eps**2
    assert abs(res.estimate - theory) <= 2e-3
    lo, hi = res.bracket
    assert lo < res.estimate <= hi
    assert hi - lo <= 1e-3
    assert res.theory == theory


def test_bisect_radial_n2():
    res = bisect_lambda_star(1.0, kind="radial", n=2, tol=1e-2)
    assert abs(res.estimate - 6.0) <= 1e-2


def test_bisect_rejects_bad_inputs():
    with pytest.raises(ValueError):
        bisect_lambda_star(1.0, kind="spherical")
    with pytest.raises(ValueError):
        bisect_lambda_star(-1.0)
    with pytest.raises(CertificateError):
        # horizon far too short to ever classify near the critical value
        bisect_lambda_star(1.0, kind="1d", tol=1e-9, v_max=3.0)


# ---------------------------------------------------------------------------
# separable certificates


def test_separable_l1_certificate():
    rep = verify_separable_dual(1.0, 1.99, n=3, kind="l1")
    assert rep.block_verdict is Feasibility.FEASIBLE
    assert rep.objective == pytest.approx(5.97)
    assert rep.max_violation <= 1e-6


def test_separable_composite_certificate():
    rep = verify_separable_dual(1.0, 11.9, n=2, kind="composite", m=3)
    assert rep.objective == pytest.approx(23.8)
    assert rep.objective < 24.0  # strictly below the composite MSE
    assert rep.max_violation <= 1e-6


def test_separable_single_block_is_the_block_itself():
    rep = verify_separable_dual(1.0, 1.9, n=1, kind="l1")
    assert rep.objective == pytest.approx(1.9)
    assert rep.max_violation <= 1e-6


def test_separable_rejects_infeasible_block():
    with pytest.raises(CertificateError):
        verify_separable_dual(1.0, 2.5, n=3, kind="l1")


def test_lambda_star_theory_values():
    assert theoretical_lambda_star("1d", 2.0) == 0.5
    assert theoretical_lambda_star("radial", 1.0, 5) == 30.0
    with pytest.raises(ValueError):
        theoretical_lambda_star("other", 1.0)
