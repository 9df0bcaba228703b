"""Dual optimality certificates for the noise mechanisms, by ODE shooting.

The scalar lower-bound problem: the MSE of any eps-Lipschitz noise density on
R is at least the largest lambda for which some eta with eta(0) = 0 satisfies

    eta'(v) + eps |eta(v)| <= v^2 - lambda        for all v >= 0,

and that largest lambda equals 2/eps^2, the Laplace MSE.  Saturating the
inequality turns the search into a shooting problem: integrate

    eta' = v^2 - lambda - eps |eta|,    eta(0) = 0,

and watch the trajectory.  Below the critical lambda it crosses zero and
grows (a feasible certificate exists); above it the |eta| kink feeds an
exponential runaway to -infinity (no certificate).  The radial problem for
n-dimensional l2 noise is identical with an extra (n-1)/r eta transport term,
critical value n(n+1)/eps^2, integrated from a tiny r0 > 0 with the series
start eta(r0) = -lambda r0 / n.

At the critical value itself the trajectory is exactly quadratic,
eta = -v (eps v + n + 1) / eps^2, which doubles as a closed-form infeasibility
certificate; :func:`closed_form_dual_residual` verifies it independently of
any integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .params import Grid1D


class CertificateError(RuntimeError):
    """Numerical certification failed (inconclusive shooting, bad bracket)."""


class Feasibility(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class DualTrajectory:
    """One shooting run: eta sampled on a grid, with branch bookkeeping.

    branch_sign holds sign(eta) per grid point (the active |eta| branch);
    crossings lists (position, new_sign) for every zero crossing the solver
    resolved; diverged_at is where |eta| hit the runaway threshold, if it did.
    """

    lam: float
    eps: float
    n: int
    grid: np.ndarray
    eta: np.ndarray
    eta_prime: np.ndarray
    branch_sign: np.ndarray
    crossings: list[tuple[float, float]]
    diverged_at: float | None
    verdict: Feasibility
    breakpoints: tuple[float | None, float | None, float | None] | None
    threshold: float
    segments: list = field(default_factory=list, repr=False)

    def rows(self):
        """(v_or_r, eta, branch_sign) triples for delimited output."""
        for v, e, s in zip(self.grid, self.eta, self.branch_sign):
            yield float(v), float(e), int(s)

    def eval(self, x) -> np.ndarray:
        """Dense-solution eta at arbitrary points inside the integrated span."""
        x = np.asarray(x, dtype=float)
        if x.size and (x.min() < self.grid[0] - 1e-12 or x.max() > self.grid[-1] + 1e-12):
            raise ValueError("evaluation point outside the integrated span")
        out, _ = _eval_segments(self.segments, np.clip(x, self.grid[0], self.grid[-1]))
        return out


@dataclass
class CertificateResult:
    """Bisection outcome bracketing the critical lambda."""

    kind: str
    n: int
    eps: float
    estimate: float
    bracket: tuple[float, float]
    iterations: int
    theory: float
    v_max: float


def theoretical_lambda_star(kind: str, eps: float, n: int = 1) -> float:
    if kind == "1d":
        return 2.0 / eps**2
    if kind == "radial":
        return n * (n + 1) / eps**2
    raise ValueError(f"kind must be '1d' or 'radial', got {kind!r}")


# ---------------------------------------------------------------------------
# shooting integrator


def _shoot(eps: float, lam: float, n: int, span_end: float, tol: float, threshold: float):
    """Integrate the branch ODE, restarting at each |eta| kink crossing.

    Returns (segments, crossings, diverged_at, end) where segments are
    (t_lo, t_hi, sign, dense_solution).  Zero starts are nudged by one
    subnormal in the direction of motion so the crossing event does not
    re-fire at the restart point itself.
    """
    if n == 1:
        t, y = 0.0, 0.0
    else:
        t = 1e-6 / eps
        y = -lam * t / n
    sign = -1.0 if (y < 0 or (y == 0 and lam > 0)) else 1.0
    if y == 0.0:
        y = sign * 1e-300

    segments = []
    crossings: list[tuple[float, float]] = []
    diverged_at = None
    atol = tol * 1e-2 * max(1.0, abs(lam))
    for _ in range(8):
        radial = (n - 1)

        def rhs(t_, y_, s=sign):
            eta = y_[0]
            out = t_ * t_ - lam - eps * s * eta
            if radial:
                out -= radial * eta / t_
            return [out]

        def cross(t_, y_):
            return y_[0]

        cross.terminal = True
        cross.direction = -sign  # only the branch-leaving direction counts

        def blow(t_, y_):
            return y_[0] * y_[0] - threshold * threshold

        blow.terminal = True
        blow.direction = 1.0

        sol = solve_ivp(
            rhs, (t, span_end), [y], method="RK45", dense_output=True,
            events=[cross, blow], rtol=tol, atol=atol,
        )
        if not sol.success:
            raise CertificateError(f"integrator failed at lambda={lam}: {sol.message}")
        segments.append((t, float(sol.t[-1]), sign, sol.sol))
        if sol.status == 1 and sol.t_events[0].size:
            t = float(sol.t_events[0][0])
            sign = -sign
            crossings.append((t, sign))
            y = sign * 1e-300
            if span_end - t < 1e-12 * span_end:
                break
            continue
        if sol.status == 1 and sol.t_events[1].size:
            diverged_at = float(sol.t_events[1][0])
        break
    else:
        raise CertificateError(f"more than 8 branch crossings at lambda={lam}; not our ODE family")
    return segments, crossings, diverged_at, segments[-1][1]


def _eval_segments(segments, grid):
    eta = np.empty_like(grid)
    sign = np.empty_like(grid)
    for t_lo, t_hi, s, dense in segments:
        mask = (grid >= t_lo) & (grid <= t_hi)
        if mask.any():
            eta[mask] = dense(grid[mask])[0]
            sign[mask] = s
    return eta, sign


def _integrate(eps: float, lam: float, n: int, v_max: float, tol: float, points: int) -> DualTrajectory:
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError(f"eps must be positive, got {eps!r}")
    if not math.isfinite(lam):
        raise ValueError(f"lambda must be finite, got {lam!r}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if v_max <= 0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    threshold = 1e6 * max(1.0, abs(lam))
    segments, crossings, diverged_at, end = _shoot(eps, lam, n, v_max, tol, threshold)
    t0 = segments[0][0]
    grid = np.linspace(t0, end, points)
    eta, sign = _eval_segments(segments, grid)
    eta_prime = grid * grid - lam - eps * sign * eta
    if n > 1:
        eta_prime -= (n - 1) * eta / grid
    traj = DualTrajectory(
        lam=lam, eps=eps, n=n, grid=grid, eta=eta, eta_prime=eta_prime,
        branch_sign=sign, crossings=crossings, diverged_at=diverged_at,
        verdict=Feasibility.INCONCLUSIVE, breakpoints=None, threshold=threshold,
        segments=segments,
    )
    traj.verdict = classify_feasibility(traj)
    traj.breakpoints = _breakpoints(traj, segments)
    return traj


def integrate_dual_1d(lam: float, eps: float, v_max: float = 22.0, tol: float = 1e-10,
                      points: int = 1001) -> DualTrajectory:
    """Shoot the scalar dual ODE from eta(0) = 0 out to v_max."""
    return _integrate(eps, lam, 1, v_max, tol, points)


def integrate_dual_radial(lam: float, eps: float, n: int, r_max: float = 22.0,
                          tol: float = 1e-10, points: int = 1001) -> DualTrajectory:
    """Shoot the radial dual ODE from the series start at r0 = 1e-6/eps.

    The (n-1)/r transport term is singular at 0; the first-order series
    eta ~ -lambda r / n is accurate to O(r0^2) there, far below the
    integration tolerance.  n = 1 is allowed (the transport term drops
    out) and recovers the 1D trajectory up to the series start.
    """
    if n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    return _integrate(eps, lam, int(n), r_max, tol, points)


# ---------------------------------------------------------------------------
# classification


def classify_feasibility(traj: DualTrajectory) -> Feasibility:
    """Decide whether the trajectory certifies lambda as feasible.

    Feasible: eta crossed into the positive branch (or started there) and
    stayed nonnegative and nondecreasing to the end of the integration span.

    Infeasible: eta ran away to -infinity (hit the threshold), or ended
    still negative below the critical envelope -(v^2/eps + (n+1) v/eps^2).
    The right side of the ODE decreases in lambda, so solutions order
    pointwise in lambda while negative; the envelope is the exact solution
    at the critical value, hence dropping strictly below it certifies
    lambda >= lambda*.  Ending *on* the envelope (within the numerical
    margin) is also called Infeasible, but only when the implied lambda
    ambiguity -- margin shrunk by the e^{eps v} separation the span has
    accumulated -- is negligible; sub-critical lambdas this mislabels sit
    within ~1e-9 of the critical value at the default span.

    Anything else is Inconclusive and the caller should enlarge the span:
    a still-negative trajectory visibly above the envelope belongs to a
    sub-critical lambda whose zero crossing lies beyond the horizon.
    """
    eta, grid = traj.eta, traj.grid
    lam, eps, n = traj.lam, traj.eps, traj.n
    tiny = 1e-7 * max(1.0, abs(lam))

    if traj.diverged_at is not None and eta[-1] < 0:
        return Feasibility.INFEASIBLE

    up = [t for t, s in traj.crossings if s > 0]
    started_positive = traj.branch_sign[0] > 0
    if up or started_positive:
        tail_from = up[-1] if up else grid[0]
        tail = grid >= tail_from
        if eta[-1] > 0 and np.all(eta[tail] >= -tiny) and np.all(traj.eta_prime[tail] >= -tiny):
            return Feasibility.FEASIBLE
        return Feasibility.INCONCLUSIVE

    if eta[-1] < 0 and traj.eta_prime[-1] < 0:
        v_end = grid[-1]
        envelope = v_end * v_end / eps + (n + 1) * v_end / eps**2
        # 2e-3 covers the integrator's amplified roundoff on this branch
        # (the e^{eps v} mode reaches ~0.3 absolute at span 22, ~6e-4 of
        # the envelope).
        margin = max(2e-3 * envelope, tiny)
        depth = -eta[-1] - envelope
        if depth > margin:
            return Feasibility.INFEASIBLE
        if depth >= -margin:
            gain = math.expm1(min(eps * v_end, 700.0))
            lam_band = margin * eps / max(gain, 1.0)
            if lam_band <= 1e-6 * max(1.0, abs(lam)):
                return Feasibility.INFEASIBLE
    return Feasibility.INCONCLUSIVE


def _breakpoints(traj: DualTrajectory, segments):
    """(v1, v2, v3) on the first negative branch: inflection, minimum, crossing.

    Present only when the trajectory starts on the negative branch; entries
    that do not exist within the integrated span are None.
    """
    t_lo, t_hi, sign, dense = segments[0]
    if sign > 0:
        return None
    lam, eps, n = traj.lam, traj.eps, traj.n

    def eta(v):
        return float(dense(v)[0])

    def eta_p(v):
        e = eta(v)
        out = v * v - lam - eps * sign * e
        if n > 1:
            out -= (n - 1) * e / v
        return out

    def eta_pp(v):
        e, ep = eta(v), eta_p(v)
        out = 2.0 * v - eps * sign * ep
        if n > 1:
            out -= (n - 1) * (ep / v - e / (v * v))
        return out

    v3 = traj.crossings[0][0] if traj.crossings else None
    hi = v3 if v3 is not None else t_hi
    v1 = _first_root(eta_pp, t_lo, hi)
    v2 = _first_root(eta_p, t_lo, hi)
    return (v1, v2, v3)


def _first_root(f, lo, hi, samples: int = 400):
    xs = np.linspace(lo, hi, samples)
    vals = np.array([f(x) for x in xs])
    idx = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if idx.size == 0:
        return None
    a, b = xs[idx[0]], xs[idx[0] + 1]
    return float(brentq(f, a, b, xtol=1e-12, rtol=1e-14))


# ---------------------------------------------------------------------------
# bisection


def bisect_lambda_star(
    eps: float,
    kind: str = "1d",
    n: int = 1,
    tol: float = 1e-3,
    v_max: float | None = None,
    tol_integration: float = 1e-10,
    max_iter: int = 200,
) -> CertificateResult:
    """Bracket the critical lambda by bisection on the shooting verdict.

    The returned bracket satisfies lo < estimate <= hi with hi - lo <= tol
    (absolute).  An Inconclusive verdict triggers up to two retries with a
    1.5x larger span before raising CertificateError.
    """
    theory = theoretical_lambda_star(kind, eps, n)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    span = v_max if v_max is not None else 22.0 / eps

    def classify(lam: float) -> Feasibility:
        s = span
        for _ in range(3):
            if kind == "1d":
                traj = integrate_dual_1d(lam, eps, v_max=s, tol=tol_integration, points=257)
            else:
                traj = integrate_dual_radial(lam, eps, n, r_max=s, tol=tol_integration, points=257)
            if traj.verdict is not Feasibility.INCONCLUSIVE:
                return traj.verdict
            s *= 1.5
        raise CertificateError(
            f"shooting inconclusive at lambda={lam} (span up to {s/1.5:g}); enlarge v_max"
        )

    lo, hi = 0.0, 4.0 * theory
    if classify(lo) is not Feasibility.FEASIBLE:
        raise CertificateError(f"lambda={lo} should be feasible; bad problem setup")
    if classify(hi) is not Feasibility.INFEASIBLE:
        raise CertificateError(f"lambda={hi} should be infeasible; enlarge the bracket")
    iterations = 0
    while hi - lo > tol:
        if iterations >= max_iter:
            raise CertificateError(f"bisection exceeded {max_iter} iterations")
        mid = 0.5 * (lo + hi)
        if classify(mid) is Feasibility.FEASIBLE:
            lo = mid
        else:
            hi = mid
        iterations += 1
    return CertificateResult(
        kind=kind, n=n, eps=eps, estimate=0.5 * (lo + hi), bracket=(lo, hi),
        iterations=iterations, theory=theory, v_max=span,
    )


# ---------------------------------------------------------------------------
# separable certificates for product and composite mechanisms


@dataclass
class SeparableDualReport:
    kind: str
    n: int
    m: int
    eps: float
    block_lambda: float
    objective: float  # n * block_lambda, the certified MSE lower bound
    max_violation: float
    block_verdict: Feasibility
    tensor_points: int


def verify_separable_dual(
    eps: float,
    block_lambda: float,
    n: int,
    kind: str = "l1",
    m: int = 1,
    grid: Grid1D | None = None,
    tol: float = 1e-10,
) -> SeparableDualReport:
    """Certify a sum-separable dual for n independent blocks.

    A feasible scalar (or m-dimensional radial) certificate eta at
    block_lambda makes eta_sum(v) = sum_i eta(|v_i|) feasible for the joint
    problem with value n * block_lambda; the check evaluates the summed
    constraint residual pointwise on a tensor grid (n <= 3) or via the
    separable maximum (larger n), using finite-difference derivatives of
    the dense trajectory so the residual is not trivially zero.
    """
    if kind not in ("l1", "composite"):
        raise ValueError(f"kind must be 'l1' or 'composite', got {kind!r}")
    if kind == "l1" and m != 1:
        raise ValueError("l1 blocks are scalar; m must be 1")
    if kind == "composite" and m < 2:
        raise ValueError("composite blocks need m >= 2")
    dim = m if kind == "composite" else 1
    span = grid.hi * 1.05 if grid is not None else 12.0 / eps
    if dim == 1:
        traj = integrate_dual_1d(block_lambda, eps, v_max=span, tol=tol, points=2001)
    else:
        traj = integrate_dual_radial(block_lambda, eps, dim, r_max=span, tol=tol, points=2001)
    if traj.verdict is not Feasibility.FEASIBLE:
        raise CertificateError(
            f"block certificate at lambda={block_lambda} is {traj.verdict.value}; "
            "pick block_lambda below the critical value"
        )
    if grid is None:
        step = 10.0 / eps / 200
        grid = Grid1D(0.0 if dim == 1 else step, 10.0 / eps, step)
    x = grid.points()
    if dim > 1 and x[0] <= traj.grid[0]:
        x = x.copy()
        x[0] = traj.grid[0] * 1.01  # keep off the transport singularity

    # differentiate the dense solution itself; clipped stencils fall back to
    # one-sided differences at the span edges
    eta = traj.eval(x)
    h = 1e-7
    xp = np.clip(x + h, traj.grid[0], traj.grid[-1])
    xm = np.clip(x - h, traj.grid[0], traj.grid[-1])
    eta_p = (traj.eval(xp) - traj.eval(xm)) / (xp - xm)
    res = eta_p + eps * np.abs(eta) - (x * x - block_lambda)
    if dim > 1:
        res += (dim - 1) * eta / np.maximum(x, 1e-300)

    sep_max = float(n * res.max())
    tensor_points = 0
    if n <= 3:
        # honest pointwise pass on a decimated tensor grid
        stride = max(1, math.ceil(len(x) / 32))
        sub = res[::stride]
        grids = np.meshgrid(*([sub] * n), indexing="ij")
        total = np.add.reduce(grids)
        sep_max = max(sep_max, float(total.max()))
        tensor_points = total.size
    max_violation = sep_max
    return SeparableDualReport(
        kind=kind, n=n, m=m, eps=eps, block_lambda=block_lambda,
        objective=n * block_lambda, max_violation=max(0.0, max_violation),
        block_verdict=traj.verdict, tensor_points=tensor_points,
    )


# ---------------------------------------------------------------------------
# closed forms


def closed_form_eta(v, eps: float, n: int = 1):
    """The critical trajectory -v (eps |v| + n + 1) / eps^2.

    Odd in v, so the scalar case (n = 1) extends to negative arguments;
    radial callers pass v >= 0.
    """
    v = np.asarray(v, dtype=float)
    out = -v * (eps * np.abs(v) + n + 1) / eps**2
    return out if out.ndim else float(out)


def negative_branch_eta_1d(v, eps: float, lam: float):
    """Exact negative-branch solution of the scalar shooting ODE.

    eta(v) = -v^2/eps - 2 v/eps^2 - delta/eps^3 + (delta/eps^3) e^{eps v},
    delta = 2 - lam eps^2.  Valid while eta stays negative.
    """
    v = np.asarray(v, dtype=float)
    delta = 2.0 - lam * eps**2
    out = -v**2 / eps - 2.0 * v / eps**2 - delta / eps**3 + (delta / eps**3) * np.exp(eps * v)
    return out if out.ndim else float(out)


def inflection_point_1d(eps: float, lam: float) -> float:
    """First breakpoint of the negative branch, from eta'' = 0.

    Exists for 0 < delta < 2, i.e. 0 < lam < lambda*."""
    delta = 2.0 - lam * eps**2
    if not 0.0 < delta < 2.0:
        raise ValueError(f"no inflection: delta = {delta} outside (0, 2)")
    return (math.log(2.0) - math.log(delta)) / eps


@dataclass
class DualResidualReport:
    kind: str
    n: int
    eps: float
    lam: float
    grid: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    max_abs: float


def closed_form_dual_residual(
    eps: float,
    kind: str = "1d",
    n: int = 1,
    lam: float | None = None,
    grid: Grid1D | None = None,
) -> DualResidualReport:
    """Residual of the closed-form critical trajectory in the dual ODE.

    At lam = lambda* the residual vanishes identically (algebraically); any
    other lam shifts it by exactly lam* - lam, so this doubles as a defect
    meter.  Entirely quadrature- and integration-free.
    """
    if kind == "1d":
        if n != 1:
            raise ValueError("scalar form has n = 1")
    elif kind != "radial":
        raise ValueError(f"kind must be '1d' or 'radial', got {kind!r}")
    if kind == "radial" and n < 2:
        raise ValueError("radial form needs n >= 2")
    if lam is None:
        lam = theoretical_lambda_star(kind, eps, n)
    if grid is None:
        grid = Grid1D(0.0 if kind == "1d" else 0.05 / eps, 20.0 / eps, 0.05 / eps)
    x = grid.points()
    if kind == "radial" and x[0] <= 0:
        raise ValueError("radial residual grid must start above 0")
    eta = -x * (eps * x + n + 1) / eps**2  # x >= 0 branch
    eta_p = -(2.0 * eps * x + n + 1) / eps**2
    res = eta_p + eps * np.abs(eta) - (x * x - lam)
    if kind == "radial":
        res += (n - 1) * eta / x
    return DualResidualReport(
        kind=kind, n=n, eps=eps, lam=lam, grid=x, residuals=res, max_abs=float(np.abs(res).max())
    )
