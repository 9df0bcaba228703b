"""Discretized minimum-MSE linear program and its duality certificate.

The continuum problem (minimize E V^2 over eps-Lipschitz log-densities)
discretizes on the grid v_i = -M + i nu, i = 0..N-1, N = 2M/nu + 1, as

    minimize    sum_i g_i v_i^2 nu
    subject to  sum_i g_i nu = 1,       g >= 0,
                |g_{i+1} - g_i| / nu <= eps (g_i + g_{i+1}) / 2,

a finite LP whose optimum converges to 2/eps^2 from below as (M, nu) ->
(inf, 0).  The solver is a dense-free Mehrotra predictor-corrector method:
the normal-equation matrix is banded (pair constraints chain neighbours)
plus one arrowhead row from the mass constraint, so each iteration is O(N).
A structured crossover then recovers the exact optimal vertex - one active
difference constraint per neighbour pair forces the geometric profile
g_{i+1}/g_i in {rho, 1/rho}, rho = (1 - eps nu / 2)/(1 + eps nu / 2) - and
solves the complementary dual multipliers by a two-sided recursion, giving
duality gaps at roundoff level rather than interior-point level.

Grids with nu >= 2/eps are accepted but degenerate: the pair constraints no
longer keep g positive, the optimum collapses toward a point mass and the
crossover (which assumes a positive profile) declines, leaving the
interior-point answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import solveh_banded


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpInstance:
    """One discretized instance: grid, objective weights, row coefficients."""

    eps: float
    M: float
    nu: float
    N: int
    v: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)  # objective weights nu * v_i^2

    @property
    def pairs(self) -> int:
        return self.N - 1

    @property
    def degenerate(self) -> bool:
        """True when nu >= 2/eps: pair constraints admit g touching zero."""
        return self.nu >= 2.0 / self.eps

    @property
    def ratio(self) -> float:
        """Geometric decay factor of the optimal profile (nondegenerate grids)."""
        return (1.0 - self.eps * self.nu / 2.0) / (1.0 + self.eps * self.nu / 2.0)

    def row_coefficients(self) -> tuple[float, float]:
        """(a_lo, a_hi): the pair rows are
        a_lo g_i + a_hi g_{i+1} >= 0   (decrease bound, multiplier kappa_i)
        a_hi g_i + a_lo g_{i+1} >= 0   (increase bound, multiplier mu_i)."""
        return self.eps / 2.0 - 1.0 / self.nu, self.eps / 2.0 + 1.0 / self.nu

    def dense_matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Explicit standard-form (A, b, c) with slack columns, for small-N checks."""
        N, P = self.N, self.pairs
        a_lo, a_hi = self.row_coefficients()
        nvar = 3 * N - 2
        A = np.zeros((2 * P + 1, nvar))
        A[0, :N] = self.nu
        for i in range(P):
            A[1 + 2 * i, i] = a_lo
            A[1 + 2 * i, i + 1] = a_hi
            A[1 + 2 * i, N + i] = -1.0
            A[2 + 2 * i, i] = a_hi
            A[2 + 2 * i, i + 1] = a_lo
            A[2 + 2 * i, N + P + i] = -1.0
        b = np.zeros(2 * P + 1)
        b[0] = 1.0
        c = np.concatenate([self.c, np.zeros(2 * P)])
        return A, b, c


def build_primal(eps: float, M: float, nu: float) -> LpInstance:
    """Validate the grid and assemble objective weights.

    2M/nu must be an integer (within 1e-9 relative) so the grid closes at
    +/-M; v_i and the weights are formed directly from (M, nu, i) so two
    instances related by the exact scaling (eps, M, nu) -> (eps/2, 2M, 2nu)
    produce bit-identical relative geometry.
    """
    if not (math.isfinite(eps) and eps > 0):
        raise ValueError(f"eps must be positive, got {eps!r}")
    if not (math.isfinite(M) and M > 0 and math.isfinite(nu) and nu > 0):
        raise ValueError(f"M and nu must be positive, got M={M!r} nu={nu!r}")
    steps = 2.0 * M / nu
    n_steps = round(steps)
    if n_steps < 2 or abs(steps - n_steps) > 1e-9 * max(1.0, n_steps):
        raise ValueError(f"2M/nu = {steps} is not an integer step count >= 2")
    N = n_steps + 1
    v = -M + nu * np.arange(N, dtype=float)
    c = nu * v * v
    return LpInstance(eps=eps, M=float(M), nu=float(nu), N=N, v=v, c=c)


@dataclass
class LpSolution:
    status: LpStatus
    g: np.ndarray = field(repr=False)
    objective: float
    lam: float
    kappa: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    dual_objective: float
    gap: float
    rel_gap: float
    iterations: int
    method: str
    residuals: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# structured linear algebra: A has the mass row plus interleaved pair rows
# (row order: mass, lo_0, up_0, lo_1, up_1, ...; variables g then s_lo then s_up)


def _apply_A(inst: LpInstance, x: np.ndarray) -> np.ndarray:
    N, P = inst.N, inst.pairs
    a_lo, a_hi = inst.row_coefficients()
    g, slo, sup = x[:N], x[N : N + P], x[N + P :]
    out = np.empty(2 * P + 1)
    out[0] = inst.nu * g.sum()
    out[1::2] = a_lo * g[:-1] + a_hi * g[1:] - slo
    out[2::2] = a_hi * g[:-1] + a_lo * g[1:] - sup
    return out


def _apply_AT(inst: LpInstance, y: np.ndarray) -> np.ndarray:
    N, P = inst.N, inst.pairs
    a_lo, a_hi = inst.row_coefficients()
    lam, kap, mu = y[0], y[1::2], y[2::2]
    out = np.empty(3 * N - 2)
    g = np.full(N, inst.nu * lam)
    g[:-1] += a_lo * kap + a_hi * mu
    g[1:] += a_hi * kap + a_lo * mu
    out[:N] = g
    out[N : N + P] = -kap
    out[N + P :] = -mu
    return out


def _normal_solver(inst: LpInstance, d: np.ndarray, reg: float):
    """Factor M = A diag(d) A^T as banded B plus mass-row arrowhead.

    Returns a solve(rhs) closure.  B (pair rows only) has lower bandwidth 3;
    the Schur complement against the single mass row closes the system.
    """
    N, P = inst.N, inst.pairs
    a_lo, a_hi = inst.row_coefficients()
    dg = d[:N]
    dlo = d[N : N + P]
    dup = d[N + P :]
    n_b = 2 * P
    ab = np.zeros((4, n_b))
    # diagonal
    ab[0, 0::2] = dg[:-1] * a_lo**2 + dg[1:] * a_hi**2 + dlo
    ab[0, 1::2] = dg[:-1] * a_hi**2 + dg[1:] * a_lo**2 + dup
    ab[0] += reg
    # offset 1: (lo_i, up_i) and (up_i, lo_{i+1})
    ab[1, 0::2] = dg[:-1] * a_lo * a_hi + dg[1:] * a_hi * a_lo
    ab[1, 1:-1:2] = dg[1:-1] * a_lo * a_lo
    # offset 2: (lo_i, lo_{i+1}) and (up_i, up_{i+1})
    ab[2, 0:-2:2] = dg[1:-1] * a_hi * a_lo
    ab[2, 1:-2:2] = dg[1:-1] * a_lo * a_hi
    # offset 3: (lo_i, up_{i+1})
    ab[3, 0:-3:2] = dg[1:-1] * a_hi * a_hi
    # arrowhead against the mass row
    w = np.empty(n_b)
    w[0::2] = inst.nu * (dg[:-1] * a_lo + dg[1:] * a_hi)
    w[1::2] = inst.nu * (dg[:-1] * a_hi + dg[1:] * a_lo)
    alpha = inst.nu**2 * dg.sum() + reg

    z = solveh_banded(ab, w, lower=True)
    denom = alpha - w @ z

    def solve(rhs: np.ndarray) -> np.ndarray:
        r0, r1 = rhs[0], rhs[1:]
        t = solveh_banded(ab, r1, lower=True)
        y0 = (r0 - w @ t) / denom
        out = np.empty_like(rhs)
        out[0] = y0
        out[1:] = t - z * y0
        return out

    return solve


# ---------------------------------------------------------------------------
# Mehrotra predictor-corrector


def solve(inst: LpInstance, tol: float = 1e-10, max_iter: int = 60, crossover: bool = True) -> LpSolution:
    """Solve the instance to a certified optimum.

    tol bounds the interior-point relative duality gap and feasibility
    residuals; the crossover usually lands far below it.  max_iter exceeded
    returns status IterationLimit with the best iterate found.
    """
    N, P = inst.N, inst.pairs
    nvar, nrow = 3 * N - 2, 2 * P + 1
    c = np.concatenate([inst.c, np.zeros(2 * P)])
    b = np.zeros(nrow)
    b[0] = 1.0
    reg0 = 1e-12 * max(1.0, float(inst.c.max()))

    # Mehrotra starting point
    ones = np.ones(nvar)
    solver = _normal_solver(inst, ones, reg0)
    x = _apply_AT(inst, solver(b))
    y = solver(_apply_A(inst, c))
    z = c - _apply_AT(inst, y)
    dx = max(-1.5 * x.min(), 0.0)
    dz = max(-1.5 * z.min(), 0.0)
    x += dx
    z += dz
    xz = float(x @ z)
    if xz > 0:
        x += 0.5 * xz / z.sum()
        z += 0.5 * xz / x.sum()
    else:
        x += 1.0
        z += 1.0

    status = LpStatus.ITERATION_LIMIT
    iterations = 0
    for iterations in range(1, max_iter + 1):
        rb = _apply_A(inst, x) - b
        rc = _apply_AT(inst, y) + z - c
        obj = float(c @ x)
        dual_obj = float(b @ y)
        mu = float(x @ z) / nvar
        p_inf = float(np.linalg.norm(rb)) / (1.0 + float(np.linalg.norm(b)))
        d_inf = float(np.linalg.norm(rc)) / (1.0 + float(np.linalg.norm(c)))
        rel_gap = abs(obj - dual_obj) / (1.0 + abs(obj))
        if p_inf <= tol and d_inf <= tol and rel_gap <= tol:
            status = LpStatus.OPTIMAL
            break
        if abs(obj) > 1e14:
            status = LpStatus.UNBOUNDED
            break
        if float(np.linalg.norm(y)) > 1e14:
            status = LpStatus.INFEASIBLE
            break

        d = x / z
        reg = reg0
        while True:
            try:
                solver = _normal_solver(inst, d, reg)
                break
            except np.linalg.LinAlgError:
                reg *= 100.0
                if reg > 1e-3:
                    raise
        # affine predictor
        dy = solver(-rb - _apply_A(inst, d * (-rc) - x))
        dz_ = -rc - _apply_AT(inst, dy)
        dx_ = -x - d * dz_
        ap = _max_step(x, dx_)
        ad = _max_step(z, dz_)
        mu_aff = float((x + ap * dx_) @ (z + ad * dz_)) / nvar
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.1
        # corrector
        rxz = -x * z - dx_ * dz_ + sigma * mu
        dy = solver(-rb - _apply_A(inst, rxz / z + d * rc))
        dz_ = -rc - _apply_AT(inst, dy)
        dx_ = rxz / z - d * dz_
        ap = min(1.0, 0.99995 * _max_step(x, dx_))
        ad = min(1.0, 0.99995 * _max_step(z, dz_))
        x += ap * dx_
        y += ad * dy
        z += ad * dz_

    g = x[:N].copy()
    kappa = np.maximum(y[1::2], 0.0)
    mu_ = np.maximum(y[2::2], 0.0)
    obj = float(inst.c @ g)
    dual_obj = float(y[0])
    sol = LpSolution(
        status=status,
        g=g,
        objective=obj,
        lam=float(y[0]),
        kappa=kappa,
        mu=mu_,
        dual_objective=dual_obj,
        gap=abs(obj - dual_obj),
        rel_gap=abs(obj - dual_obj) / (1.0 + abs(obj)),
        iterations=iterations,
        method="ipm",
        residuals={
            "primal_infeasibility": float(np.linalg.norm(_apply_A(inst, x) - b, ord=np.inf)),
            "dual_infeasibility": float(np.linalg.norm(_apply_AT(inst, y) + z - c, ord=np.inf)),
            "complementarity": float(x @ z) / nvar,
        },
    )
    if crossover and status is LpStatus.OPTIMAL and not inst.degenerate:
        vertex = _structured_crossover(inst, sol)
        if vertex is not None:
            return vertex
    return sol


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, (-x[neg] / dx[neg]).min()))


def _structured_crossover(inst: LpInstance, sol: LpSolution) -> LpSolution | None:
    """Snap the interior-point iterate to the optimal vertex, exactly.

    The vertex has one pair constraint active per neighbour pair (picked by
    the smaller slack).  Primal: the active pattern forces a ratio chain,
    normalized to unit mass.  Dual: stationarity on every g_i is a three-term
    recursion in (lambda, beta_i); sweeping it from both ends toward the
    middle keeps each sweep contracting, and the middle equation pins lambda.
    Declines (returns None) if the resulting multipliers or stationarity
    residuals are out of tolerance, leaving the interior-point answer.
    """
    N, P = inst.N, inst.pairs
    a_lo, a_hi = inst.row_coefficients()
    g = sol.g
    s_lo = a_lo * g[:-1] + a_hi * g[1:]
    s_up = a_hi * g[:-1] + a_lo * g[1:]
    lower_active = s_lo < s_up  # decrease bound tight: g_{i+1} = rho g_i

    ratio = np.where(lower_active, inst.ratio, 1.0 / inst.ratio)
    logg = np.concatenate([[0.0], np.cumsum(np.log(ratio))])
    logg -= logg.max()
    gv = np.exp(logg)
    gv /= inst.nu * gv.sum()

    # stationarity at g_i: nu lam + prev_i beta_{i-1} + own_i beta_i = c_i,
    # where own_i / prev_i are g_i's coefficients in the active rows of pairs
    # i and i-1 (absent terms are zero-padded at the ends)
    gamma = np.where(lower_active, a_lo, a_hi)  # first-variable coefficient, pair i
    alpha = np.where(lower_active, a_hi, a_lo)  # second-variable coefficient, pair i
    own = np.concatenate([gamma, [0.0]])
    prev = np.concatenate([[0.0], alpha])
    cvec = inst.c
    K = (N - 1) // 2
    p = np.zeros(P)
    q = np.zeros(P)
    # forward sweep from equation 0: beta_i = p_i + q_i lam, i < K
    for i in range(K):
        pp, pq = (p[i - 1], q[i - 1]) if i else (0.0, 0.0)
        p[i] = (cvec[i] - prev[i] * pp) / own[i]
        q[i] = (-inst.nu - prev[i] * pq) / own[i]
    # backward sweep from equation N-1: beta_{i-1} from equation i, i > K
    for i in range(N - 1, K, -1):
        np_, nq = (p[i], q[i]) if i < P else (0.0, 0.0)
        p[i - 1] = (cvec[i] - own[i] * np_) / prev[i]
        q[i - 1] = (-inst.nu - own[i] * nq) / prev[i]
    # middle equation pins lambda
    pm, qm = (p[K - 1], q[K - 1]) if K >= 1 else (0.0, 0.0)
    pk, qk = (p[K], q[K]) if K < P else (0.0, 0.0)
    denom = inst.nu + prev[K] * qm + own[K] * qk
    if denom == 0.0:
        return None
    lam = (cvec[K] - prev[K] * pm - own[K] * pk) / denom
    beta = p + q * lam

    scale = max(1.0, float(np.abs(cvec).max()))
    if beta.min() < -1e-8 * scale:
        return None
    beta = np.maximum(beta, 0.0)
    # verify stationarity everywhere (covers both sweeps and the clipping)
    stat = inst.nu * lam + prev * np.concatenate([[0.0], beta]) \
        + own * np.concatenate([beta, [0.0]]) - cvec
    max_stat = float(np.abs(stat).max())
    if max_stat > 1e-7 * scale:
        return None

    kappa = np.where(lower_active, beta, 0.0)
    mu_ = np.where(lower_active, 0.0, beta)
    obj = float(inst.c @ gv)
    mass_resid = abs(inst.nu * gv.sum() - 1.0)
    return LpSolution(
        status=LpStatus.OPTIMAL,
        g=gv,
        objective=obj,
        lam=float(lam),
        kappa=kappa,
        mu=mu_,
        dual_objective=float(lam),
        gap=abs(obj - lam),
        rel_gap=abs(obj - lam) / (1.0 + abs(obj)),
        iterations=sol.iterations,
        method="ipm+crossover",
        residuals={
            "primal_infeasibility": mass_resid,
            "dual_infeasibility": max_stat,
            "complementarity": 0.0,
        },
    )


# ---------------------------------------------------------------------------
# certificates and reports


def check_dual_feasibility(inst: LpInstance, lam: float, kappa: np.ndarray, mu: np.ndarray) -> float:
    """Max violation of the dual constraints by (lam, kappa, mu); 0 means the
    triple certifies lam as a lower bound on the LP optimum."""
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if kappa.shape != (inst.pairs,) or mu.shape != (inst.pairs,):
        raise ValueError(f"need {inst.pairs} multipliers per family")
    a_lo, a_hi = inst.row_coefficients()
    lhs = np.full(inst.N, inst.nu * lam)
    lhs[:-1] += a_lo * kappa + a_hi * mu
    lhs[1:] += a_hi * kappa + a_lo * mu
    viol = float(np.max(lhs - inst.c))
    sign_viol = max(0.0, float(-kappa.min()) if kappa.size else 0.0,
                    float(-mu.min()) if mu.size else 0.0)
    return max(0.0, viol, sign_viol)


def duality_gap_report(inst: LpInstance, sol: LpSolution) -> dict:
    """Primal/dual sandwich: objective, certified lower bound, gap, and the
    complementarity worst case max_i min(kappa_i, mu_i)."""
    comp = float(np.minimum(sol.kappa, sol.mu).max()) if inst.pairs else 0.0
    return {
        "status": sol.status.value,
        "primal_objective": sol.objective,
        "dual_objective": sol.dual_objective,
        "certified_lower_bound": sol.dual_objective,
        "gap": sol.gap,
        "relative_gap": sol.rel_gap,
        "max_min_kappa_mu": comp,
        "dual_feasibility_violation": check_dual_feasibility(inst, sol.lam, sol.kappa, sol.mu),
        "iterations": sol.iterations,
        "method": sol.method,
    }


@dataclass
class StudyRow:
    M: float
    nu: float
    N: int
    status: str
    optimum: float
    theory: float
    abs_error: float
    rel_error: float
    gap: float


DEFAULT_SCHEDULE = ((4.0, 0.2), (6.0, 0.1), (8.0, 0.05), (10.0, 0.025))


def convergence_study(eps: float, schedule=None) -> list[StudyRow]:
    """Solve a refinement schedule and report approach to 2/eps^2.

    The default schedule scales the canonical (M, nu) pairs by 1/eps, so by
    the LP's exact scaling law the relative errors are independent of eps.
    """
    theory = 2.0 / eps**2
    if schedule is None:
        schedule = [(m / eps, nu / eps) for m, nu in DEFAULT_SCHEDULE]
    rows = []
    for M, nu in schedule:
        inst = build_primal(eps, M, nu)
        sol = solve(inst)
        err = abs(sol.objective - theory)
        rows.append(
            StudyRow(
                M=inst.M, nu=inst.nu, N=inst.N, status=sol.status.value,
                optimum=sol.objective, theory=theory, abs_error=err,
                rel_error=err / theory, gap=sol.gap,
            )
        )
    return rows
