"""Figure rendering for the CLI report paths.

Everything here is opt-in (the CLI's --plot flag); data outputs never depend
on matplotlib.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_dual_family(trajectories, path: str, overlay_closed_form: bool = False) -> str:
    """One panel, eta(v) per lambda, colored by verdict; optional critical-
    trajectory overlay (dashed)."""
    from .duals import Feasibility, closed_form_eta

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    colors = {
        Feasibility.FEASIBLE: "tab:blue",
        Feasibility.INFEASIBLE: "tab:red",
        Feasibility.INCONCLUSIVE: "tab:gray",
    }
    ymin = 0.0
    for traj in trajectories:
        ax.plot(traj.grid, traj.eta, color=colors[traj.verdict], lw=1.4,
                label=f"$\\lambda$={traj.lam:g} ({traj.verdict.value})")
        ymin = min(ymin, float(traj.eta.min()))
    if overlay_closed_form and trajectories:
        t0 = trajectories[0]
        ax.plot(t0.grid, closed_form_eta(t0.grid, t0.eps, t0.n), "k--", lw=1.0,
                label="critical closed form")
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel("v")
    ax.set_ylabel(r"$\eta(v)$")
    ax.set_ylim(max(ymin * 1.1, -50.0 * max(1.0, abs(trajectories[0].lam))), None)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_lp_profile(instance, solution, path: str) -> str:
    """Optimal density profile on a log axis, with the mass constraint noted."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    positive = solution.g > 0
    ax.semilogy(instance.v[positive], solution.g[positive], ".-", ms=3, lw=0.8)
    ax.set_xlabel("v")
    ax.set_ylabel("g(v)")
    ax.set_title(
        f"eps={instance.eps:g}, M={instance.M:g}, nu={instance.nu:g}: "
        f"objective {solution.objective:.6f}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_convergence(rows, path: str) -> str:
    """Relative error against grid step, log-log."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog([r.nu for r in rows], [r.rel_error for r in rows], "o-")
    ax.set_xlabel(r"grid step $\nu$")
    ax.set_ylabel("relative error of LP optimum")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
