"""Command-line harness: privatize data, estimate MSE, audit, certify.

Subcommands
    privatize   add optimal noise to a CSV of values
    mse         Monte Carlo mean squared error against the closed form
    audit       privacy audits (lipschitz / dp-ratio / postprocess / cdf / gof)
    dual        dual-certificate trajectories and critical-lambda bisection
    lp          discretized LP optimum, duality certificate, convergence study

Configuration may come from a flat JSON file (--config); keys use the long
flag names ("epsilon", "adjacency", ...).  Explicit command-line flags win
over the file, the file wins over built-in defaults, and unknown keys are
rejected.  Every command writes a sidecar manifest (<output>.manifest.json,
or lipnoise-<command>.manifest.json without --output) recording the merged
configuration, seed, and wall time; primary outputs themselves are
byte-reproducible for a fixed seed.

Exit codes: 0 success, 2 parameter/config/parse errors, 3 numeric failures
(inconclusive certificates, iteration limits), 4 I/O errors.

Note: privatize applies noise calibrated to Lipschitz constant epsilon; the
resulting indistinguishability bound for inputs at adjacency distance alpha
is alpha * epsilon.  The audit subcommand is where alpha enters explicitly.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .audit import (
    cdf_lipschitz_audit,
    dp_ratio_audit,
    empirical_mse,
    lipschitz_report,
    postprocess_audit,
    radial_gof,
)
from .duals import (
    CertificateError,
    bisect_lambda_star,
    closed_form_eta,
    integrate_dual_1d,
    integrate_dual_radial,
)
from .lp import LpStatus, build_primal, convergence_study, duality_gap_report, solve
from .mechanisms import (
    StaircaseModel,
    density_model,
    gaussian_model,
    sample,
    theoretical_mse,
)
from .params import Adjacency, Grid1D, MechanismSpec, PrivacyParams
from .rng import GENERATOR, STREAM_VERSION, stream


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header: list[str], rows) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_fmt(x) for x in row))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# defaults and config merging

DEFAULTS: dict[str, dict] = {
    "privatize": {
        "input": None, "output": None, "epsilon": 1.0, "adjacency": "l1",
        "n": None, "m": None, "seed": 0,
    },
    "mse": {
        "epsilon": 1.0, "adjacency": "l1", "n": 1, "m": 1, "trials": 100_000,
        "seed": 0, "output": None, "format": "json",
    },
    "audit": {
        "check": "lipschitz", "density": "laplace1d", "epsilon": 1.0, "n": 1,
        "m": 1, "alpha": 1.0, "trials": 200_000, "seed": 0,
        "quantization": 0.25, "sigma": 1.0, "post": "sign",
        "output": None, "format": "json",
    },
    "dual": {
        "mode": "1d", "epsilon": 1.0, "n": 2, "lambda": None, "bisect": False,
        "tol": 1e-3, "vmax": None, "seed": 0, "output": None, "plot": False,
        "overlay": False,
    },
    "lp": {
        "epsilon": 1.0, "M": 8.0, "nu": 0.05, "study": False, "schedule": None,
        "seed": 0, "output": None, "plot": False, "format": "json",
    },
}


def _merge_config(command: str, cli_args: dict, config_path: str | None) -> dict:
    merged = dict(DEFAULTS[command])
    if config_path is not None:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", code=4)
        except json.JSONDecodeError as exc:
            raise CliError(f"config is not valid JSON: {exc}", code=2)
        if not isinstance(loaded, dict):
            raise CliError("config must be a flat JSON object", code=2)
        unknown = sorted(set(loaded) - set(merged))
        if unknown:
            raise CliError(
                f"unknown config keys for '{command}': {', '.join(unknown)}", code=2
            )
        merged.update(loaded)
    merged.update({k: v for k, v in cli_args.items() if v is not None})
    return merged


def _manifest(command: str, merged: dict, outputs: list[str], t0: float,
              extra: dict | None = None) -> dict:
    canon = json.dumps(merged, sort_keys=True, default=str)
    out = {
        "command": command,
        "package_version": __version__,
        "generator": GENERATOR,
        "stream_version": STREAM_VERSION,
        "seed": merged.get("seed"),
        "config": merged,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "outputs": outputs,
        "wall_time_s": time.monotonic() - t0,
    }
    if extra:
        out.update(extra)
    return out


def _write_manifest(command: str, merged: dict, outputs: list[str], t0: float,
                    extra: dict | None = None) -> None:
    base = merged.get("output")
    path = f"{base}.manifest.json" if base else f"lipnoise-{command}.manifest.json"
    _write_text(path, _dump_json(_manifest(command, merged, outputs, t0, extra)))


# ---------------------------------------------------------------------------
# parameter helpers


def _positive(cfg: dict, key: str, kind=float):
    val = cfg.get(key)
    try:
        val = kind(val)
    except (TypeError, ValueError):
        raise CliError(f"--{key} must be a {kind.__name__}, got {val!r}")
    if val <= 0 or (kind is float and not math.isfinite(val)):
        raise CliError(f"--{key} must be positive, got {val}")
    return val


def _spec_from(cfg: dict, n: int | None = None, m: int | None = None) -> MechanismSpec:
    eps = _positive(cfg, "epsilon")
    adjacency = cfg.get("adjacency", "l1")
    try:
        adjacency = Adjacency(adjacency)
    except ValueError:
        raise CliError(f"--adjacency must be one of l1, l2, composite, got {adjacency!r}")
    n = n if n is not None else int(cfg.get("n") or 1)
    m = m if m is not None else int(cfg.get("m") or 1)
    try:
        return MechanismSpec.optimal_for(PrivacyParams(eps, adjacency, n=n, m=m))
    except ValueError as exc:
        raise CliError(str(exc))


# ---------------------------------------------------------------------------
# privatize


@dataclass
class PrivatizeJob:
    input: str
    output: str
    epsilon: float
    adjacency: Adjacency
    n: int | None = None
    m: int | None = None
    seed: int = 0


def _read_table(path: str):
    """Returns (header, rows-of-strings).  Raises CliError with location info."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise CliError(f"cannot read input: {exc}", code=4)
    if not rows:
        raise CliError("input CSV is empty")
    header = rows[0]
    width = len(header)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise CliError(f"row {r}: expected {width} fields, found {len(row)}")
    return header, rows[1:]


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise CliError(f"row {row}, column {col!r}: not a number: {text!r}")


def cmd_privatize(job: PrivatizeJob) -> dict:
    header, rows = _read_table(job.input)
    lowered = [h.strip().lower() for h in header]
    long_form = lowered == ["user_id", "dim", "value"]

    if long_form:
        users: dict[str, dict[int, float]] = {}
        order: list[str] = []
        for r, row in enumerate(rows, start=2):
            uid = row[0]
            dim = int(_parse_float(row[1], r, "dim"))
            val = _parse_float(row[2], r, "value")
            if uid not in users:
                users[uid] = {}
                order.append(uid)
            if dim in users[uid]:
                raise CliError(f"row {r}: duplicate (user_id, dim) = ({uid!r}, {dim})")
            users[uid][dim] = val
        dims = sorted(users[order[0]])
        for uid in order:
            if sorted(users[uid]) != dims:
                raise CliError(f"user {uid!r}: inconsistent dim set")
        data = np.array([[users[uid][d] for d in dims] for uid in order])
        id_col = None
    else:
        value_cols = [j for j, h in enumerate(lowered) if h != "id"]
        id_col = lowered.index("id") if "id" in lowered else None
        data = np.empty((len(rows), len(value_cols)))
        for r, row in enumerate(rows, start=2):
            for k, j in enumerate(value_cols):
                data[r - 2, k] = _parse_float(row[j], r, header[j])
        if data.size == 0:
            raise CliError("input has no numeric values")

    rows_n, cols_m = data.shape
    if job.adjacency is Adjacency.COMPOSITE:
        n, m = rows_n, cols_m
    else:
        n, m = rows_n * cols_m, 1
    if job.n is not None and job.n != n:
        raise CliError(f"--n {job.n} does not match data (inferred n={n})")
    if job.m is not None and job.m != m:
        raise CliError(f"--m {job.m} does not match data (inferred m={m})")

    spec = _spec_from({"epsilon": job.epsilon, "adjacency": job.adjacency.value}, n=n, m=m)
    noise = sample(spec, stream(job.seed, "privatize"), size=1)[0]
    noised = data + noise.reshape(data.shape)

    if long_form:
        out_rows = []
        i = 0
        for uid in order:
            for k, d in enumerate(dims):
                out_rows.append([uid, d, _fmt(float(noised[i, k]))])
            i += 1
        text = _csv_text(header, out_rows)
    else:
        out_rows = []
        for r, row in enumerate(rows):
            new = list(row)
            k = 0
            for j in range(len(header)):
                if j == id_col:
                    continue
                new[j] = _fmt(float(noised[r, k]))
                k += 1
            out_rows.append(new)
        text = _csv_text(header, out_rows)
    _write_text(job.output, text)
    return {
        "command": "privatize",
        "mechanism": spec.kind.value,
        "epsilon": job.epsilon,
        "adjacency": job.adjacency.value,
        "n": n,
        "m": m,
        "values": int(data.size),
        "theoretical_mse": theoretical_mse(spec),
        "output": job.output,
    }


# ---------------------------------------------------------------------------
# the experiment-style commands share a light config container


@dataclass
class ExperimentConfig:
    command: str
    options: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.options[key]

    def get(self, key, default=None):
        return self.options.get(key, default)


def cmd_mse(cfg: ExperimentConfig) -> dict:
    trials = _positive(cfg.options, "trials", int)
    spec = _spec_from(cfg.options)
    est = empirical_mse(spec, trials, stream(int(cfg.get("seed") or 0), "mse"))
    theory = theoretical_mse(spec)
    z = (est.estimate - theory) / est.stderr if est.stderr > 0 else math.inf
    return {
        "command": "mse",
        "mechanism": spec.kind.value,
        "adjacency": spec.params.adjacency.value,
        "epsilon": spec.epsilon,
        "n": spec.params.n,
        "m": spec.params.m,
        "trials": trials,
        "estimate": est.estimate,
        "stderr": est.stderr,
        "theory": theory,
        "abs_error": abs(est.estimate - theory),
        "z_score": z,
    }


_AUDIT_ADJACENCY = {
    "laplace1d": Adjacency.L1,
    "product_l1": Adjacency.L1,
    "radial_l2": Adjacency.L2,
    "composite": Adjacency.COMPOSITE,
    "staircase": Adjacency.L1,
    "gaussian": Adjacency.L1,
}


def _audit_model(cfg: dict):
    density = cfg.get("density")
    eps = _positive(cfg, "epsilon")
    if density == "staircase":
        return StaircaseModel(eps, _positive(cfg, "quantization")).model(), None
    if density == "gaussian":
        return gaussian_model(_positive(cfg, "sigma")), None
    adjacency = _AUDIT_ADJACENCY.get(density)
    if adjacency is None:
        raise CliError(f"--density must be one of {sorted(_AUDIT_ADJACENCY)}, got {density!r}")
    n = int(cfg.get("n") or 1)
    m = int(cfg.get("m") or 1)
    if density == "laplace1d":
        n = m = 1
    try:
        spec = MechanismSpec.optimal_for(PrivacyParams(eps, adjacency, n=n, m=m))
    except ValueError as exc:
        raise CliError(str(exc))
    return density_model(spec), spec


def cmd_audit(cfg: ExperimentConfig) -> dict:
    options = cfg.options
    check = options.get("check")
    eps = _positive(options, "epsilon")
    seed = int(options.get("seed") or 0)
    trials = _positive(options, "trials", int)
    if check == "lipschitz":
        model, spec = _audit_model(options)
        adjacency = _AUDIT_ADJACENCY[options["density"]]
        grid = Grid1D(-8.0 / eps, 8.0 / eps, 0.125 / eps)
        report = lipschitz_report(
            model, eps, adjacency, grid=grid, rng=stream(seed, "audit/lipschitz")
        )
    elif check == "dp-ratio":
        model, spec = _audit_model(options)
        if spec is None:
            raise CliError("dp-ratio audit needs a mechanism density, not a control")
        report = dp_ratio_audit(
            spec, float(options.get("alpha")), trials=trials, rng=stream(seed, "audit/dp-ratio")
        )
    elif check == "postprocess":
        model, spec = _audit_model(options)
        if spec is None:
            raise CliError("postprocess audit needs a mechanism density, not a control")
        post = options.get("post")
        if post == "sign":
            edges = np.array([0.0])
        else:
            try:
                edges = np.array([float(t) for t in str(post).split(",")])
            except ValueError:
                raise CliError(f"--post must be 'sign' or comma-separated edges, got {post!r}")
        report = postprocess_audit(
            spec, edges, float(options.get("alpha")), trials=trials,
            rng=stream(seed, "audit/postprocess"),
        )
    elif check == "cdf":
        density = options.get("density")
        if density == "staircase":
            mech = StaircaseModel(eps, _positive(options, "quantization"))
        else:
            _, mech = _audit_model(options)
            if mech is None or mech.dimension != 1:
                raise CliError("cdf audit needs a one-dimensional mechanism or the staircase")
        probes = Grid1D(-5.0 / eps, 5.0 / eps, 0.1 / eps)
        report = cdf_lipschitz_audit(mech, eps, probes, trials=trials, rng=stream(seed, "audit/cdf"))
    elif check == "gof":
        _, spec = _audit_model(options)
        if spec is None or spec.kind.value != "radial_l2":
            raise CliError("gof audit is defined for radial_l2 densities")
        draws = sample(spec, stream(seed, "audit/gof"), size=trials)
        report = radial_gof(draws, spec.params.n, eps)
    else:
        raise CliError(
            f"--check must be one of lipschitz, dp-ratio, postprocess, cdf, gof; got {check!r}"
        )
    out = {"command": "audit", "density": options.get("density"), "seed": seed}
    out.update(report.to_json())
    return out


def cmd_dual(cfg: ExperimentConfig) -> tuple[dict, list[tuple[str, str]]]:
    """Returns (summary, extra_files) where extra_files are (path, text) pairs."""
    options = cfg.options
    mode = options.get("mode")
    if mode not in ("1d", "radial"):
        raise CliError(f"--mode must be 1d or radial, got {mode!r}")
    eps = _positive(options, "epsilon")
    n = int(options.get("n") or 2) if mode == "radial" else 1
    if mode == "radial" and n < 2:
        raise CliError("radial mode needs --n >= 2")
    vmax = options.get("vmax")
    vmax = float(vmax) if vmax is not None else 22.0 / eps
    lambdas = options.get("lambda")
    do_bisect = bool(options.get("bisect"))
    if lambdas is None and not do_bisect:
        raise CliError("dual needs --lambda values and/or --bisect")

    summary: dict = {"command": "dual", "mode": mode, "epsilon": eps, "n": n, "v_max": vmax}
    files: list[tuple[str, str]] = []
    trajectories = []
    if lambdas is not None:
        if isinstance(lambdas, str):
            try:
                lam_list = [float(t) for t in lambdas.split(",")]
            except ValueError:
                raise CliError(f"--lambda must be comma-separated floats, got {lambdas!r}")
        elif isinstance(lambdas, (int, float)):
            lam_list = [float(lambdas)]
        else:
            lam_list = [float(t) for t in lambdas]
        entries = []
        for i, lam in enumerate(lam_list):
            if mode == "1d":
                traj = integrate_dual_1d(lam, eps, v_max=vmax)
            else:
                traj = integrate_dual_radial(lam, eps, n, r_max=vmax)
            trajectories.append(traj)
            entry = {
                "lambda": lam,
                "verdict": traj.verdict.value,
                "diverged_at": traj.diverged_at,
                "crossings": [c for c, _ in traj.crossings],
                "breakpoints": list(traj.breakpoints) if traj.breakpoints else None,
            }
            if options.get("output"):
                path = f"{options['output']}_traj{i}.csv"
                if options.get("overlay"):
                    ref = closed_form_eta(traj.grid, eps, n)
                    rows = [(v, e, s, r) for (v, e, s), r in zip(traj.rows(), ref)]
                    files.append((path, _csv_text(
                        ["v_or_r", "eta", "branch_sign", "eta_critical"], rows)))
                else:
                    files.append((path, _csv_text(["v_or_r", "eta", "branch_sign"], traj.rows())))
                entry["csv"] = path
            entries.append(entry)
        summary["trajectories"] = entries
        if any(t.verdict.value == "Inconclusive" for t in trajectories):
            summary["advice"] = "inconclusive at this horizon; raise --vmax"
    if do_bisect:
        tol = _positive(options, "tol")
        res = bisect_lambda_star(eps, kind=mode, n=n, tol=tol, v_max=vmax)
        summary["bisect"] = {
            "estimate": res.estimate,
            "bracket_lo": res.bracket[0],
            "bracket_hi": res.bracket[1],
            "iterations": res.iterations,
            "theory": res.theory,
        }
    if options.get("plot") and trajectories:
        if not options.get("output"):
            raise CliError("--plot needs --output to name the figure file")
        from .figures import render_dual_family

        fig_path = f"{options['output']}_family.png"
        render_dual_family(trajectories, fig_path, overlay_closed_form=bool(options.get("overlay")))
        summary["figure"] = fig_path
    return summary, files


def cmd_lp(cfg: ExperimentConfig) -> tuple[dict, list[tuple[str, str]]]:
    options = cfg.options
    eps = _positive(options, "epsilon")
    files: list[tuple[str, str]] = []
    if options.get("study"):
        schedule = options.get("schedule")
        if schedule is not None:
            try:
                pairs = [tuple(map(float, part.split(":"))) for part in str(schedule).split(",")]
                if any(len(p) != 2 for p in pairs):
                    raise ValueError
            except ValueError:
                raise CliError(f"--schedule must look like '4:0.2,6:0.1', got {schedule!r}")
        else:
            pairs = None
        rows = convergence_study(eps, pairs)
        if any(r.status != LpStatus.OPTIMAL.value for r in rows):
            raise CliError("a study instance failed to certify optimality", code=3)
        header = ["M", "nu", "N", "status", "optimum", "theory", "abs_error", "rel_error", "gap"]
        table = [[r.M, r.nu, r.N, r.status, r.optimum, r.theory, r.abs_error, r.rel_error, r.gap]
                 for r in rows]
        summary = {"command": "lp", "epsilon": eps, "study": [dict(zip(header, t)) for t in table]}
        if options.get("output"):
            path = f"{options['output']}_study.csv"
            files.append((path, _csv_text(header, table)))
            summary["csv"] = path
            if options.get("plot"):
                from .figures import render_convergence

                fig = f"{options['output']}_convergence.png"
                render_convergence(rows, fig)
                summary["figure"] = fig
        elif options.get("plot"):
            raise CliError("--plot needs --output to name the figure file")
        return summary, files

    M = _positive(options, "M")
    nu = _positive(options, "nu")
    try:
        inst = build_primal(eps, M, nu)
    except ValueError as exc:
        raise CliError(str(exc))
    sol = solve(inst)
    if sol.status is not LpStatus.OPTIMAL:
        raise CliError(f"LP did not certify: status {sol.status.value}", code=3)
    report = duality_gap_report(inst, sol)
    summary = {
        "command": "lp", "epsilon": eps, "M": inst.M, "nu": inst.nu, "N": inst.N,
        "degenerate_grid": inst.degenerate,
    }
    summary.update(report)
    if options.get("output"):
        path = f"{options['output']}_profile.csv"
        files.append((path, _csv_text(
            ["i", "v", "g", "kappa", "mu"],
            [(i, inst.v[i], sol.g[i],
              sol.kappa[i] if i < inst.pairs else "",
              sol.mu[i] if i < inst.pairs else "")
             for i in range(inst.N)],
        )))
        summary["csv"] = path
        if options.get("plot"):
            from .figures import render_lp_profile

            fig = f"{options['output']}_profile.png"
            render_lp_profile(inst, sol, fig)
            summary["figure"] = fig
    elif options.get("plot"):
        raise CliError("--plot needs --output to name the figure file")
    return summary, files


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lipnoise", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat JSON file of option values")
        p.add_argument("--seed", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--output")

    p = sub.add_parser("privatize", help="add calibrated noise to a CSV")
    add_common(p)
    p.add_argument("--input")
    p.add_argument("--adjacency", choices=[a.value for a in Adjacency])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)

    p = sub.add_parser("mse", help="empirical vs theoretical mean squared error")
    add_common(p)
    p.add_argument("--adjacency", choices=[a.value for a in Adjacency])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("audit", help="privacy audits")
    add_common(p)
    p.add_argument("--check", choices=["lipschitz", "dp-ratio", "postprocess", "cdf", "gof"])
    p.add_argument("--density",
                   choices=["laplace1d", "product_l1", "radial_l2", "composite",
                            "staircase", "gaussian"])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--quantization", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--post")
    p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("dual", help="dual certificates: trajectories and bisection")
    add_common(p)
    p.add_argument("--mode", choices=["1d", "radial"])
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", help="comma-separated lambda values")
    p.add_argument("--bisect", action="store_true", default=None)
    p.add_argument("--tol", type=float)
    p.add_argument("--vmax", type=float)
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--overlay", action="store_true", default=None)

    p = sub.add_parser("lp", help="discretized LP certificate")
    add_common(p)
    p.add_argument("--M", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--study", action="store_true", default=None)
    p.add_argument("--schedule", help="comma-separated M:nu pairs, e.g. 4:0.2,6:0.1")
    p.add_argument("--plot", action="store_true", default=None)
    p.add_argument("--format", choices=["csv", "json"])

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command = args.command
    cli_args = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if "lam" in cli_args:
        cli_args["lambda"] = cli_args.pop("lam")
    t0 = time.monotonic()
    exit_code = 0
    try:
        merged = _merge_config(command, cli_args, args.config)
        outputs: list[str] = []
        extra: dict | None = None
        if command == "privatize":
            if not merged.get("input") or not merged.get("output"):
                raise CliError("privatize needs --input and --output")
            job = PrivatizeJob(
                input=merged["input"], output=merged["output"],
                epsilon=_positive(merged, "epsilon"),
                adjacency=Adjacency(merged.get("adjacency", "l1")),
                n=merged.get("n"), m=merged.get("m"), seed=int(merged.get("seed") or 0),
            )
            summary = cmd_privatize(job)
            outputs.append(job.output)
            extra = {"theoretical_mse": summary["theoretical_mse"],
                     "mechanism": summary["mechanism"]}
            sys.stdout.write(_dump_json(summary))
        elif command in ("mse", "audit"):
            cfg = ExperimentConfig(command, merged)
            summary = cmd_mse(cfg) if command == "mse" else cmd_audit(cfg)
            if merged.get("format") == "csv":
                keys = [k for k, v in summary.items() if not isinstance(v, (dict, list))]
                text = _csv_text(keys, [[summary[k] for k in keys]])
            else:
                text = _dump_json(summary)
            _write_text(merged.get("output"), text)
            if merged.get("output"):
                outputs.append(merged["output"])
        else:
            cfg = ExperimentConfig(command, merged)
            summary, files = cmd_dual(cfg) if command == "dual" else cmd_lp(cfg)
            for path, text in files:
                _write_text(path, text)
                outputs.append(path)
            if "figure" in summary:
                outputs.append(summary["figure"])
            report_path = f"{merged['output']}_report.json" if merged.get("output") else None
            _write_text(report_path, _dump_json(summary))
            if report_path:
                outputs.append(report_path)
            if summary.get("advice"):
                print(f"warning: {summary['advice']}", file=sys.stderr)
                exit_code = 3
        _write_manifest(command, merged, outputs, t0, extra)
        return exit_code
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CertificateError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
