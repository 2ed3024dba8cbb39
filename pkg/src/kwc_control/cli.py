"""Command-line entry point.

``kwc-control run CONFIG`` executes the experiment described by a JSON
configuration; ``kwc-control verify CONFIG`` runs the verification checks on
the configured problem.  Every run writes ``manifest.json`` (resolved
configuration, versions, timings, summary) and CSV files to ``--out``.

Exit codes: 0 success; 1 solver failure or failed verification check;
2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .adjoint import conjugacy_check, cost, gradient, solve_adjoint
from .config import ExperimentSpec, build_problem, linear_data, parse_config
from .errors import ConfigError, SolverError
from .linear import ForcingTriple, check_apriori, constants, solve_P
from .mesh import Mesh1D, TimeGrid
from .optimizer import OPResult, solve_OP, solve_OP0
from .problem import ControlTriple
from .state import StateTrajectory, solve_state
from .verify import (
    check_energy_dissipation,
    check_mosco_bound,
    gronwall_max_ratio,
    random_gronwall_instance,
)

__all__ = ["main", "run_spec"]

log = logging.getLogger("kwc_control")

FMT = "%.17g"


# -- CSV writers ------------------------------------------------------------------


def _write_csv(path: Path, header: Sequence[str], rows) -> str:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([FMT % v if isinstance(v, (float, np.floating)) else v for v in row])
    return path.name


def _field_rows(times, x, *fields):
    for i, t in enumerate(times):
        for j, xj in enumerate(x):
            yield (float(t), float(xj), *(float(f[i, j]) for f in fields))


def write_state(out: Path, traj: StateTrajectory, prefix: str = "") -> list[str]:
    t, x = traj.tgrid.times, traj.mesh.nodes
    files = [
        _write_csv(out / f"{prefix}trajectory.csv", ["t", "x", "eta", "theta"], _field_rows(t, x, traj.eta, traj.theta)),
        _write_csv(
            out / f"{prefix}boundary.csv",
            ["t", "eta_Gamma_0", "eta_Gamma_1"],
            ((float(ti), float(traj.eta_Gamma[i, 0]), float(traj.eta_Gamma[i, 1])) for i, ti in enumerate(t)),
        ),
    ]
    if traj.energy:
        files.append(
            _write_csv(
                out / f"{prefix}energy.csv",
                ["t", "phi", "ghat", "work", "dissipation"],
                ((float(ti), r.phi, r.ghat, r.work, r.dissipation) for ti, r in zip(t, traj.energy)),
            )
        )
    return files


def write_linear(out: Path, tr, name: str = "linear") -> list[str]:
    t, x = tr.tgrid.times, tr.mesh.nodes
    pg = tr.p_Gamma
    return [
        _write_csv(out / f"{name}.csv", ["t", "x", "p", "z"], _field_rows(t, x, tr.p, tr.z)),
        _write_csv(
            out / f"{name}_boundary.csv",
            ["t", "p_Gamma_0", "p_Gamma_1"],
            ((float(ti), float(pg[i, 0]), float(pg[i, 1])) for i, ti in enumerate(t)),
        ),
    ]


def write_controls(out: Path, c: ControlTriple, mesh: Mesh1D, tg: TimeGrid, name: str = "controls") -> list[str]:
    return [
        _write_csv(out / f"{name}.csv", ["t", "x", "u", "v"], _field_rows(tg.times, mesh.nodes, c.u, c.v)),
        _write_csv(
            out / f"{name}_boundary.csv",
            ["t", "u_Gamma_0", "u_Gamma_1"],
            ((float(ti), float(c.u_Gamma[i, 0]), float(c.u_Gamma[i, 1])) for i, ti in enumerate(tg.times)),
        ),
    ]


def write_history(out: Path, results: Sequence[OPResult]) -> str:
    rows = []
    for res in results:
        rows.extend((r.iter, r.eps, r.cost, r.grad_norm, r.step, r.optimality_residual) for r in res.history)
    return _write_csv(out / "history.csv", ["iter", "eps", "cost", "grad_norm", "step", "optimality_residual"], rows)


# -- modes ----------------------------------------------------------------------------


def _run_state(spec, out, summary):
    pb = build_problem(spec)
    traj = solve_state(pb.init, pb.controls, pb.cfg)
    summary["initial_energy"] = traj.energy[0].total
    summary["final_energy"] = traj.energy[-1].total
    summary["newton_iterations_max"] = max(traj.newton_iterations, default=0)
    if traj.certificate_violation:
        summary["certificate_violation_max"] = max(traj.certificate_violation)
    summary["warnings"] = traj.warnings
    return write_state(out, traj), 0


def _run_linear(spec, out, summary):
    q, forcing, p0, z0, nu = linear_data(spec)
    tr = solve_P(p0, z0, q, forcing, nu)
    rep = check_apriori(tr, q, forcing, nu, constants(q, nu, tr.tgrid.T))
    summary["apriori"] = {it.name: {"lhs": it.lhs, "rhs": it.rhs, "passed": it.passed} for it in rep.items}
    return write_linear(out, tr), 0


def _run_adjoint(spec, out, summary):
    pb = build_problem(spec)
    traj = solve_state(pb.init, pb.controls, pb.cfg)
    adj = solve_adjoint(traj, pb.cfg)
    G = gradient(traj, adj, pb.controls, pb.cfg)
    summary["cost"] = cost(traj, pb.controls, pb.cfg)
    summary["optimality_residual"] = G.norm(pb.cfg.mesh, pb.cfg.tgrid)
    files = write_state(out, traj) + write_linear(out, adj, "adjoint")
    files += write_controls(out, G, pb.cfg.mesh, pb.cfg.tgrid, "gradient")
    return files, 0


def _run_optimize(spec, out, summary):
    pb = build_problem(spec)
    res = solve_OP(pb.cfg, pb.init, pb.controls, pb.opt)
    summary.update(status=res.status, message=res.message, iterations=len(res.history) - 1)
    if res.history:
        summary.update(
            initial_cost=res.history[0].cost,
            final_cost=res.history[-1].cost,
            initial_optimality_residual=res.history[0].optimality_residual,
            final_optimality_residual=res.history[-1].optimality_residual,
        )
    files = [write_history(out, [res])]
    files += write_controls(out, res.controls, pb.cfg.mesh, pb.cfg.tgrid)
    if res.state is not None:
        files += write_state(out, res.state)
    return files, 1 if res.status == "solver_failure" else 0


def _run_continuation(spec, out, summary):
    pb = build_problem(spec)
    u, state0, cert, results = solve_OP0(pb.cfg, pb.init, pb.schedule, pb.opt, pb.controls)
    summary.update(
        levels=cert.level_summary,
        nu_max=cert.nu_max,
        sgn_residual_max=cert.sgn_residual_max,
        sgn_residual_trend=[e.get("sgn_residual_max") for e in cert.level_summary],
        adjoint_p_residual_max=float(np.max(cert.adjoint_p_residuals)),
        zeta_values=[float(v) for v in cert.zeta_values],
        optimality_residual=cert.optimality_residual,
    )
    files = [write_history(out, results)]
    files += write_controls(out, u, pb.cfg.mesh, pb.cfg.tgrid)
    files += write_state(out, state0)
    files.append(
        _write_csv(
            out / "certificate.csv",
            ["t", "x", "nu_circ", "xi_circ", "sgn_residual"],
            _field_rows(cert.times, cert.x_cells, cert.nu_field, cert.xi_field, cert.sgn_residual),
        )
    )
    return files, 0


def verification_checks(spec: ExperimentSpec) -> list[dict]:
    """Run the verification checks for a resolved spec.

    Each row has ``check``, ``status`` (``PASS``/``FAIL``/``SKIP``),
    ``margin`` (nonnegative when passing) and ``tolerance``.
    """
    cfgd = spec.config
    vcfg = cfgd["verify"]
    rng = np.random.default_rng(spec.seed)
    rows: list[dict] = []

    def add(name, margin, tol, status=None):
        if status is None:
            status = "PASS" if margin >= 0 else "FAIL"
        rows.append({"check": name, "status": status, "margin": float(margin), "tolerance": float(tol)})

    n = int(vcfg["samples"])
    viol = check_mosco_bound(rng.uniform(0, 2, n), rng.uniform(0, 2, n), rng.standard_cauchy(n))
    add("uniform regularisation bound", 1e-14 - viol, 1e-14)

    worst = max(gronwall_max_ratio(random_gronwall_instance(rng)) for _ in range(int(vcfg["gronwall_instances"])))
    add("discrete Gronwall bound", 1.0 + 1e-12 - worst, 1e-12)

    pb = build_problem(spec)
    zero = ControlTriple.zeros(pb.cfg.mesh, pb.cfg.tgrid)
    traj = solve_state(pb.init, zero, pb.cfg)
    rep = check_energy_dissipation(traj, pb.cfg, C=float(vcfg["C"]))
    add("energy dissipation", rep.worst_margin, rep.tol)

    # configured linear data plus a smooth random perturbation, so that the
    # estimates are exercised even when the configured data vanish
    q, forcing, p0, z0, nu = linear_data(spec)
    extra = ControlTriple.random(q.mesh, q.tgrid, rng)
    forcing = forcing + ForcingTriple(extra.u, extra.u_Gamma, extra.v)
    p0 = p0 + extra.u[0]
    z0 = z0 + extra.v[0]
    z0[[0, -1]] = 0.0
    lin = solve_P(p0, z0, q, forcing, nu, enforce_step_bound=False)
    for it in check_apriori(lin, q, forcing, nu, constants(q, nu, lin.tgrid.T)).items:
        add(f"a-priori {it.name}", it.rhs - it.lhs + 1e-12 * max(abs(it.rhs), abs(it.lhs)), 1e-12)

    if pb.cfg.eps > 0:
        mesh, tg = pb.cfg.mesh, pb.cfg.tgrid
        traj = solve_state(pb.init, pb.controls, pb.cfg)
        a = ControlTriple.random(mesh, tg, rng)
        b = ControlTriple.random(mesh, tg, rng)
        res = conjugacy_check(traj, pb.cfg, ForcingTriple(a.u, a.u_Gamma, a.v), ForcingTriple(b.u, b.u_Gamma, b.v))
        tol = 10.0 * (tg.tau + mesh.h**2)
        add("conjugacy", tol - res, tol)

        G = gradient(traj, solve_adjoint(traj, pb.cfg), pb.controls, pb.cfg)
        worst = 0.0
        delta = 1e-4
        for _ in range(3):
            d = ControlTriple.random(mesh, tg, rng)
            jp = cost(solve_state(pb.init, pb.controls + d.scaled(delta), pb.cfg), pb.controls + d.scaled(delta), pb.cfg)
            jm = cost(solve_state(pb.init, pb.controls - d.scaled(delta), pb.cfg), pb.controls - d.scaled(delta), pb.cfg)
            fd = (jp - jm) / (2 * delta)
            ad = G.inner(d, mesh, tg)
            worst = max(worst, abs(fd - ad) / max(abs(fd), 1e-300))
        add("gradient vs finite differences", 1e-2 - worst, 1e-2)
    else:
        add("conjugacy", 0.0, 0.0, status="SKIP")
        add("gradient vs finite differences", 0.0, 0.0, status="SKIP")
    return rows


def _run_verify(spec, out, summary):
    rows = verification_checks(spec)
    summary["checks"] = rows
    failed = [r["check"] for r in rows if r["status"] == "FAIL"]
    summary["failed"] = failed
    f = _write_csv(
        out / "verify_report.csv",
        ["check", "status", "margin", "tolerance"],
        ((r["check"], r["status"], r["margin"], r["tolerance"]) for r in rows),
    )
    for r in rows:
        print(f"{r['status']:4s}  {r['check']}  (margin {r['margin']:.3g})")
    return [f], 1 if failed else 0


MODE_RUNNERS = {
    "state": _run_state,
    "linear": _run_linear,
    "adjoint": _run_adjoint,
    "optimize": _run_optimize,
    "continuation": _run_continuation,
    "verify": _run_verify,
}


# -- driver ------------------------------------------------------------------------------


def _versions() -> dict:
    import scipy

    return {
        "kwc_control": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_spec(spec: ExperimentSpec, out: Path) -> int:
    """Execute a resolved spec, write outputs and return the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {}
    t0 = time.perf_counter()
    status, code, files = "ok", 0, []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            files, code = MODE_RUNNERS[spec.mode](spec, out, summary)
            if code:
                status = "failed"
        except SolverError as exc:
            status, code = "solver_failure", 1
            summary["error"] = str(exc)
            log.error("solver failure: %s", exc)
    summary["warnings_raised"] = sorted({str(w.message) for w in caught})
    manifest = {
        "mode": spec.mode,
        "status": status,
        "exit_code": code,
        "config": spec.to_dict(),
        "versions": _versions(),
        "timings": {"total_seconds": time.perf_counter() - t0},
        "outputs": files,
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2))
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kwc-control", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the configured experiment"), ("verify", "run the verification checks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, help="override the random seed")
        p.add_argument("--tau", type=float, help="override the time step")
        p.add_argument("--cells", type=int, help="override the number of cells")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {"seed": args.seed, "tau": args.tau, "cells": args.cells}
    if args.command == "verify":
        overrides["mode"] = "verify"
    try:
        spec = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return run_spec(spec, Path(args.out))
    except (ConfigError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
