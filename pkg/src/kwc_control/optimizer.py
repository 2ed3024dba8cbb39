"""Gradient-based solution of the control problem and eps-continuation.

:func:`solve_OP` minimises the cost for a fixed ``eps > 0`` by gradient
descent in the control inner product (fixed step, Armijo backtracking, or
Barzilai--Borwein steps safeguarded by Armijo backtracking, which keeps the
accepted cost history nonincreasing).  Each cost/gradient evaluation is one
state solve plus one adjoint solve.

:func:`solve_OP0` approaches the singular problem ``eps = 0`` by warm-started
continuation over a decreasing list of ``eps`` values and then evaluates a
limit certificate for the computed point: the multiplier ``nu = f_eps'(theta_x)``
and its distance to ``Sgn^1(theta_x)``, residuals of the limit adjoint
equation for ``p``, the remainder functional of the limit ``z`` equation on
random test functions, and the optimality residual.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .adjoint import cost, gradient, solve_adjoint
from .errors import SolverError, StepSizeError
from .mesh import node_from_cells
from .problem import ControlTriple, ProblemConfig, StateTriple
from .regularization import f_eps_prime, sgn_residual
from .state import StateTrajectory, solve_state

__all__ = [
    "OptimizerConfig",
    "HistoryRow",
    "OPResult",
    "ContinuationSchedule",
    "LimitCertificate",
    "solve_OP",
    "solve_OP0",
    "limit_certificate",
    "mosco_cost_gap_bound",
]

log = logging.getLogger(__name__)

STRATEGIES = ("fixed", "armijo", "bb")


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the descent method.

    Attributes
    ----------
    max_iters : int
    c1 : float
        Armijo sufficient-decrease constant in ``(0, 1)``.
    backtrack : float
        Step reduction factor in ``(0, 1)``.
    initial_step : float
        First trial step (and the step of the ``"fixed"`` strategy).
    tol : float
        Stop when the gradient norm drops below ``tol``.
    rel_tol : float
        Stop when the gradient norm drops below ``rel_tol`` times its
        initial value (0 disables).
    strategy : str
        ``"fixed"``, ``"armijo"`` or ``"bb"``.
    max_backtracks : int
    """

    max_iters: int = 200
    c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    tol: float = 1e-8
    rel_tol: float = 0.0
    strategy: str = "bb"
    max_backtracks: int = 40

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError("Armijo constant c1 must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not (self.initial_step > 0 and self.tol > 0 and self.rel_tol >= 0):
            raise ValueError("step and tolerances must be positive")
        if self.max_iters < 0 or self.max_backtracks < 1:
            raise ValueError("iteration limits must be positive")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown step strategy {self.strategy!r}; choose from {STRATEGIES}")


@dataclass(frozen=True)
class HistoryRow:
    """One accepted iterate.  ``step`` is the step that produced it (0 first)."""

    iter: int
    eps: float
    cost: float
    grad_norm: float
    step: float
    optimality_residual: float


@dataclass
class OPResult:
    """Outcome of :func:`solve_OP`.

    ``status`` is ``"converged"``, ``"max_iters"``, ``"line_search_failed"``
    or ``"solver_failure"`` (then ``message`` holds the diagnostic).
    """

    controls: ControlTriple
    state: StateTrajectory | None
    history: list[HistoryRow]
    status: str
    message: str = ""
    gradient: ControlTriple | None = None
    elapsed: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _evaluate(cfg: ProblemConfig, init: StateTriple, controls: ControlTriple, need_grad: bool = True):
    traj = solve_state(init, controls, cfg)
    J = cost(traj, controls, cfg)
    if not need_grad:
        return J, traj, None
    adj = solve_adjoint(traj, cfg)
    return J, traj, gradient(traj, adj, controls, cfg)


def solve_OP(
    cfg: ProblemConfig,
    init: StateTriple,
    init_controls: ControlTriple | None = None,
    opt: OptimizerConfig | None = None,
) -> OPResult:
    """Minimise the cost for fixed ``eps > 0`` by gradient descent.

    Parameters
    ----------
    cfg : ProblemConfig
        Must have ``eps > 0``.
    init : StateTriple
        Initial state of the dynamics.
    init_controls : ControlTriple, optional
        Starting controls (zero by default).
    opt : OptimizerConfig, optional

    Returns
    -------
    OPResult
        The last accepted controls, their state trajectory and gradient, and
        the history of accepted iterates.  Armijo-type strategies accept a
        step only if ``J_new <= J - c1 s |grad|^2``.
    """
    if not cfg.eps > 0:
        raise ValueError("solve_OP needs eps > 0; use solve_OP0 for eps = 0")
    opt = opt or OptimizerConfig()
    mesh, tg = cfg.mesh, cfg.tgrid
    u = init_controls if init_controls is not None else ControlTriple.zeros(mesh, tg)
    t0 = time.perf_counter()
    history: list[HistoryRow] = []
    try:
        J, traj, G = _evaluate(cfg, init, u)
    except (SolverError, StepSizeError) as exc:
        return OPResult(u, None, history, "solver_failure", str(exc), elapsed=time.perf_counter() - t0)
    gn = G.norm(mesh, tg)
    g0 = gn
    history.append(HistoryRow(0, cfg.eps, J, gn, 0.0, gn))
    s_next = opt.initial_step
    prev_u = prev_G = None
    status, message = "max_iters", ""
    for it in range(1, opt.max_iters + 1):
        if gn <= opt.tol or (opt.rel_tol > 0 and gn <= opt.rel_tol * g0):
            status = "converged"
            break
        if opt.strategy == "bb" and prev_u is not None:
            du, dg = u - prev_u, G - prev_G
            sy = du.inner(dg, mesh, tg)
            s_next = du.inner(du, mesh, tg) / sy if sy > 0 else opt.initial_step
            s_next = min(max(s_next, 1e-8), 1e8)
        s = s_next if opt.strategy != "fixed" else opt.initial_step
        accepted = False
        try:
            for _ in range(opt.max_backtracks):
                trial = u - G.scaled(s)
                Jt, traj_t, _ = _evaluate(cfg, init, trial, need_grad=False)
                if opt.strategy == "fixed" or Jt <= J - opt.c1 * s * gn**2:
                    accepted = True
                    break
                s *= opt.backtrack
            if not accepted:
                status = "line_search_failed"
                message = f"no sufficient decrease after {opt.max_backtracks} backtracks"
                break
            adj = solve_adjoint(traj_t, cfg)
            Gt = gradient(traj_t, adj, trial, cfg)
        except (SolverError, StepSizeError) as exc:
            status, message = "solver_failure", str(exc)
            break
        prev_u, prev_G = u, G
        u, J, traj, G = trial, Jt, traj_t, Gt
        gn = G.norm(mesh, tg)
        history.append(HistoryRow(it, cfg.eps, J, gn, s, gn))
        if opt.strategy == "armijo":
            s_next = min(2.0 * s, opt.initial_step * 1e3)
        log.debug("iter %d eps %.3g cost %.6e grad %.3e step %.3e", it, cfg.eps, J, gn, s)
    else:
        if gn <= opt.tol or (opt.rel_tol > 0 and gn <= opt.rel_tol * g0):
            status = "converged"
    return OPResult(u, traj, history, status, message, G, time.perf_counter() - t0)


# -- continuation ---------------------------------------------------------------


@dataclass(frozen=True)
class ContinuationSchedule:
    """Strictly decreasing ``eps`` levels with one optimizer setting per level."""

    eps_levels: tuple[float, ...]
    level_opts: tuple[OptimizerConfig, ...] | None = None

    def __post_init__(self):
        e = tuple(float(x) for x in self.eps_levels)
        if not e:
            raise ValueError("continuation schedule is empty")
        if any(x < 0 or not math.isfinite(x) for x in e):
            raise ValueError("eps levels must be finite and nonnegative")
        if any(b >= a for a, b in zip(e, e[1:])):
            raise ValueError("eps levels must be strictly decreasing")
        object.__setattr__(self, "eps_levels", e)
        if self.level_opts is not None and len(self.level_opts) != len(e):
            raise ValueError("one optimizer setting per level is required")

    @classmethod
    def geometric(cls, eps_start: float, factor: float, n_levels: int, opt: OptimizerConfig | None = None):
        levels = tuple(eps_start * factor**k for k in range(n_levels))
        return cls(levels, None if opt is None else (opt,) * n_levels)

    def opt_for(self, k: int, default: OptimizerConfig) -> OptimizerConfig:
        return default if self.level_opts is None else self.level_opts[k]


@dataclass
class LimitCertificate:
    """Computable evidence for the limit optimality system.

    Fields are indexed by time step ``i = 1..N`` (rows) and cell (columns).

    Attributes
    ----------
    eps : float
        Last smooth level the multipliers come from.
    times, x_cells : ndarray
    nu_field : ndarray, shape (N, n)
        ``f_eps'(theta_x)``; bounded by 1 in absolute value.
    xi_field : ndarray, shape (N, n)
        ``f_eps'(theta_x) z_x``, so that ``alpha'(eta) xi`` is the coupling
        term ``omega z_x`` of the adjoint ``p`` equation.
    sgn_residual : ndarray, shape (N, n)
        Distance of ``nu`` to ``Sgn^1(theta_x)`` of the ``eps = 0`` state.
    sgn_residual_max : float
    adjoint_p_residuals : ndarray, shape (N,)
        Relative residual of the limit ``p`` equation per step.
    zeta_values : ndarray
        Remainder functional of the limit ``z`` equation on random test
        functions (normalised by the test-function norm).
    optimality_residual : float
    level_summary : list of dict
        Per level: ``eps``, final cost, gradient norm, status,
        ``sgn_residual_max`` and the cost at the warm start.
    """

    eps: float
    times: np.ndarray
    x_cells: np.ndarray
    nu_field: np.ndarray
    xi_field: np.ndarray
    sgn_residual: np.ndarray
    sgn_residual_max: float
    adjoint_p_residuals: np.ndarray
    zeta_values: np.ndarray
    optimality_residual: float
    level_summary: list = field(default_factory=list)

    @property
    def nu_max(self) -> float:
        return float(np.max(np.abs(self.nu_field)))


def mosco_cost_gap_bound(cfg: ProblemConfig, traj: StateTrajectory) -> float:
    """``sum_i tau int alpha(eta_i)``: the factor of ``|eps - eps'|`` that bounds
    the change of the regularised energy density at fixed state."""
    h = cfg.mesh.h
    al = cfg.material.alpha(traj.eta[1:])
    return float(cfg.tgrid.tau * h * np.sum(0.5 * (al[:, :-1] + al[:, 1:])))


FACET_TOL = 1e-9


def _facet_slopes(traj: StateTrajectory, mesh) -> np.ndarray:
    """Cell slopes of ``theta`` for steps ``1..N`` with roundoff-level values
    (``<= FACET_TOL`` relative to the largest slope) set to exactly zero."""
    tx = np.diff(traj.theta[1:], axis=1) / mesh.h
    thresh = FACET_TOL * (1.0 + float(np.max(np.abs(tx))))
    return np.where(np.abs(tx) <= thresh, 0.0, tx)


def limit_certificate(
    cfg: ProblemConfig,
    init: StateTriple,
    controls: ControlTriple,
    smooth_traj: StateTrajectory,
    eps: float,
    n_tests: int = 20,
) -> LimitCertificate:
    """Evaluate the limit optimality system at ``controls``.

    ``smooth_traj`` is the state of the last smooth level ``eps``; the
    multipliers and the adjoint come from it.  The ``eps = 0`` state for the
    same controls supplies ``eta``, ``theta`` of the limit system.
    Cell slopes of the ``eps = 0`` state below ``FACET_TOL`` (relative) count
    as facets.
    """
    mesh, tg = cfg.mesh, cfg.tgrid
    cfg_eps = cfg.with_eps(eps)
    adj = solve_adjoint(smooth_traj, cfg_eps)
    G = gradient(smooth_traj, adj, controls, cfg_eps)
    lim = solve_state(init, controls, cfg.with_eps(0.0))
    N, n = tg.n_steps, mesh.n_cells
    tx_eps = np.diff(smooth_traj.theta[1:], axis=1) / mesh.h
    tx0 = _facet_slopes(lim, mesh)
    nu = f_eps_prime(eps, tx_eps)
    # adjoint paired with interval i is node i - 1
    P, Z = adj.p[:-1], adj.z[:-1]
    zx = np.diff(Z, axis=1) / mesh.h
    xi = nu * zx
    sres = sgn_residual(nu, tx0)

    # limit p equation on the reversed axis, step by step
    model, w = cfg.material, cfg.weights
    MX = mesh.mass_X()
    S = mesh.stiffness_matrix()
    Mm = mesh.mass_matrix()
    wts = mesh.weights
    p_res = np.zeros(N)
    for i in range(1, N + 1):
        eta, th = lim.eta[i], lim.theta[i]
        pi_, pnext = adj.p[i - 1], adj.p[i]
        mu0 = model.g_prime(eta) + model.alpha_double_prime(eta) * node_from_cells(mesh, np.abs(tx0[i - 1]))
        ap = model.alpha_prime(eta)
        lhs = MX.matvec(pi_ - pnext) / tg.tau + S.matvec(pi_) + wts * mu0 * pi_
        c = 0.5 * mesh.h * xi[i - 1]
        lhs[:-1] += ap[:-1] * c
        lhs[1:] += ap[1:] * c
        rhs = w.K * Mm.matvec(eta - cfg.eta_ad[i])
        rhs[[0, -1]] += w.K_Gamma * (lim.eta_Gamma[i] - cfg.eta_Gamma_ad[i])
        r = lhs - rhs
        xw = wts.copy()
        xw[[0, -1]] += 1.0
        scale = math.sqrt(float(np.sum(rhs**2 / xw))) + math.sqrt(float(np.sum((MX.matvec(pi_) / tg.tau) ** 2 / xw)))
        p_res[i - 1] = math.sqrt(float(np.sum(r**2 / xw))) / max(scale, 1e-300)

    # remainder functional of the limit z equation on random psi in U_0
    rng = np.random.default_rng(cfg.seed)
    a0 = np.array([np.broadcast_to(model.alpha0(t, mesh.nodes), mesh.nodes.shape) for t in tg.times], float)
    zeta = np.zeros(n_tests)
    for k in range(n_tests):
        psi = np.zeros((N + 1, mesh.n_nodes))
        modes = rng.normal(size=(3, 3))
        for a_ in range(3):
            for b_ in range(3):
                psi += modes[a_, b_] * np.sin(math.pi * (a_ + 1) * tg.times[:, None] / (2 * tg.T)) * np.sin(
                    math.pi * (b_ + 1) * mesh.nodes[None, :]
                )
        psi[:, [0, -1]] = 0.0
        psi[0] = 0.0
        total = 0.0
        norm2 = 0.0
        for i in range(1, N + 1):
            dpsi = (psi[i] - psi[i - 1]) / tg.tau
            psix = np.diff(psi[i]) / mesh.h
            eta = lim.eta[i]
            ap_c = 0.5 * (model.alpha_prime(eta)[:-1] + model.alpha_prime(eta)[1:])
            total += float(np.dot(w.Lambda * (lim.theta[i] - cfg.theta_ad[i]), Mm.matvec(psi[i])))
            total -= float(np.dot(a0[i] * Z[i - 1], Mm.matvec(dpsi)))
            flux = cfg.nu**2 * zx[i - 1] + ap_c * nu[i - 1] * 0.5 * (P[i - 1][:-1] + P[i - 1][1:])
            total -= mesh.h * float(np.sum(flux * psix))
            norm2 += mesh.h * float(np.sum(psix**2)) + float(np.dot(dpsi, Mm.matvec(dpsi)))
        zeta[k] = tg.tau * total / math.sqrt(max(tg.tau * norm2, 1e-300))
    return LimitCertificate(
        eps=eps,
        times=tg.times[1:].copy(),
        x_cells=mesh.midpoints.copy(),
        nu_field=nu,
        xi_field=xi,
        sgn_residual=sres,
        sgn_residual_max=float(np.max(sres)),
        adjoint_p_residuals=p_res,
        zeta_values=zeta,
        optimality_residual=G.norm(mesh, tg),
    )


def solve_OP0(
    cfg: ProblemConfig,
    init: StateTriple,
    schedule: ContinuationSchedule,
    opt: OptimizerConfig | None = None,
    init_controls: ControlTriple | None = None,
) -> tuple[ControlTriple, StateTrajectory, LimitCertificate, list[OPResult]]:
    """Approach the ``eps = 0`` problem by warm-started continuation.

    Every positive level of ``schedule`` is optimised with :func:`solve_OP`,
    starting from the previous level's controls; a zero level (if present)
    only marks the target.  Failed levels are recorded and the continuation
    proceeds from the best available controls.

    Returns
    -------
    controls : ControlTriple
        Controls of the last smooth level.
    state : StateTrajectory
        Their ``eps = 0`` state trajectory.
    certificate : LimitCertificate
    results : list of OPResult
        One entry per optimised level.
    """
    opt = opt or OptimizerConfig()
    levels = [e for e in schedule.eps_levels if e > 0]
    if not levels:
        raise ValueError("the continuation schedule needs at least one positive eps level")
    u = init_controls if init_controls is not None else ControlTriple.zeros(cfg.mesh, cfg.tgrid)
    results: list[OPResult] = []
    summary = []
    last_traj = None
    last_eps = None
    for k, eps in enumerate(levels):
        res = solve_OP(cfg.with_eps(eps), init, u, schedule.opt_for(k, opt))
        results.append(res)
        entry = {
            "eps": eps,
            "status": res.status,
            "start_cost": res.history[0].cost if res.history else math.nan,
            "cost": res.history[-1].cost if res.history else math.nan,
            "grad_norm": res.history[-1].grad_norm if res.history else math.nan,
            "message": res.message,
        }
        if res.state is not None:
            u, last_traj, last_eps = res.controls, res.state, eps
            tx = np.diff(res.state.theta[1:], axis=1) / cfg.mesh.h
            tx0 = _facet_slopes(solve_state(init, u, cfg.with_eps(0.0)), cfg.mesh)
            entry["sgn_residual_max"] = float(np.max(sgn_residual(f_eps_prime(eps, tx), tx0)))
        else:
            log.warning("continuation level eps=%g failed: %s", eps, res.message)
        summary.append(entry)
    if last_traj is None:
        raise SolverError("every continuation level failed")
    cert = limit_certificate(cfg, init, u, last_traj, last_eps)
    cert.level_summary = summary
    state0 = solve_state(init, u, replace(cfg, eps=0.0))
    return u, state0, cert, results
