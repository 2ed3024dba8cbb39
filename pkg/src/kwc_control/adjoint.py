"""Cost functional, sensitivities, adjoint states and the cost gradient.

The cost is

    J(u, u_Gamma, v) = K/2 int |eta - eta_ad|_H^2 + K_Gamma/2 int |eta_Gamma - eta_Gamma_ad|^2
                     + Lambda/2 int |theta - theta_ad|_H^2
                     + L/2 int |u|_H^2 + L_Gamma/2 int |u_Gamma|^2 + M/2 int |v|_H^2,

with right-endpoint rectangles in time (node ``i >= 1`` represents
``(t_{i-1}, t_i]``).

The linearisation of the state system around a trajectory is the linear
system of :mod:`kwc_control.linear` with the coefficients of
:func:`coeffs_from_state`.  The adjoint system is solved with the same
forward scheme on the reversed time axis: ``a`` and ``b`` are
``alpha0(T - t)`` and ``-d/dt alpha0(T - t)``, the state-dependent
coefficients and the tracking residuals are reversed, and the result is
reversed back.  The adjoint value that multiplies the control of the
interval ``(t_{i-1}, t_i]`` is the reversed-scheme value at the same interval,
i.e. node ``i - 1`` of the returned array (its last node carries the zero
terminal value).  With this pairing and a time-independent ``alpha0`` the
gradient coincides with the exact derivative of the coupled discrete scheme.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularLimitError
from .linear import CoefficientQuintet, ForcingTriple, LinearTrajectory, solve_P
from .mesh import Mesh1D, TimeGrid
from .problem import ControlTriple, GradientTriple, ProblemConfig
from .state import StateTrajectory, sensitivity_coefficients

__all__ = [
    "coeffs_from_state",
    "reversed_coeffs",
    "tracking_forcing",
    "solve_adjoint",
    "solve_adjoint_forcing",
    "solve_sensitivity",
    "cost",
    "gradient",
    "conjugacy_check",
    "pair_forcing",
    "optimality_residual",
]


def _require_smooth(eps: float) -> None:
    if not eps > 0:
        raise SingularLimitError(
            "the linearised system needs eps > 0 (f_eps is not differentiable at eps = 0)"
        )


def coeffs_from_state(traj: StateTrajectory, cfg: ProblemConfig) -> CoefficientQuintet:
    """Sensitivity coefficients ``[alpha0, 0, mu, omega, A]`` along a trajectory.

    ``mu = g'(eta) + alpha''(eta) f_eps(theta_x)``,
    ``omega = alpha'(eta) f_eps'(theta_x)`` and ``A = alpha(eta)
    f_eps''(theta_x)``, evaluated at every time node.
    """
    _require_smooth(traj.eps)
    mesh, tg = traj.mesh, traj.tgrid
    rows = [
        sensitivity_coefficients(mesh, cfg.material, traj.eps, traj.eta[i], traj.theta[i], tg.times[i])
        for i in range(tg.n_steps + 1)
    ]
    a, b, mu, om, A = (np.array(c) for c in zip(*rows))
    return CoefficientQuintet(mesh, tg, a, b, mu, om, A)


def _reverse_steps(arr: np.ndarray) -> np.ndarray:
    """Step ``j`` of the reversed scheme uses step ``N + 1 - j`` of the forward one."""
    out = np.empty_like(arr)
    out[1:] = arr[:0:-1]
    out[0] = arr[-1]
    return out


def reversed_coeffs(traj: StateTrajectory, cfg: ProblemConfig) -> CoefficientQuintet:
    """Coefficients of the adjoint system on the reversed time axis."""
    q = coeffs_from_state(traj, cfg)
    mesh, tg = traj.mesh, traj.tgrid
    s = tg.T - tg.times
    x = mesh.nodes
    a = np.array([np.broadcast_to(cfg.material.alpha0(si, x), x.shape) for si in s], float)
    b = -np.array([np.broadcast_to(cfg.material.alpha0_dt(si, x), x.shape) for si in s], float)
    return CoefficientQuintet(mesh, tg, a, b, _reverse_steps(q.mu), _reverse_steps(q.omega), _reverse_steps(q.A))


def tracking_forcing(traj: StateTrajectory, cfg: ProblemConfig) -> ForcingTriple:
    """``[K (eta - eta_ad), K_Gamma (eta_Gamma - eta_Gamma_ad), Lambda (theta - theta_ad)]``."""
    w = cfg.weights
    return ForcingTriple(
        w.K * (traj.eta - cfg.eta_ad),
        w.K_Gamma * (traj.eta_Gamma - cfg.eta_Gamma_ad),
        w.Lambda * (traj.theta - cfg.theta_ad),
    )


def solve_adjoint_forcing(
    traj: StateTrajectory, cfg: ProblemConfig, forcing: ForcingTriple, enforce_step_bound: bool = True
) -> LinearTrajectory:
    """Adjoint operator applied to an arbitrary forcing (zero terminal data).

    Returns the adjoint on the forward time nodes; node ``N`` is zero and
    node ``i - 1`` pairs with forcing/control node ``i``.
    """
    mesh, tg = traj.mesh, traj.tgrid
    q = reversed_coeffs(traj, cfg)
    rev = ForcingTriple(_reverse_steps(forcing.h), _reverse_steps(forcing.h_Gamma), _reverse_steps(forcing.k))
    sol = solve_P(mesh.zeros(), mesh.zeros(), q, rev, cfg.nu, enforce_step_bound=enforce_step_bound)
    return LinearTrajectory(mesh, tg, sol.p[::-1].copy(), sol.z[::-1].copy())


def solve_adjoint(traj: StateTrajectory, cfg: ProblemConfig, enforce_step_bound: bool = True) -> LinearTrajectory:
    """Adjoint state ``[p, p_Gamma, z]`` driven by the tracking residuals.

    The terminal value (node ``N``) is exactly zero.
    """
    return solve_adjoint_forcing(traj, cfg, tracking_forcing(traj, cfg), enforce_step_bound)


def solve_sensitivity(
    traj: StateTrajectory,
    cfg: ProblemConfig,
    direction: ControlTriple,
    enforce_step_bound: bool = True,
) -> LinearTrajectory:
    """Linearised state response to a control direction ``[h, h_Gamma, k]``.

    Forward linear solve with the coefficients of :func:`coeffs_from_state`,
    zero initial data and forcing ``[L h, L_Gamma h_Gamma, M k]``.
    """
    w = cfg.weights
    forcing = ForcingTriple(w.L * direction.u, w.L_Gamma * direction.u_Gamma, w.M * direction.v)
    q = coeffs_from_state(traj, cfg)
    return solve_P(traj.mesh.zeros(), traj.mesh.zeros(), q, forcing, cfg.nu, enforce_step_bound=enforce_step_bound)


def cost(traj: StateTrajectory, controls: ControlTriple, cfg: ProblemConfig) -> float:
    """Cost functional with right-endpoint rectangles in time."""
    mesh, tg, w = traj.mesh, traj.tgrid, cfg.weights
    Mm = mesh.mass_matrix()

    def h2(f):
        return float(np.dot(f, Mm.matvec(f)))

    total = 0.0
    for i in range(1, tg.n_steps + 1):
        de = traj.eta[i] - cfg.eta_ad[i]
        dg = traj.eta_Gamma[i] - cfg.eta_Gamma_ad[i]
        dt = traj.theta[i] - cfg.theta_ad[i]
        total += w.K * h2(de) + w.K_Gamma * float(np.dot(dg, dg)) + w.Lambda * h2(dt)
        total += w.L * h2(controls.u[i]) + w.L_Gamma * float(np.dot(controls.u_Gamma[i], controls.u_Gamma[i]))
        total += w.M * h2(controls.v[i])
    return 0.5 * tg.tau * total


def gradient(
    traj: StateTrajectory, adjoint: LinearTrajectory, controls: ControlTriple, cfg: ProblemConfig
) -> GradientTriple:
    """Gradient ``[L (u + p), L_Gamma (u_Gamma + p_Gamma), M (v + z)]``.

    Represented in the same inner product as :meth:`ControlTriple.inner`.
    Row ``i >= 1`` uses the adjoint at node ``i - 1``; row 0 is zero (the
    node-0 control does not act).
    """
    N1 = traj.tgrid.n_steps + 1
    if adjoint.p.shape != controls.u.shape or controls.u.shape[0] != N1:
        raise ValueError("adjoint, controls and trajectory have inconsistent shapes")
    w = cfg.weights
    G = ControlTriple.zeros(traj.mesh, traj.tgrid)
    u = G.u.copy()
    ug = G.u_Gamma.copy()
    v = G.v.copy()
    u[1:] = w.L * (controls.u[1:] + adjoint.p[:-1])
    ug[1:] = w.L_Gamma * (controls.u_Gamma[1:] + adjoint.p_Gamma[:-1])
    v[1:] = w.M * (controls.v[1:] + adjoint.z[:-1])
    return GradientTriple(u, ug, v)


def optimality_residual(grad: GradientTriple, mesh: Mesh1D, tgrid: TimeGrid) -> float:
    """``||[L(u+p), L_Gamma(u_Gamma+p_Gamma), M(v+z)]||`` in the control norm."""
    return grad.norm(mesh, tgrid)


def pair_forcing(sol: LinearTrajectory, forcing: ForcingTriple, shift: int) -> float:
    """``tau sum_{i>=1} (sol_{i - shift}, forcing_i)`` in the ``X x H`` product."""
    mesh, tg = sol.mesh, sol.tgrid
    Mm = mesh.mass_matrix()
    s = 0.0
    for i in range(1, tg.n_steps + 1):
        j = i - shift
        s += float(np.dot(sol.p[j], Mm.matvec(forcing.h[i])))
        s += float(np.dot(sol.p_Gamma[j], forcing.h_Gamma[i]))
        s += float(np.dot(sol.z[j], Mm.matvec(forcing.k[i])))
    return tg.tau * s


def _forcing_norm(f: ForcingTriple, mesh: Mesh1D, tg: TimeGrid) -> float:
    return ControlTriple(f.h, f.h_Gamma, f.k).norm(mesh, tg)


def conjugacy_check(
    traj: StateTrajectory,
    cfg: ProblemConfig,
    u: ForcingTriple,
    h: ForcingTriple,
    enforce_step_bound: bool = True,
) -> float:
    """Relative residual ``|(P* u, h) - (u, P h)| / (|u| |h|)``.

    ``P`` is the linearised forward operator (zero initial data) and ``P*``
    the reversed-time adjoint operator, both along ``traj``.
    """
    mesh, tg = traj.mesh, traj.tgrid
    nu_, nh = _forcing_norm(u, mesh, tg), _forcing_norm(h, mesh, tg)
    if nu_ == 0.0 or nh == 0.0:
        return 0.0
    adj = solve_adjoint_forcing(traj, cfg, u, enforce_step_bound)
    q = coeffs_from_state(traj, cfg)
    fwd = solve_P(mesh.zeros(), mesh.zeros(), q, h, cfg.nu, enforce_step_bound=enforce_step_bound)
    lhs = pair_forcing(adj, h, shift=1)
    rhs = pair_forcing(fwd, u, shift=0)
    res = abs(lhs - rhs) / (nu_ * nh)
    return res if math.isfinite(res) else math.inf
