"""Time marching for the nonlinear state system.

The state ``[eta, eta_Gamma, theta]`` solves

    eta_t - eta_xx + g(eta) + alpha'(eta) f_eps(theta_x) = L u,
    d/dt eta_Gamma + n . eta_x = L_Gamma u_Gamma   on {0, 1},
    alpha0 theta_t - (alpha(eta) f_eps'(theta_x) + nu^2 theta_x)_x = M v,
    theta = 0 on {0, 1},

(for ``eps = 0`` the theta equation is the variational inequality of the
total-variation term).  Both equations are the gradient flow of the discrete
energy

    E(eta, theta) = 1/2 |eta_x|^2 + nu^2/2 int f_eps(theta_x)^2
                    + int alpha(eta) f_eps(theta_x) + int G(eta),

and every time step minimises ``E`` plus a quadratic proximity term.

Two schemes are provided:

* ``"split"``: minimise over ``eta`` with ``theta`` frozen at the previous
  step, then over ``theta`` with the new ``eta``.  Each substep is a small
  tridiagonal Newton iteration; the ``theta`` substep is convex for every
  ``eps >= 0`` and is solved exactly through its dual when ``eps = 0``.
* ``"coupled"``: minimise jointly over ``(eta, theta)``.  Its Newton matrix
  is the step matrix of :mod:`kwc_control.linear` with the sensitivity
  coefficients of the current state.

Quadrature: ``int alpha(eta) f(theta_x)`` uses the cellwise trapezoidal rule
(``f`` is constant per cell), ``int G(eta)`` nodal lumping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import lsq_linear

from .errors import SolverError
from .linear import StepMatrix, StepSizeWarning, assemble_step_matrix
from .material import MaterialModel
from .mesh import Mesh1D, TimeGrid, TridiagonalMatrix, cell_average, diff_x, inner_H, node_from_cells
from .problem import ControlTriple, ProblemConfig, StateTriple
from .regularization import f_eps, f_eps_prime, f_eps_second

__all__ = [
    "EnergyRecord",
    "StateTrajectory",
    "energy",
    "discrete_energy",
    "default_R",
    "step_eta",
    "step_theta",
    "step_coupled",
    "solve_state",
    "sensitivity_coefficients",
    "frozen_tau0",
]


@dataclass(frozen=True)
class EnergyRecord:
    """Energy diagnostics at one time node.

    ``phi`` and ``ghat`` are the convex and the Lipschitz-gradient parts of
    the energy with shift ``R``; their sum does not depend on ``R``.
    ``work`` is the forcing power ``(f, w_i - w_{i-1}) / tau`` and
    ``dissipation`` the weighted squared rate ``|w_i - w_{i-1}|^2 / tau^2``
    of the step ending at this node (both zero at node 0).
    """

    phi: float
    ghat: float
    work: float = 0.0
    dissipation: float = 0.0

    @property
    def total(self) -> float:
        return self.phi + self.ghat


@dataclass
class StateTrajectory:
    """Discrete state on all time nodes plus per-step diagnostics."""

    mesh: Mesh1D
    tgrid: TimeGrid
    eps: float
    eta: np.ndarray
    theta: np.ndarray
    energy: list[EnergyRecord] = field(default_factory=list)
    newton_iterations: list[int] = field(default_factory=list)
    certificate_violation: list[float] = field(default_factory=list)
    R: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def eta_Gamma(self) -> np.ndarray:
        return self.eta[:, [0, -1]]

    def state(self, i: int) -> StateTriple:
        return StateTriple(self.eta[i], self.theta[i])


# -- energy ------------------------------------------------------------------


def default_R(model: MaterialModel, nu: float, eta_range: tuple[float, float]) -> float:
    """``1 + 2 sup|alpha|^2 / nu^2`` with the sup over a sampled range."""
    return 1.0 + 2.0 * model.alpha_sup(eta_range) ** 2 / nu**2


def energy(
    mesh: Mesh1D,
    state: StateTriple,
    eps: float,
    R: float,
    model: MaterialModel,
    nu: float,
) -> EnergyRecord:
    """Split energy ``(phi, ghat)`` of a state.

    ``phi = 1/2 |eta_x|^2 + R/2 |eta|^2 + 1/2 int (nu f_eps(theta_x) +
    alpha(eta)/nu)^2`` and ``ghat = int (G(eta) - R eta^2/2 - alpha(eta)^2 /
    (2 nu^2))``.
    """
    eta, theta = state.eta, state.theta
    h = mesh.h
    ex = diff_x(mesh, eta)
    fc = f_eps(eps, diff_x(mesh, theta))
    al = model.alpha(eta)
    eta2 = inner_H(mesh, eta, eta)
    sq = (
        0.5 * h * nu**2 * fc**2
        + 0.5 * h * fc * (al[:-1] + al[1:])
        + 0.25 * h * (al[:-1] ** 2 + al[1:] ** 2) / nu**2
    )
    phi = 0.5 * h * float(np.sum(ex**2)) + 0.5 * R * eta2 + float(np.sum(sq))
    ghat = (
        float(np.sum(mesh.weights * model.G(eta)))
        - 0.5 * R * eta2
        - float(np.sum(mesh.weights * al**2)) / (2 * nu**2)
    )
    return EnergyRecord(phi, ghat)


def discrete_energy(mesh: Mesh1D, eta, theta, eps: float, model: MaterialModel, nu: float) -> float:
    """``phi + ghat`` evaluated directly (independent of the shift ``R``)."""
    h = mesh.h
    fc = f_eps(eps, diff_x(mesh, theta))
    abar = cell_average(model.alpha(eta))
    return float(
        0.5 * h * np.sum(diff_x(mesh, eta) ** 2)
        + 0.5 * nu**2 * h * np.sum(fc**2)
        + h * np.sum(abar * fc)
        + np.sum(mesh.weights * model.G(eta))
    )


# -- Newton ------------------------------------------------------------------


def _newton(fun, x0, weights, tol, max_iter, step, what):
    """Damped Newton for minimising a smooth function.

    ``fun(x, hess)`` returns ``(value, gradient, matrix-or-None)``; the matrix
    must provide ``solve``.  Convergence: ``sqrt(sum g^2 / weights) <= tol``
    or a Newton update below roundoff.
    """
    x = np.array(x0, float)
    f, g, H = fun(x, True)
    for it in range(max_iter + 1):
        r = math.sqrt(float(np.sum(g * g / weights)))
        if r <= tol:
            return x, it
        if it == max_iter:
            break
        try:
            d = -H.solve(g)
        except SolverError:
            d = None
        if d is None or not np.all(np.isfinite(d)) or float(np.dot(g, d)) >= 0:
            d = -g / weights
        slope = float(np.dot(g, d))
        s = 1.0
        while True:
            xn = x + s * d
            fn, gn, _ = fun(xn, False)
            rn = math.sqrt(float(np.sum(gn * gn / weights)))
            if np.isfinite(fn) and (
                fn <= f + 1e-4 * s * slope or (fn <= f + 1e-13 * (1.0 + abs(f)) and rn < r)
            ):
                break
            s *= 0.5
            if s < 1e-14:
                break
        if s < 1e-14 or np.max(np.abs(s * d)) <= 4e-16 * (1.0 + np.max(np.abs(x))):
            # no further progress is representable: converged to roundoff
            if np.max(np.abs(s * d)) <= 1e-12 * (1.0 + np.max(np.abs(x))):
                return x, it
            raise SolverError(f"{what}: line search failed (residual {r:.3e})", step)
        x = xn
        f, g, H = fun(x, True)
    raise SolverError(
        f"{what}: Newton did not converge in {max_iter} iterations (residual {r:.3e})", step
    )


# -- substeps --------------------------------------------------------------------


def _loads_eta(mesh: Mesh1D, cfg: ProblemConfig, u, u_Gamma) -> np.ndarray:
    load = cfg.weights.L * mesh.load(u)
    load[0] += cfg.weights.L_Gamma * u_Gamma[0]
    load[-1] += cfg.weights.L_Gamma * u_Gamma[1]
    return load


def _weights_X(mesh: Mesh1D) -> np.ndarray:
    w = mesh.weights.copy()
    w[0] += 1.0
    w[-1] += 1.0
    return w


def step_eta(
    cfg: ProblemConfig,
    eta_prev: np.ndarray,
    theta_ref: np.ndarray,
    u: np.ndarray,
    u_Gamma: np.ndarray,
    step: int | None = None,
) -> tuple[np.ndarray, int]:
    """Implicit step for ``eta`` with ``theta`` frozen at ``theta_ref``.

    Minimises ``1/(2 tau) |eta - eta_prev|_X^2 + 1/2 |eta_x|^2 + int G(eta)
    + int alpha(eta) f_eps(theta_ref_x) - (L u, eta) - L_Gamma u_Gamma .
    eta_Gamma``; the boundary rows of its Euler--Lagrange system are the
    dynamic boundary condition.

    Returns
    -------
    eta : ndarray
        New nodal values (the boundary values are the new ``eta_Gamma``).
    iterations : int
    """
    mesh, model, tau = cfg.mesh, cfg.material, cfg.tgrid.tau
    h = mesh.h
    MX = mesh.mass_X()
    S = mesh.stiffness_matrix()
    fc = f_eps(cfg.eps, diff_x(mesh, theta_ref))
    Fbar = node_from_cells(mesh, fc)
    load = _loads_eta(mesh, cfg, u, u_Gamma)
    w = mesh.weights
    base = MX.scaled(1.0 / tau) + S

    def fun(eta, need_hess):
        d = eta - eta_prev
        al = model.alpha(eta)
        val = (
            0.5 * float(np.dot(d, MX.matvec(d))) / tau
            + 0.5 * float(np.dot(eta, S.matvec(eta)))
            + float(np.sum(w * model.G(eta)))
            + 0.5 * h * float(np.sum(fc * (al[:-1] + al[1:])))
            - float(np.dot(load, eta))
        )
        grad = MX.matvec(d) / tau + S.matvec(eta) + w * (model.g(eta) + model.alpha_prime(eta) * Fbar) - load
        H = None
        if need_hess:
            H = base.add_diag(w * (model.g_prime(eta) + model.alpha_double_prime(eta) * Fbar))
        return val, grad, H

    tol = cfg.tolerances
    return _newton(fun, eta_prev, _weights_X(mesh), tol.newton_tol, tol.newton_max_iter, step, "eta step")


class _Interior:
    """Wrap an interior tridiagonal matrix so that ``solve`` raises SolverError."""

    def __init__(self, T: TridiagonalMatrix):
        self.T = T

    def solve(self, rhs):
        try:
            x = self.T.solve(rhs)
        except Exception as exc:  # scipy raises LinAlgError / ValueError
            raise SolverError(f"singular theta matrix: {exc}") from exc
        return x


def _theta_parts(cfg: ProblemConfig, eta_ref, theta_prev, v, t):
    mesh = cfg.mesh
    a0 = np.asarray(cfg.material.alpha0(t, mesh.nodes), float) * np.ones(mesh.n_nodes)
    Ma = mesh.mass_matrix(a0)
    abar = cell_average(cfg.material.alpha(eta_ref))
    load = (cfg.weights.M * mesh.load(v))[1:-1]
    return Ma, abar, load


def _theta_fun(cfg, Ma, abar, load, theta_prev, eps):
    mesh, tau, nu = cfg.mesh, cfg.tgrid.tau, cfg.nu
    h = mesh.h
    S = mesh.stiffness_matrix()

    def fun(y, need_hess):
        th = mesh.extend(y)
        d = th - theta_prev
        tx = diff_x(mesh, th)
        fc = f_eps(eps, tx)
        val = (
            0.5 * float(np.dot(d, Ma.matvec(d))) / tau
            + 0.5 * nu**2 * h * float(np.sum(tx**2))
            + h * float(np.sum(abar * fc))
            - float(np.dot(load, y))
        )
        q = abar * f_eps_prime(eps, tx)
        gfull = Ma.matvec(d) / tau + nu**2 * S.matvec(th)
        gfull[:-1] -= q
        gfull[1:] += q
        grad = gfull[1:-1] - load
        H = None
        if need_hess:
            H = _Interior(mesh.stiffness_matrix(nu**2 + abar * f_eps_second(eps, tx)).interior() + Ma.scaled(1.0 / tau).interior())
        return val, grad, H

    return fun


def _vi_violation(cfg, Ma, abar, load, theta_prev, theta, psi_list) -> float:
    """Worst relative violation of the variational inequality at ``eps = 0``."""
    mesh, tau, nu = cfg.mesh, cfg.tgrid.tau, cfg.nu
    h = mesh.h
    S = mesh.stiffness_matrix()
    lhs_vec = Ma.matvec(theta - theta_prev) / tau + nu**2 * S.matvec(theta)
    J = lambda f: h * float(np.sum(abar * np.abs(diff_x(mesh, f))))  # noqa: E731
    Jt = J(theta)
    worst = -math.inf
    for psi in psi_list:
        dif = theta - psi
        viol = float(np.dot(lhs_vec, dif)) + Jt - J(psi) - float(np.dot(load, dif[1:-1]))
        worst = max(worst, viol / (1.0 + Jt + J(psi)))
    return worst


def _theta_tv_exact(cfg, Ma, abar, load, theta_prev, step):
    """Exact minimiser of the ``eps = 0`` theta step through its dual."""
    mesh, tau, nu = cfg.mesh, cfg.tgrid.tau, cfg.nu
    h, n = mesh.h, mesh.n_cells
    Q = (Ma.scaled(1.0 / tau) + mesh.stiffness_matrix().scaled(nu**2)).interior().to_dense()
    b = (Ma.matvec(theta_prev) / tau)[1:-1] + load
    # (D y)_c = (y_{c+1} - y_c) / h with zero end values, shape (n, n-1)
    D = (np.eye(n, n - 1, -1) - np.eye(n, n - 1)) / h
    try:
        L = cholesky(Q, lower=True)
    except LinAlgError as exc:
        raise SolverError(f"theta step matrix not positive definite: {exc}", step) from exc
    G = solve_triangular(L, D.T, lower=True)
    c = solve_triangular(L, b, lower=True)
    bound = h * abar
    res = lsq_linear(G, c, bounds=(-bound, bound), method="bvls", tol=1e-14, max_iter=10 * n + 100)
    if res.status < 0:
        raise SolverError(f"theta step dual solve failed: {res.message}", step)
    lam = res.x
    return cho_solve((L, True), b - D.T @ lam)


def step_theta(
    cfg: ProblemConfig,
    theta_prev: np.ndarray,
    eta_ref: np.ndarray,
    v: np.ndarray,
    t: float,
    step: int | None = None,
) -> tuple[np.ndarray, int, float]:
    """Implicit step for ``theta`` with ``eta`` frozen at ``eta_ref``.

    Minimises the strictly convex functional ``1/(2 tau) |sqrt(alpha0)
    (theta - theta_prev)|^2 + nu^2/2 |theta_x|^2 + int alpha(eta_ref)
    f_eps(theta_x) - (M v, theta)`` over functions vanishing at the boundary.

    For ``eps = 0`` the problem is a quadratic plus a weighted l1 norm of
    the cell slopes.  Its dual is a box-constrained least-squares problem in
    the cell fluxes ``lambda`` (``|lambda_c| <= h alpha_c``), solved exactly
    by bounded-variable least squares; the primal minimiser follows from
    ``Q theta = b - D^T lambda``.  The result is certified by the
    variational inequality against random test functions.  For small
    ``eps > 0`` Newton's method is warm started along ``eps_k = 10^-k`` if a
    direct solve fails.

    Returns
    -------
    theta : ndarray
    iterations : int
        Total Newton iterations (``eps > 0``) or 0.
    certificate : float
        Worst relative violation of the variational inequality (``eps = 0``
        only; ``nan`` otherwise).
    """
    mesh, tol = cfg.mesh, cfg.tolerances
    Ma, abar, load = _theta_parts(cfg, eta_ref, theta_prev, v, t)
    w = mesh.weights[1:-1]
    if cfg.eps > 0:
        fun = _theta_fun(cfg, Ma, abar, load, theta_prev, cfg.eps)
        try:
            y, its = _newton(fun, theta_prev[1:-1], w, tol.newton_tol, tol.newton_max_iter, step, "theta step")
            return mesh.extend(y), its, math.nan
        except SolverError:
            pass
        y, total = theta_prev[1:-1].copy(), 0
        k = 0
        while True:
            e = max(cfg.eps, 10.0**-k)
            fun = _theta_fun(cfg, Ma, abar, load, theta_prev, e)
            y, its = _newton(fun, y, w, tol.newton_tol, tol.newton_max_iter, step, "theta step")
            total += its
            if e == cfg.eps:
                return mesh.extend(y), total, math.nan
            k += 1
    y = _theta_tv_exact(cfg, Ma, abar, load, theta_prev, step)
    theta, total = mesh.extend(y), 0
    rng = np.random.default_rng([cfg.seed, 0 if step is None else step])
    scale = 1.0 + float(np.max(np.abs(theta)))
    psis = [mesh.zeros()]
    for _ in range(tol.certificate_samples - 1):
        s = scale * 10.0 ** rng.uniform(-4, 0)
        psis.append(theta + s * mesh.extend(rng.normal(size=mesh.n_interior)))
    cert = _vi_violation(cfg, Ma, abar, load, theta_prev, theta, psis)
    return theta, total, cert


def sensitivity_coefficients(
    mesh: Mesh1D, model: MaterialModel, eps: float, eta: np.ndarray, theta: np.ndarray, t: float
) -> tuple[np.ndarray, ...]:
    """Linearised coefficients ``(a, b, mu, omega, A)`` at one state.

    ``a = alpha0(t)``, ``b = 0``, ``mu = g'(eta) + alpha''(eta) f_eps``
    (nodal, with ``f_eps(theta_x)`` lumped to the nodes),
    ``omega = alpha'(eta) f_eps'(theta_x)`` per cell endpoint and
    ``A = alpha(eta) f_eps''(theta_x)`` per cell (cell-averaged ``alpha``).
    These are exactly the second derivatives of the discrete energy.
    """
    tx = diff_x(mesh, theta)
    fc = f_eps(eps, tx)
    fp = f_eps_prime(eps, tx)
    a = np.asarray(model.alpha0(t, mesh.nodes), float) * np.ones(mesh.n_nodes)
    mu = model.g_prime(eta) + model.alpha_double_prime(eta) * node_from_cells(mesh, fc)
    ap = model.alpha_prime(eta)
    omega = np.stack([ap[:-1] * fp, ap[1:] * fp], axis=-1)
    A = cell_average(model.alpha(eta)) * f_eps_second(eps, tx)
    return a, np.zeros(mesh.n_nodes), mu, omega, A


def step_coupled(
    cfg: ProblemConfig,
    eta_prev: np.ndarray,
    theta_prev: np.ndarray,
    u: np.ndarray,
    u_Gamma: np.ndarray,
    v: np.ndarray,
    t: float,
    step: int | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Joint implicit step for ``(eta, theta)`` (requires ``eps > 0``)."""
    if cfg.eps <= 0:
        raise ValueError("the coupled scheme needs eps > 0")
    mesh, model, tau, nu, eps = cfg.mesh, cfg.material, cfg.tgrid.tau, cfg.nu, cfg.eps
    h = mesh.h
    n = mesh.n_cells
    MX = mesh.mass_X()
    S = mesh.stiffness_matrix()
    a0 = np.asarray(model.alpha0(t, mesh.nodes), float) * np.ones(mesh.n_nodes)
    Ma = mesh.mass_matrix(a0)
    load_e = _loads_eta(mesh, cfg, u, u_Gamma)
    load_t = (cfg.weights.M * mesh.load(v))[1:-1]
    w = mesh.weights
    proto = StepMatrix(n, [np.zeros(0, int)], [np.zeros(0, int)], [np.zeros(0)])

    def fun(x, need_hess):
        eta, y = proto.unpack(x)
        th = mesh.extend(y)
        de, dt = eta - eta_prev, th - theta_prev
        tx = diff_x(mesh, th)
        fc = f_eps(eps, tx)
        al = model.alpha(eta)
        abar = cell_average(al)
        val = (
            0.5 * float(np.dot(de, MX.matvec(de))) / tau
            + 0.5 * float(np.dot(dt, Ma.matvec(dt))) / tau
            + 0.5 * float(np.dot(eta, S.matvec(eta)))
            + 0.5 * nu**2 * h * float(np.sum(tx**2))
            + float(np.sum(w * model.G(eta)))
            + h * float(np.sum(abar * fc))
            - float(np.dot(load_e, eta))
            - float(np.dot(load_t, y))
        )
        Fbar = node_from_cells(mesh, fc)
        ge = MX.matvec(de) / tau + S.matvec(eta) + w * (model.g(eta) + model.alpha_prime(eta) * Fbar) - load_e
        q = abar * f_eps_prime(eps, tx)
        gt = Ma.matvec(dt) / tau + nu**2 * S.matvec(th)
        gt[:-1] -= q
        gt[1:] += q
        grad = proto.pack(ge, gt[1:-1] - load_t)
        H = None
        if need_hess:
            H = assemble_step_matrix(mesh, tau, nu, *sensitivity_coefficients(mesh, model, eps, eta, th, t))
        return val, grad, H

    wts = proto.pack(_weights_X(mesh), w[1:-1])
    x, its = _newton(
        fun,
        proto.pack(eta_prev, theta_prev[1:-1]),
        wts,
        cfg.tolerances.newton_tol,
        cfg.tolerances.newton_max_iter,
        step,
        "coupled step",
    )
    eta, y = proto.unpack(x)
    return eta, mesh.extend(y), its


def frozen_tau0(cfg: ProblemConfig, init: StateTriple, t: float = 0.0) -> float:
    """Step bound of the linearised step frozen at ``init``."""
    mesh, model = cfg.mesh, cfg.material
    eps = cfg.eps
    tx = diff_x(mesh, init.theta)
    fc = f_eps(eps, tx)
    fp = f_eps_prime(eps, tx) if eps > 0 else np.sign(tx)
    mu = model.g_prime(init.eta) + model.alpha_double_prime(init.eta) * node_from_cells(mesh, fc)
    ap = model.alpha_prime(init.eta)
    om = max(float(np.max(np.abs(ap[:-1] * fp))), float(np.max(np.abs(ap[1:] * fp))))
    a0 = np.asarray(model.alpha0(t, mesh.nodes), float)
    mu_H = math.sqrt(inner_H(mesh, mu, mu))
    return min(1.0, cfg.nu**2, float(np.min(a0))) / (16.0 * (1.0 + mu_H**2 + om**2))


def _work_dissipation(cfg, eta0, th0, eta1, th1, u, uG, v, t):
    mesh, tau = cfg.mesh, cfg.tgrid.tau
    de, dt = eta1 - eta0, th1 - th0
    a0 = np.asarray(cfg.material.alpha0(t, mesh.nodes), float) * np.ones(mesh.n_nodes)
    diss = (float(np.dot(de, mesh.mass_X().matvec(de))) + float(np.dot(dt, mesh.mass_matrix(a0).matvec(dt)))) / tau**2
    work = (
        float(np.dot(_loads_eta(mesh, cfg, u, uG), de))
        + cfg.weights.M * float(np.dot(mesh.load(v), dt))
    ) / tau
    return work, diss


def solve_state(
    init: StateTriple,
    controls: ControlTriple,
    cfg: ProblemConfig,
    R: float | None = None,
) -> StateTrajectory:
    """March the state system over the time grid.

    Parameters
    ----------
    init : StateTriple
        Initial ``[eta_0, theta_0]``; ``theta_0`` must vanish at the boundary.
    controls : ControlTriple
    cfg : ProblemConfig
    R : float, optional
        Energy shift for the diagnostics; default ``1 + 2 sup|alpha|^2/nu^2``
        over ``[-m, m]`` with ``m = 1 + max|eta_0|``.

    Returns
    -------
    StateTrajectory
    """
    mesh, tg = cfg.mesh, cfg.tgrid
    if init.eta.shape != (mesh.n_nodes,):
        raise ValueError("initial state does not match the mesh")
    if controls.u.shape != (tg.n_steps + 1, mesh.n_nodes):
        raise ValueError("controls do not match the grids")
    scheme = cfg.tolerances.scheme
    if scheme == "coupled" and cfg.eps == 0:
        raise ValueError("the coupled scheme needs eps > 0; use the split scheme for eps = 0")
    if R is None:
        m = 1.0 + float(np.max(np.abs(init.eta)))
        R = default_R(cfg.material, cfg.nu, (-m, m))
    traj = StateTrajectory(
        mesh, tg, cfg.eps, np.empty((tg.n_steps + 1, mesh.n_nodes)), np.empty((tg.n_steps + 1, mesh.n_nodes)), R=R
    )
    bound = frozen_tau0(cfg, init)
    if tg.tau > bound:
        msg = f"time step {tg.tau:.4g} exceeds the frozen-coefficient bound {bound:.4g}"
        traj.warnings.append(msg)
        warnings.warn(msg, StepSizeWarning, stacklevel=2)
    traj.eta[0], traj.theta[0] = init.eta, init.theta
    traj.energy.append(energy(mesh, init, cfg.eps, R, cfg.material, cfg.nu))
    for i in range(1, tg.n_steps + 1):
        t = tg.times[i]
        u, uG, v = controls.u[i], controls.u_Gamma[i], controls.v[i]
        if scheme == "split":
            eta, it1 = step_eta(cfg, traj.eta[i - 1], traj.theta[i - 1], u, uG, step=i)
            theta, it2, cert = step_theta(cfg, traj.theta[i - 1], eta, v, t, step=i)
            its = it1 + it2
            if not math.isnan(cert):
                traj.certificate_violation.append(cert)
                if cert > cfg.tolerances.certificate_tol:
                    traj.warnings.append(f"step {i}: variational inequality violated by {cert:.3e}")
        else:
            eta, theta, its = step_coupled(cfg, traj.eta[i - 1], traj.theta[i - 1], u, uG, v, t, step=i)
        traj.eta[i], traj.theta[i] = eta, theta
        traj.newton_iterations.append(its)
        rec = energy(mesh, StateTriple(eta, theta), cfg.eps, R, cfg.material, cfg.nu)
        work, diss = _work_dissipation(cfg, traj.eta[i - 1], traj.theta[i - 1], eta, theta, u, uG, v, t)
        traj.energy.append(EnergyRecord(rec.phi, rec.ghat, work, diss))
    return traj
