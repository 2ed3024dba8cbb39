"""Executable checks of the inequalities behind the solvers.

Tolerance classes:

* algebraic identities and exact inequalities: relative slack
  :data:`MACHINE_TOL` (``1e-12``);
* statements that hold only in the continuum limit: ``C (tau + h^2)``
  relative to a problem scale, with ``C`` defaulting to
  :data:`DISCRETIZATION_C` (``10``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .linear import (
    AprioriItem,
    CoefficientQuintet,
    EstimateConstants,
    ForcingTriple,
    LinearTrajectory,
    check_apriori,
    solve_P,
)
from .mesh import Mesh1D, TimeGrid, norm_H, norm_X
from .problem import ProblemConfig
from .state import StateTrajectory

__all__ = [
    "MACHINE_TOL",
    "DISCRETIZATION_C",
    "check_mosco_bound",
    "GronwallInstance",
    "discrete_gronwall_bound",
    "gronwall_instance_at_equality",
    "random_gronwall_instance",
    "gronwall_max_ratio",
    "EnergyDissipationReport",
    "check_energy_dissipation",
    "ConvergenceResult",
    "observed_order",
    "convergence_study",
    "ManufacturedLinearProblem",
    "check_continuous_dependence",
]

MACHINE_TOL = 1e-12
DISCRETIZATION_C = 10.0


# -- uniform bound of the regularisation ----------------------------------------


def check_mosco_bound(eps1, eps2, xis) -> float:
    """Largest value of ``|f_eps1(xi) - f_eps2(xi)| - |eps1 - eps2|``.

    Arguments broadcast against each other, so one call can sweep many
    ``(eps1, eps2, xi)`` triples.  The value is ``<= 0`` up to roundoff.
    """
    e1 = np.asarray(eps1, float)
    e2 = np.asarray(eps2, float)
    xi = np.asarray(xis, float)
    if not (np.all(np.isfinite(e1)) and np.all(np.isfinite(e2))) or np.any(e1 < 0) or np.any(e2 < 0):
        raise ValueError("eps must be finite and nonnegative")
    # same expression as f_eps, vectorised over eps as well
    viol = np.abs(np.hypot(e1, xi) - np.hypot(e2, xi)) - np.abs(e1 - e2)
    return float(np.max(viol))


# -- discrete Gronwall inequality ---------------------------------------------------


def _n_steps(T: float, tau: float) -> int:
    """Smallest ``N`` with ``(N - 1) tau < T <= N tau``."""
    N = max(1, math.ceil(T / tau - 1e-12))
    while N * tau < T:
        N += 1
    return N


@dataclass(frozen=True)
class GronwallInstance:
    """Data of the discrete Gronwall lemma.

    Attributes
    ----------
    c : float
        Nonnegative growth constant.
    tau : float
        Step in ``(0, 1)`` with ``c tau < 2``.
    T : float
        Final time; ``N = n_steps`` is the smallest integer with
        ``(N - 1) tau < T <= N tau``.
    P : ndarray, shape (N+1,)
        Nonnegative sequence ``P_0..P_N``.
    Q : ndarray, shape (N+1,)
        Nonnegative sequence; ``Q[0]`` is unused.

    The hypothesis ``(P_i - P_{i-1}) / tau <= c/2 (P_i + P_{i-1}) + Q_i``
    is validated on construction.
    """

    c: float
    tau: float
    T: float
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c >= 0):
            raise ValueError("c must be finite and nonnegative")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if not self.c * self.tau < 2:
            raise ValueError(f"c * tau = {self.c * self.tau:.6g} violates c * tau < 2")
        if not self.T > 0:
            raise ValueError("T must be positive")
        P = np.asarray(self.P, float)
        Q = np.asarray(self.Q, float)
        N = self.n_steps
        if P.shape != (N + 1,) or Q.shape != (N + 1,):
            raise ValueError(f"P and Q need {N + 1} entries for T={self.T}, tau={self.tau}")
        if np.any(P < 0) or np.any(Q[1:] < 0):
            raise ValueError("P and Q must be nonnegative")
        lhs = (P[1:] - P[:-1]) / self.tau
        rhs = 0.5 * self.c * (P[1:] + P[:-1]) + Q[1:]
        if np.any(lhs > rhs + MACHINE_TOL * np.maximum(1.0, np.abs(rhs))):
            raise ValueError("sequences violate the recursion hypothesis")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)

    @property
    def n_steps(self) -> int:
        return _n_steps(self.T, self.tau)


def discrete_gronwall_bound(inst: GronwallInstance) -> float:
    """``2 exp(3/2 c T) (P_0 + tau sum_{i=1}^N Q_i)``."""
    if not inst.c * inst.tau < 2:
        raise ValueError("c * tau >= 2: hypothesis of the discrete Gronwall lemma violated")
    return 2.0 * math.exp(1.5 * inst.c * inst.T) * (inst.P[0] + inst.tau * float(np.sum(inst.Q[1:])))


def gronwall_instance_at_equality(c: float, tau: float, T: float, P0: float, Q: Sequence[float]) -> GronwallInstance:
    """Instance whose recursion holds with equality in every step.

    ``Q`` lists ``Q_1..Q_N`` (``N = ceil(T / tau)``).
    """
    N = _n_steps(T, tau)
    Q = np.asarray(Q, float)
    if Q.shape != (N,):
        raise ValueError(f"need {N} values Q_1..Q_N")
    x = 0.5 * c * tau
    P = np.empty(N + 1)
    P[0] = P0
    for i in range(1, N + 1):
        P[i] = ((1 + x) * P[i - 1] + tau * Q[i - 1]) / (1 - x)
    return GronwallInstance(c, tau, T, P, np.concatenate([[0.0], Q]))


def random_gronwall_instance(rng: np.random.Generator, max_ctau: float = 2.0 / 3.0) -> GronwallInstance:
    """Random instance at recursion equality with ``c tau <= max_ctau``."""
    tau = float(rng.uniform(1e-3, 0.5))
    c = float(rng.uniform(0.0, max_ctau / tau))
    T = float(rng.uniform(tau, 40 * tau))
    N = _n_steps(T, tau)
    P0 = float(rng.exponential())
    Q = rng.exponential(size=N) * (rng.random(N) < 0.7)
    return gronwall_instance_at_equality(c, tau, T, P0, Q)


def gronwall_max_ratio(inst: GronwallInstance) -> float:
    """``max_i P_i`` divided by the bound (``<= 1`` when the bound holds)."""
    b = discrete_gronwall_bound(inst)
    m = float(np.max(inst.P[1:]))
    if b == 0.0:
        return 0.0 if m == 0.0 else math.inf
    return m / b


# -- energy dissipation ---------------------------------------------------------


@dataclass(frozen=True)
class EnergyDissipationReport:
    """Per-step check of ``D_i + (E_i - E_{i-1}) / tau <= W_i + tol``.

    ``margins[i-1] = W_i + tol - D_i - (E_i - E_{i-1}) / tau``.
    """

    margins: np.ndarray
    tol: float

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else 0.0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= 0))


def check_energy_dissipation(
    traj: StateTrajectory, cfg: ProblemConfig | None = None, C: float = DISCRETIZATION_C
) -> EnergyDissipationReport:
    """Discrete energy inequality with tolerance ``C (tau + h^2) |E_0|``."""
    tau, h = traj.tgrid.tau, traj.mesh.h
    E = np.array([r.total for r in traj.energy])
    W = np.array([r.work for r in traj.energy[1:]])
    D = np.array([r.dissipation for r in traj.energy[1:]])
    tol = C * (tau + h * h) * max(abs(E[0]), 1e-300)
    margins = W + tol - D - np.diff(E) / tau
    return EnergyDissipationReport(margins, tol)


# -- convergence studies ------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceResult:
    sizes: np.ndarray
    errors: np.ndarray
    order: float

    @property
    def pairwise_orders(self) -> np.ndarray:
        return np.log(self.errors[:-1] / self.errors[1:]) / np.log(self.sizes[:-1] / self.sizes[1:])


def observed_order(sizes: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(size)``.

    Returns ``inf`` when all errors vanish (an exact discrete solution).
    """
    s = np.asarray(sizes, float)
    e = np.asarray(errors, float)
    if s.size < 2 or s.shape != e.shape:
        raise ValueError("need at least two matching sizes and errors")
    if np.all(e == 0):
        return math.inf
    if np.any(e <= 0):
        raise ValueError("errors must be positive (or all zero)")
    return float(np.polyfit(np.log(s), np.log(e), 1)[0])


def convergence_study(error_fn: Callable[[float], float], sizes: Sequence[float]) -> ConvergenceResult:
    """Evaluate ``error_fn`` at every size and fit the observed order."""
    errs = np.array([error_fn(s) for s in sizes], float)
    s = np.asarray(sizes, float)
    return ConvergenceResult(s, errs, observed_order(s, errs))


class ManufacturedLinearProblem:
    """Linear system with exact solution ``p = e^{-t} cos(pi x)``,
    ``z = e^{-t} sin(pi x)``.

    Coefficients ``a = 1 + 0.5 x``, ``b = 0.3``, ``mu = 0.5``,
    ``omega = 0.2``, ``A = 0.1``, ``nu = 1``; the forcing is derived from the
    exact solution, including the dynamic boundary condition.
    """

    a0, a1, b, mu, omega, A, nu = 1.0, 0.5, 0.3, 0.5, 0.2, 0.1, 1.0

    def __init__(self, T: float = 0.5):
        self.T = T

    def p_exact(self, t, x):
        return np.exp(-t) * np.cos(math.pi * x)

    def z_exact(self, t, x):
        return np.exp(-t) * np.sin(math.pi * x)

    def a(self, t, x):
        return self.a0 + self.a1 * np.asarray(x, float)

    def forcing(self, mesh: Mesh1D, tg: TimeGrid) -> ForcingTriple:
        pi = math.pi
        cst = -1.0 + pi**2 + self.mu + self.omega * pi

        def h(t, x):
            return np.exp(-t) * cst * np.cos(pi * x)

        def hG(t):
            return np.array([-math.exp(-t), math.exp(-t)])

        def k(t, x):
            return (
                np.exp(-t)
                * np.sin(pi * x)
                * (-self.a(t, x) + self.b + (self.A + self.nu**2) * pi**2 + self.omega * pi)
            )

        return ForcingTriple.from_functions(mesh, tg, h=h, h_Gamma=hG, k=k)

    def quintet(self, mesh: Mesh1D, tg: TimeGrid) -> CoefficientQuintet:
        return CoefficientQuintet.from_functions(
            mesh, tg, a=self.a, b=self.b, mu=self.mu, omega=self.omega, A=self.A
        )

    def solve(self, n_cells: int, n_steps: int, consistent_mass: bool = True) -> LinearTrajectory:
        mesh = Mesh1D(n_cells, consistent_mass=consistent_mass)
        tg = TimeGrid(self.T, n_steps)
        z0 = self.z_exact(0.0, mesh.nodes)
        z0[[0, -1]] = 0.0
        return solve_P(
            self.p_exact(0.0, mesh.nodes), z0, self.quintet(mesh, tg), self.forcing(mesh, tg), self.nu,
            enforce_step_bound=False,
        )

    def error(self, n_cells: int, n_steps: int, consistent_mass: bool = True) -> float:
        """``max_i (|p_i - p(t_i)|_X^2 + |z_i - z(t_i)|_H^2)^{1/2}``."""
        tr = self.solve(n_cells, n_steps, consistent_mass)
        mesh, x = tr.mesh, tr.mesh.nodes
        return max(
            math.sqrt(
                norm_X(mesh, tr.p[i] - self.p_exact(t, x)) ** 2 + norm_H(mesh, tr.z[i] - self.z_exact(t, x)) ** 2
            )
            for i, t in enumerate(tr.tgrid.times)
        )


# -- continuous dependence ----------------------------------------------------------


def check_continuous_dependence(
    run1: LinearTrajectory,
    run2: LinearTrajectory,
    forcing1: ForcingTriple,
    forcing2: ForcingTriple,
    q: CoefficientQuintet,
    nu: float,
    consts: EstimateConstants | None = None,
) -> AprioriItem:
    """Difference of two linear runs against the integrated a-priori bound.

    By linearity the difference solves the same scheme with the difference
    of the data, so ``sup |dp|_X^2 + sup |sqrt(a) dz|^2 + int (|dp|_W^2 +
    nu^2 |dz|_{V0}^2)`` must not exceed ``2 C0 exp(C0 T)`` times the squared
    data difference.
    """
    diff = LinearTrajectory(run1.mesh, run1.tgrid, run1.p - run2.p, run1.z - run2.z)
    dforce = forcing1 + forcing2.scaled(-1.0)
    return check_apriori(diff, q, dforce, nu, consts)["integrated bound"]
