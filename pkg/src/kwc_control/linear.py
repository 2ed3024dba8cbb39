"""Linear parabolic system with dynamic boundary conditions.

Solves, for unknowns ``p`` (bulk, with boundary trace ``p_Gamma``) and ``z``
(homogeneous Dirichlet), the linear system

    p_t - p_xx + mu p + omega z_x = h                in (0, T) x (0, 1),
    d/dt p_Gamma + n . p_x = h_Gamma                 on (0, T) x {0, 1},
    a z_t + b z - ((A + nu^2) z_x + omega p)_x = k   in (0, T) x (0, 1),

by backward Euler in time.  Each step solves one coupled linear system for
``(p_i, z_i)``; it is the Euler--Lagrange system of the strictly convex
quadratic

    E(p, z) = 1/(2 tau) (|p - p_prev|_X^2 + |sqrt(a) (z - z_prev)|_H^2)
              + 1/2 int (p_x^2 + (A + nu^2) z_x^2 + mu p^2 + b z^2)
              + int p omega z_x - (h, p)_X - <k, z>,

so the step matrix is symmetric.  Unknowns are interleaved
``p_0, p_1, z_1, ..., p_{n-1}, z_{n-1}, p_n`` which gives a banded matrix
with three sub- and super-diagonals.

Coefficient layout (``N`` steps, ``n`` cells): ``a``, ``b``, ``mu`` are nodal
arrays of shape ``(N+1, n+1)``; ``omega`` is given per cell and cell endpoint,
shape ``(N+1, n, 2)``, and integrated with the cellwise trapezoidal rule;
``A`` is cellwise, shape ``(N+1, n)``.  Row ``i`` is used by step ``i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from .errors import SolverError, StepSizeError
from .mesh import (
    Mesh1D,
    TimeGrid,
    TridiagonalMatrix,
    diff_x,
    norm_H,
    norm_V,
    norm_V0,
    norm_V0_dual,
    norm_W,
    norm_X,
)

__all__ = [
    "CoefficientQuintet",
    "ForcingTriple",
    "LinearTrajectory",
    "EstimateConstants",
    "StepMatrix",
    "assemble_step_matrix",
    "tau0",
    "constants",
    "solve_step",
    "solve_P",
    "AprioriReport",
    "check_apriori",
    "time_reverse",
    "StepSizeWarning",
]

BAND = 3


class StepSizeWarning(UserWarning):
    """The time step exceeds the guaranteed-solvability bound."""


FieldSpec = float | np.ndarray | Callable[[float, np.ndarray], np.ndarray]


def _sample_nodes(spec: FieldSpec, t: float, x: np.ndarray) -> np.ndarray:
    if callable(spec):
        return np.broadcast_to(np.asarray(spec(t, x), float), x.shape).astype(float)
    return np.broadcast_to(np.asarray(spec, float), x.shape).astype(float)


@dataclass(frozen=True)
class CoefficientQuintet:
    """Coefficients ``[a, b, mu, omega, A]`` sampled on the grids.

    Use :meth:`from_functions` to sample from callables ``f(t, x)`` or
    constants, or pass arrays of the documented shapes directly.
    """

    mesh: Mesh1D
    tgrid: TimeGrid
    a: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    omega: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        N1, n = self.tgrid.n_steps + 1, self.mesh.n_cells
        shapes = {
            "a": (N1, n + 1),
            "b": (N1, n + 1),
            "mu": (N1, n + 1),
            "omega": (N1, n, 2),
            "A": (N1, n),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), float)
            if arr.shape != shape:
                raise ValueError(f"coefficient {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"coefficient {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if not np.min(self.a) > 0:
            raise ValueError("coefficient a must be bounded below by a positive constant")
        if np.min(self.A) < 0:
            raise ValueError("coefficient A must be nonnegative")

    @classmethod
    def from_functions(
        cls,
        mesh: Mesh1D,
        tgrid: TimeGrid,
        a: FieldSpec = 1.0,
        b: FieldSpec = 0.0,
        mu: FieldSpec = 0.0,
        omega: FieldSpec = 0.0,
        A: FieldSpec = 0.0,
    ) -> "CoefficientQuintet":
        """Sample coefficient functions ``f(t, x)`` (or constants).

        ``a``, ``b``, ``omega``, ``A`` are sampled at ``t_i``; ``mu`` is
        averaged over ``(t_{i-1}, t_i)`` with two-point Gauss quadrature.
        ``omega`` is sampled at the cell endpoints and ``A`` at midpoints.
        """
        x, xm = mesh.nodes, mesh.midpoints
        t = tgrid.times
        N = tgrid.n_steps
        arr_a = np.array([_sample_nodes(a, ti, x) for ti in t])
        arr_b = np.array([_sample_nodes(b, ti, x) for ti in t])
        g = 0.5 / math.sqrt(3.0)
        arr_mu = np.empty((N + 1, mesh.n_nodes))
        arr_mu[0] = _sample_nodes(mu, t[0], x)
        for i in range(1, N + 1):
            tm = 0.5 * (t[i - 1] + t[i])
            arr_mu[i] = 0.5 * (
                _sample_nodes(mu, tm - g * tgrid.tau, x) + _sample_nodes(mu, tm + g * tgrid.tau, x)
            )
        om = np.array([_sample_nodes(omega, ti, x) for ti in t])
        arr_om = np.stack([om[:, :-1], om[:, 1:]], axis=-1)
        arr_A = np.array([_sample_nodes(A, ti, xm) for ti in t])
        return cls(mesh, tgrid, arr_a, arr_b, arr_mu, arr_om, arr_A)

    # -- sampled norms ------------------------------------------------------
    @property
    def delta_star(self) -> float:
        """``delta_*(a)``: the sampled minimum of ``a``."""
        return float(np.min(self.a))

    @property
    def a_w1inf(self) -> float:
        """``|a|_inf + |a_t|_inf + |a_x|_inf`` from difference quotients."""
        val = float(np.max(np.abs(self.a)))
        if self.tgrid.n_steps > 0:
            val += float(np.max(np.abs(np.diff(self.a, axis=0)))) / self.tgrid.tau
        val += float(np.max(np.abs(np.diff(self.a, axis=1)))) / self.mesh.h
        return val

    @property
    def b_inf(self) -> float:
        return float(np.max(np.abs(self.b)))

    @property
    def mu_LinfH(self) -> float:
        """``sup_i |mu_i|_H``."""
        return max(norm_H(self.mesh, m) for m in self.mu)

    @property
    def omega_inf(self) -> float:
        return float(np.max(np.abs(self.omega)))

    @property
    def A_inf(self) -> float:
        return float(np.max(np.abs(self.A)))

    def at(self, i: int) -> tuple[np.ndarray, ...]:
        return self.a[i], self.b[i], self.mu[i], self.omega[i], self.A[i]


@dataclass(frozen=True)
class ForcingTriple:
    """Forcing ``[h, h_Gamma, k]`` on the time nodes.

    ``h``: nodal, ``(N+1, n+1)``; ``h_Gamma``: ``(N+1, 2)``; ``k``: nodal
    density of the ``V_0^*`` load, ``(N+1, n+1)`` (boundary values are
    irrelevant).  Row ``i`` is used by step ``i``.
    """

    h: np.ndarray
    h_Gamma: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        for name in ("h", "h_Gamma", "k"):
            arr = np.asarray(getattr(self, name), float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"forcing {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.h.shape != self.k.shape or self.h_Gamma.shape != (self.h.shape[0], 2):
            raise ValueError("inconsistent forcing shapes")

    @classmethod
    def zeros(cls, mesh: Mesh1D, tgrid: TimeGrid) -> "ForcingTriple":
        N1 = tgrid.n_steps + 1
        return cls(np.zeros((N1, mesh.n_nodes)), np.zeros((N1, 2)), np.zeros((N1, mesh.n_nodes)))

    @classmethod
    def from_functions(
        cls,
        mesh: Mesh1D,
        tgrid: TimeGrid,
        h: FieldSpec = 0.0,
        h_Gamma: Callable[[float], tuple[float, float]] | None = None,
        k: FieldSpec = 0.0,
    ) -> "ForcingTriple":
        """Sample forcings at the time nodes ``t_i``."""
        t = tgrid.times
        x = mesh.nodes
        H = np.array([_sample_nodes(h, ti, x) for ti in t])
        K = np.array([_sample_nodes(k, ti, x) for ti in t])
        if h_Gamma is None:
            HG = np.zeros((t.size, 2))
        else:
            HG = np.array([np.asarray(h_Gamma(ti), float) for ti in t])
        return cls(H, HG, K)

    def __add__(self, other: "ForcingTriple") -> "ForcingTriple":
        return ForcingTriple(self.h + other.h, self.h_Gamma + other.h_Gamma, self.k + other.k)

    def scaled(self, s: float) -> "ForcingTriple":
        return ForcingTriple(s * self.h, s * self.h_Gamma, s * self.k)


@dataclass(frozen=True)
class LinearTrajectory:
    """Discrete solution: ``p`` and ``z`` at every time node.

    ``p`` has shape ``(N+1, n+1)`` and its boundary trace is ``p[:, [0, -1]]``;
    ``z`` has the same shape with zero boundary columns.
    """

    mesh: Mesh1D
    tgrid: TimeGrid
    p: np.ndarray
    z: np.ndarray

    @property
    def p_Gamma(self) -> np.ndarray:
        return self.p[:, [0, -1]]


@dataclass(frozen=True)
class EstimateConstants:
    """Step-size bound and a-priori constants of the linear system."""

    tau0: float
    C0: float
    C1: float
    C2: float


def tau0(q: CoefficientQuintet, nu: float) -> float:
    """Step-size bound below which each step is uniquely solvable.

    ``min{1, nu^2, delta_*(a)} / (16 (1 + |b| + |mu|^2 + |omega|^2))``.
    """
    return min(1.0, nu**2, q.delta_star) / (
        16.0 * (1.0 + q.b_inf + q.mu_LinfH**2 + q.omega_inf**2)
    )


def constants(q: CoefficientQuintet, nu: float, T: float | None = None) -> EstimateConstants:
    """Evaluate ``tau0``, ``C0``, ``C1`` and ``C2`` from the sampled norms."""
    T = q.tgrid.T if T is None else T
    C0 = (
        16.0
        * (1.0 + q.a_w1inf + q.b_inf + q.mu_LinfH**2 + q.omega_inf**2)
        / min(1.0, nu**2, q.delta_star)
    )
    grow = math.exp(1.5 * C0 * T) if 1.5 * C0 * T < 700 else math.inf
    C1 = 4.0 * C0**2 * grow
    C2 = (
        4.0
        * C0**6
        * grow
        * (1.0 + q.a_w1inf) ** 2
        * (1.0 + nu + q.b_inf + q.omega_inf + q.A_inf) ** 2
    )
    return EstimateConstants(tau0(q, nu), C0, C1, C2)


def time_reverse(seq: np.ndarray) -> np.ndarray:
    """Reverse a sequence of time-node values: ``out[i] = seq[N - i]``."""
    return np.asarray(seq)[::-1].copy()


# -- step matrix ---------------------------------------------------------------


def _p_index(n: int) -> np.ndarray:
    idx = 2 * np.arange(n + 1) - 1
    idx[0] = 0
    return idx


def _z_index(n: int) -> np.ndarray:
    return 2 * np.arange(1, n)


class StepMatrix:
    """Banded coupled step matrix with interleaved ``p``/``z`` unknowns."""

    def __init__(self, n_cells: int, rows, cols, vals):
        self.n_cells = n_cells
        self.size = 2 * n_cells
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.vals = np.concatenate(vals)
        ab = np.zeros((2 * BAND + 1, self.size))
        np.add.at(ab, (BAND + self.rows - self.cols, self.cols), self.vals)
        self.ab = ab
        self.p_index = _p_index(n_cells)
        self.z_index = _z_index(n_cells)

    def pack(self, p: np.ndarray, z_int: np.ndarray) -> np.ndarray:
        x = np.empty(self.size)
        x[self.p_index] = p
        x[self.z_index] = z_int
        return x

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[self.p_index].copy(), x[self.z_index].copy()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.size)
        np.add.at(y, self.rows, self.vals * x[self.cols])
        return y

    def to_dense(self) -> np.ndarray:
        D = np.zeros((self.size, self.size))
        np.add.at(D, (self.rows, self.cols), self.vals)
        return D

    def solve(self, rhs: np.ndarray, step: int | None = None) -> np.ndarray:
        try:
            with np.errstate(all="raise"):
                x = solve_banded((BAND, BAND), self.ab, rhs, check_finite=False)
        except (LinAlgError, FloatingPointError) as exc:
            cond = float(np.linalg.cond(self.to_dense()))
            raise SolverError(f"singular step matrix (condition estimate {cond:.3e})", step) from exc
        if not np.all(np.isfinite(x)):
            cond = float(np.linalg.cond(self.to_dense()))
            raise SolverError(f"non-finite step solution (condition estimate {cond:.3e})", step)
        return x


def _tri_entries(T: TridiagonalMatrix, idx: np.ndarray):
    m = T.size
    r = [idx, idx[1:], idx[:-1]]
    c = [idx, idx[:-1], idx[1:]]
    v = [T.diag, T.lower, T.upper]
    if m == 1:
        return [idx], [idx], [T.diag]
    return r, c, v


def assemble_step_matrix(
    mesh: Mesh1D,
    tau: float,
    nu: float,
    a: np.ndarray,
    b: np.ndarray,
    mu: np.ndarray,
    omega: np.ndarray,
    A: np.ndarray,
) -> StepMatrix:
    """Assemble the coupled step matrix for one time step.

    Parameters
    ----------
    mesh : Mesh1D
    tau, nu : float
    a, b, mu : ndarray, shape (n+1,)
        Nodal coefficients at the current step.
    omega : ndarray, shape (n, 2)
        Cell-endpoint values of the coupling coefficient.
    A : ndarray, shape (n,)
        Cellwise coefficient of the extra ``z`` diffusion.
    """
    n = mesh.n_cells
    pidx, zidx = _p_index(n), _z_index(n)
    PP = mesh.mass_X().scaled(1.0 / tau) + mesh.stiffness_matrix()
    PP = PP.add_diag(mesh.weights * mu)
    ZZ = (
        mesh.mass_matrix(a).scaled(1.0 / tau)
        + mesh.mass_matrix(b)
        + mesh.stiffness_matrix(A + nu**2)
    ).interior()
    rows, cols, vals = [], [], []
    for r, c, v in (_tri_entries(PP, pidx), _tri_entries(ZZ, zidx)):
        rows += r
        cols += c
        vals += v
    # coupling (omega z_x, phi_e) on cell c = (l, l+1): (h/2) omega_{c,e} z'_c
    cells = np.arange(n)
    for side in (0, 1):
        e = cells + side  # node carrying the test function
        w = 0.5 * omega[:, side]
        for zsign, znode in ((-1.0, cells), (1.0, cells + 1)):
            keep = (znode >= 1) & (znode <= n - 1)
            pr = pidx[e[keep]]
            zc = zidx[znode[keep] - 1]
            v = zsign * w[keep]
            rows += [pr, zc]
            cols += [zc, pr]
            vals += [v, v]
    return StepMatrix(n, rows, cols, vals)


def _step_rhs(
    mesh: Mesh1D,
    tau: float,
    a: np.ndarray,
    p_prev: np.ndarray,
    z_prev: np.ndarray,
    h: np.ndarray,
    h_Gamma: np.ndarray,
    k: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    rp = mesh.mass_X().matvec(p_prev) / tau + mesh.load(h)
    rp[0] += h_Gamma[0]
    rp[-1] += h_Gamma[1]
    rz = (mesh.mass_matrix(a).matvec(z_prev) / tau + mesh.load(k))[1:-1]
    return rp, rz


def solve_step(
    mesh: Mesh1D,
    tau: float,
    nu: float,
    coeffs: tuple[np.ndarray, ...],
    p_prev: np.ndarray,
    z_prev: np.ndarray,
    h: np.ndarray,
    h_Gamma: np.ndarray,
    k: np.ndarray,
    step: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One backward-Euler step of the coupled linear system.

    Parameters
    ----------
    coeffs : tuple
        ``(a_i, b_i, mu_i, omega_i, A_i)`` as returned by
        :meth:`CoefficientQuintet.at`.
    p_prev, z_prev : ndarray, shape (n+1,)
        Previous values; ``z_prev`` must vanish at the boundary.
    h, h_Gamma, k : ndarray
        Forcing at the current step.

    Returns
    -------
    p, z : ndarray, shape (n+1,)
    """
    a, b, mu, omega, A = coeffs
    Mtx = assemble_step_matrix(mesh, tau, nu, a, b, mu, omega, A)
    rp, rz = _step_rhs(mesh, tau, a, p_prev, z_prev, h, h_Gamma, k)
    p, zi = Mtx.unpack(Mtx.solve(Mtx.pack(rp, rz), step))
    return p, mesh.extend(zi)


def check_step_size(tau: float, bound: float) -> None:
    """Refuse ``tau >= 2 bound``; warn for ``tau`` in ``[bound, 2 bound)``."""
    if tau >= 2.0 * bound:
        raise StepSizeError(
            f"time step {tau:.6g} >= 2 tau0 = {2 * bound:.6g}; unique solvability not guaranteed"
        )
    if tau >= bound:
        warnings.warn(
            f"time step {tau:.6g} exceeds tau0 = {bound:.6g}; solvability guarantee lost",
            StepSizeWarning,
            stacklevel=3,
        )


def solve_P(
    p0: np.ndarray,
    z0: np.ndarray,
    q: CoefficientQuintet,
    forcing: ForcingTriple,
    nu: float,
    enforce_step_bound: bool = True,
) -> LinearTrajectory:
    """March the linear scheme over all time steps.

    Parameters
    ----------
    p0 : ndarray, shape (n+1,)
        Initial bulk values; the boundary initial values are its trace.
    z0 : ndarray, shape (n+1,)
        Initial ``z``, zero at both boundary points.
    q : CoefficientQuintet
    forcing : ForcingTriple
    nu : float
        Positive diffusion parameter.
    enforce_step_bound : bool
        Apply the warn/refuse policy of :func:`check_step_size`.

    Returns
    -------
    LinearTrajectory
    """
    mesh, tg = q.mesh, q.tgrid
    if nu <= 0:
        raise ValueError("nu must be positive")
    p0 = mesh.check_nodal(p0, "p0")
    z0 = mesh.check_zero_trace(z0, "z0")
    if forcing.h.shape != (tg.n_steps + 1, mesh.n_nodes):
        raise ValueError("forcing does not match the grids")
    if enforce_step_bound:
        check_step_size(tg.tau, tau0(q, nu))
    N = tg.n_steps
    P = np.empty((N + 1, mesh.n_nodes))
    Z = np.empty((N + 1, mesh.n_nodes))
    P[0], Z[0] = p0, z0
    for i in range(1, N + 1):
        P[i], Z[i] = solve_step(
            mesh,
            tg.tau,
            nu,
            q.at(i),
            P[i - 1],
            Z[i - 1],
            forcing.h[i],
            forcing.h_Gamma[i],
            forcing.k[i],
            step=i,
        )
    return LinearTrajectory(mesh, tg, P, Z)


# -- a-priori estimates --------------------------------------------------------


@dataclass(frozen=True)
class AprioriItem:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        """Relative slack ``(rhs - lhs) / max(|rhs|, tiny)``."""
        scale = max(abs(self.rhs), 1e-300)
        return (self.rhs - self.lhs) / scale

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 1e-12 * max(abs(self.rhs), abs(self.lhs))


@dataclass(frozen=True)
class AprioriReport:
    items: tuple[AprioriItem, ...]

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def __getitem__(self, name: str) -> AprioriItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)


def _az_norm2(mesh: Mesh1D, a: np.ndarray, z: np.ndarray) -> float:
    return float(np.dot(z, mesh.mass_matrix(a).matvec(z)))


def _h_norm2(mesh: Mesh1D, h: np.ndarray, hG: np.ndarray) -> float:
    return norm_H(mesh, h) ** 2 + float(np.dot(hG, hG))


def check_apriori(
    traj: LinearTrajectory,
    q: CoefficientQuintet,
    forcing: ForcingTriple,
    nu: float,
    consts: EstimateConstants | None = None,
) -> AprioriReport:
    """Verify the discrete energy inequalities and the integrated bounds.

    Checked items:

    * ``step energy``: for every step,
      ``(|p_i|_X^2 - |p_{i-1}|_X^2)/tau + (|sqrt(a_i) z_i|^2 -
      |sqrt(a_{i-1}) z_{i-1}|^2)/tau + |p_i|_W^2 + nu^2 |z_i|_{V0}^2
      <= C0/2 (sum of the four squared norms) + C0 (|h_i|_X^2 +
      |k_i|_{V0*}^2)``; reported for the worst step;
    * ``step increment``: ``|p_i - p_{i-1}|_X^2/tau + |p_{i,x}|^2 -
      |p_{i-1,x}|^2 <= C0 tau (|p_i|_V^2 + nu^2 |z_i|_{V0}^2) + 2 tau
      |h_i|_X^2``; worst step;
    * ``integrated bound``: sup norms plus time integrals against
      ``2 C0 exp(C0 T)`` times the data norm;
    * ``time derivative bound``: ``|dp/dt|^2 + |p|_{L^inf V}^2`` against
      ``C1`` times the data norm (with ``|p_0|_W``);
    * ``dual time derivative bound``: ``|dz/dt|_{V0*}^2`` against ``C2``
      times the same data norm.
    """
    mesh, tg = traj.mesh, traj.tgrid
    tau, N = tg.tau, tg.n_steps
    c = consts if consts is not None else constants(q, nu)
    P, Z = traj.p, traj.z
    pX2 = np.array([norm_X(mesh, P[i]) ** 2 for i in range(N + 1)])
    az2 = np.array([_az_norm2(mesh, q.a[i], Z[i]) for i in range(N + 1)])
    pW2 = np.array([norm_W(mesh, P[i]) ** 2 for i in range(N + 1)])
    pV2 = np.array([norm_V(mesh, P[i]) ** 2 for i in range(N + 1)])
    zV02 = np.array([norm_V0(mesh, Z[i]) ** 2 for i in range(N + 1)])
    px2 = np.array([float(mesh.h * np.sum(diff_x(mesh, P[i]) ** 2)) for i in range(N + 1)])
    hX2 = np.array([_h_norm2(mesh, forcing.h[i], forcing.h_Gamma[i]) for i in range(N + 1)])
    kD2 = np.array([norm_V0_dual(mesh, forcing.k[i]) ** 2 for i in range(N + 1)])

    worst_I = (0.0, 0.0, -math.inf)
    worst_II = (0.0, 0.0, -math.inf)
    for i in range(1, N + 1):
        lhs = (pX2[i] - pX2[i - 1]) / tau + (az2[i] - az2[i - 1]) / tau + pW2[i] + nu**2 * zV02[i]
        rhs = 0.5 * c.C0 * (pX2[i] + pX2[i - 1] + az2[i] + az2[i - 1]) + c.C0 * (hX2[i] + kD2[i])
        if lhs - rhs > worst_I[2]:
            worst_I = (lhs, rhs, lhs - rhs)
        dp2 = norm_X(mesh, P[i] - P[i - 1]) ** 2
        lhs = dp2 / tau + px2[i] - px2[i - 1]
        rhs = c.C0 * tau * (pV2[i] + nu**2 * zV02[i]) + 2.0 * tau * hX2[i]
        if lhs - rhs > worst_II[2]:
            worst_II = (lhs, rhs, lhs - rhs)

    data_X = pX2[0] + az2[0] + tau * float(np.sum(hX2[1:] + kD2[1:]))
    data_W = pW2[0] + az2[0] + tau * float(np.sum(hX2[1:] + kD2[1:]))
    lhs_int = float(np.max(pX2) + np.max(az2)) + tau * float(np.sum(pW2[1:] + nu**2 * zV02[1:]))
    rhs_int = 2.0 * c.C0 * math.exp(min(c.C0 * tg.T, 700.0)) * data_X
    dpdt2 = sum(norm_X(mesh, P[i] - P[i - 1]) ** 2 for i in range(1, N + 1)) / tau
    lhs_B01 = dpdt2 + float(np.max(pV2))
    dzdt2 = sum(norm_V0_dual(mesh, Z[i] - Z[i - 1]) ** 2 for i in range(1, N + 1)) / tau
    items = (
        AprioriItem("step energy", worst_I[0], worst_I[1]),
        AprioriItem("step increment", worst_II[0], worst_II[1]),
        AprioriItem("integrated bound", lhs_int, rhs_int),
        AprioriItem("time derivative bound", lhs_B01, c.C1 * data_W),
        AprioriItem("dual time derivative bound", dzdt2, c.C2 * data_W),
    )
    return AprioriReport(items)
