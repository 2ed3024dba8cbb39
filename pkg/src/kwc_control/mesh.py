"""Uniform 1D mesh, time grid and the discrete function spaces.

Spatial discretisation is continuous piecewise-linear (P1) finite elements on
a uniform partition of ``(0, 1)``.  The two end nodes carry the boundary
component of the dynamic boundary condition, so a bulk/boundary pair is
represented by its bulk nodal vector alone and the boundary pair is read off
as the trace ``(f[0], f[-1])``.

Quadrature conventions used throughout the package:

* terms with a time derivative and loads use the mass matrix ``M_H``, which is
  lumped (trapezoidal weights) by default and the consistent P1 mass matrix
  when ``consistent_mass=True``;
* flux terms are integrated exactly for cellwise-constant coefficients
  (one-point midpoint rule);
* nonlinear reaction terms use nodal (lumped) quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "Mesh1D",
    "TimeGrid",
    "BulkBoundaryFn",
    "outward_sign",
    "trace",
    "diff_x",
    "inner_H",
    "inner_X",
    "norm_H",
    "norm_X",
    "norm_V",
    "norm_W",
    "norm_V0",
    "norm_V0_dual",
    "cell_average",
    "node_from_cells",
    "TridiagonalMatrix",
]


def outward_sign(ell: int) -> int:
    """Outward normal sign ``(-1)**(ell - 1)`` at the boundary point ``ell``.

    Parameters
    ----------
    ell : int
        Boundary point, either 0 or 1.

    Returns
    -------
    int
        ``-1`` at ``x = 0`` and ``+1`` at ``x = 1``.
    """
    if ell not in (0, 1):
        raise ValueError(f"boundary point must be 0 or 1, got {ell!r}")
    return -1 if ell == 0 else 1


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Symmetric-or-not tridiagonal matrix in banded storage.

    ``lower[k]`` couples rows ``k+1`` and ``k``; ``upper[k]`` couples rows
    ``k`` and ``k+1``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.upper * x[1:]
        y[1:] += self.lower * x[:-1]
        return y

    def __add__(self, other: "TridiagonalMatrix") -> "TridiagonalMatrix":
        return TridiagonalMatrix(
            self.lower + other.lower, self.diag + other.diag, self.upper + other.upper
        )

    def scaled(self, s: float) -> "TridiagonalMatrix":
        return TridiagonalMatrix(s * self.lower, s * self.diag, s * self.upper)

    def add_diag(self, d: np.ndarray) -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.lower, self.diag + d, self.upper)

    def interior(self) -> "TridiagonalMatrix":
        """Drop the first and last rows and columns."""
        return TridiagonalMatrix(
            self.lower[1:-1].copy(), self.diag[1:-1].copy(), self.upper[1:-1].copy()
        )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        n = self.size
        if n == 1:
            return rhs / self.diag
        ab = np.zeros((3, n))
        ab[0, 1:] = self.upper
        ab[1] = self.diag
        ab[2, :-1] = self.lower
        return solve_banded((1, 1), ab, rhs)

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.upper, 1)
            + np.diag(self.lower, -1)
        )


class Mesh1D:
    """Uniform partition of ``(0, 1)`` into ``n_cells`` cells.

    Parameters
    ----------
    n_cells : int
        Number of cells, at least 2 so that ``V_0`` is nontrivial.
    consistent_mass : bool, optional
        Use the consistent P1 mass matrix for ``H`` inner products instead of
        the lumped (trapezoidal) one.

    Attributes
    ----------
    h : float
        Cell width ``1 / n_cells``.
    nodes : ndarray, shape (n_cells + 1,)
        Node coordinates.
    midpoints : ndarray, shape (n_cells,)
        Cell midpoints.
    weights : ndarray, shape (n_cells + 1,)
        Lumped quadrature weights ``(h/2, h, ..., h, h/2)``.
    """

    def __init__(self, n_cells: int, consistent_mass: bool = False):
        if int(n_cells) != n_cells or n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {n_cells!r}")
        self.n_cells = int(n_cells)
        self.consistent_mass = bool(consistent_mass)
        self.h = 1.0 / self.n_cells
        self.nodes = np.linspace(0.0, 1.0, self.n_cells + 1)
        self.midpoints = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        w = np.full(self.n_cells + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        self.weights = w
        self._cache: dict[str, TridiagonalMatrix] = {}

    def _cached(self, key: str, build) -> TridiagonalMatrix:
        # matrices are never modified in place, so sharing them is safe
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def __repr__(self) -> str:
        mass = "consistent" if self.consistent_mass else "lumped"
        return f"Mesh1D(n_cells={self.n_cells}, mass={mass!r})"

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    # -- matrices ---------------------------------------------------------
    def mass_matrix(self, coef: np.ndarray | None = None) -> TridiagonalMatrix:
        """Mass matrix of ``(c f, g)_H`` for a nodal coefficient ``c``.

        Lumped: ``diag(w * c)``.  Consistent: the exact P1 element mass
        matrix scaled per cell by the cell average of ``c``.
        """
        if coef is None and "mass" not in self._cache:
            self._cache["mass"] = self.mass_matrix(np.ones(self.n_nodes))
        if coef is None:
            return self._cache["mass"]
        n = self.n_nodes
        c = np.broadcast_to(np.asarray(coef, float), (n,))
        if not self.consistent_mass:
            return TridiagonalMatrix(np.zeros(n - 1), self.weights * c, np.zeros(n - 1))
        cbar = 0.5 * (c[:-1] + c[1:])
        diag = np.zeros(n)
        diag[:-1] += cbar * self.h / 3.0
        diag[1:] += cbar * self.h / 3.0
        off = cbar * self.h / 6.0
        return TridiagonalMatrix(off.copy(), diag, off.copy())

    def stiffness_matrix(self, cell_coef: np.ndarray | None = None) -> TridiagonalMatrix:
        """Matrix of ``(c f_x, g_x)_H`` for a cellwise coefficient ``c``."""
        if cell_coef is None:
            return self._cached("stiffness", lambda: self.stiffness_matrix(np.ones(self.n_cells)))
        n = self.n_nodes
        c = np.broadcast_to(np.asarray(cell_coef, float), (self.n_cells,))
        k = c / self.h
        diag = np.zeros(n)
        diag[:-1] += k
        diag[1:] += k
        return TridiagonalMatrix(-k.copy(), diag, -k.copy())

    def boundary_matrix(self) -> TridiagonalMatrix:
        """Matrix of the boundary product ``f(0) g(0) + f(1) g(1)``."""
        n = self.n_nodes
        d = np.zeros(n)
        d[0] = d[-1] = 1.0
        return TridiagonalMatrix(np.zeros(n - 1), d, np.zeros(n - 1))

    def mass_X(self) -> TridiagonalMatrix:
        """Matrix of the ``X = H x H_Gamma`` inner product."""
        return self._cached("mass_X", lambda: self.mass_matrix() + self.boundary_matrix())

    def load(self, density: np.ndarray) -> np.ndarray:
        """Load vector ``(f, phi_j)_H`` of a nodal density ``f``."""
        return self.mass_matrix().matvec(np.asarray(density, float))

    # -- grid-function helpers ----------------------------------------------
    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_nodes)

    def sample(self, fn) -> np.ndarray:
        """Sample ``fn(x)`` at the nodes."""
        return np.asarray(np.broadcast_to(fn(self.nodes), (self.n_nodes,)), float).copy()

    def extend(self, interior: np.ndarray) -> np.ndarray:
        """Zero-extend interior nodal values to a full nodal vector."""
        f = np.zeros(self.n_nodes)
        f[1:-1] = interior
        return f

    def check_nodal(self, f: np.ndarray, name: str = "grid function") -> np.ndarray:
        f = np.asarray(f, float)
        if f.shape != (self.n_nodes,):
            raise ValueError(f"{name} has shape {f.shape}, expected ({self.n_nodes},)")
        return f

    def check_zero_trace(self, f: np.ndarray, name: str = "grid function") -> np.ndarray:
        """Validate zero boundary values; roundoff up to ``1e-12`` is snapped to 0."""
        f = self.check_nodal(f, name)
        if abs(f[0]) > 1e-12 or abs(f[-1]) > 1e-12:
            raise ValueError(f"{name} must vanish at both boundary points")
        if f[0] != 0.0 or f[-1] != 0.0:
            f = f.copy()
            f[[0, -1]] = 0.0
        return f


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_i = i * tau``, ``i = 0..N``, with ``N tau = T``.

    Parameters
    ----------
    T : float
        Final time.
    n_steps : int
        Number of steps ``N``.
    """

    T: float
    n_steps: int
    tau: float = field(init=False)
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"final time must be positive, got {self.T!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        tau = self.T / self.n_steps
        if tau >= 1.0:
            raise ValueError(f"time step must lie in (0, 1), got tau={tau}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "times", np.linspace(0.0, self.T, self.n_steps + 1))

    @classmethod
    def from_tau(cls, T: float, tau: float) -> "TimeGrid":
        """Grid with the smallest ``N`` such that ``T / N <= tau``."""
        n = max(1, math.ceil(T / tau - 1e-12))
        return cls(T, n)


@dataclass(frozen=True)
class BulkBoundaryFn:
    """A pair ``[f, f_Gamma]`` with ``f_Gamma`` equal to the trace of ``f``.

    Raises ``ValueError`` if the boundary values disagree with the trace.
    """

    bulk: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        bulk = np.asarray(self.bulk, float)
        bnd = np.asarray(self.boundary, float)
        if bulk.ndim != 1 or bulk.size < 3:
            raise ValueError("bulk component must be a nodal vector with >= 3 entries")
        if bnd.shape != (2,):
            raise ValueError("boundary component must have exactly two values")
        if not np.array_equal(bnd, bulk[[0, -1]]):
            raise ValueError(
                f"boundary values {bnd.tolist()} are not the trace "
                f"{bulk[[0, -1]].tolist()} of the bulk function"
            )
        object.__setattr__(self, "bulk", bulk)
        object.__setattr__(self, "boundary", bnd)

    @classmethod
    def from_bulk(cls, bulk: np.ndarray) -> "BulkBoundaryFn":
        bulk = np.asarray(bulk, float)
        return cls(bulk, bulk[[0, -1]].copy())


def trace(f: np.ndarray) -> np.ndarray:
    """Boundary values ``(f(0), f(1))`` of a nodal vector (last axis)."""
    f = np.asarray(f)
    return f[..., [0, -1]]


def diff_x(mesh: Mesh1D, f: np.ndarray) -> np.ndarray:
    """Cellwise derivative of a P1 function (forward differences)."""
    f = np.asarray(f, float)
    return np.diff(f, axis=-1) / mesh.h


def cell_average(f: np.ndarray) -> np.ndarray:
    """Trapezoidal cell average of nodal values (last axis)."""
    f = np.asarray(f, float)
    return 0.5 * (f[..., :-1] + f[..., 1:])


def node_from_cells(mesh: Mesh1D, c: np.ndarray) -> np.ndarray:
    """Nodal values ``F_j`` with ``w_j F_j = sum_{cells at j} (h/2) c_cell``.

    This is the nodal representative of a cellwise function under lumped
    quadrature: ``sum_j w_j a_j F_j`` equals the cellwise trapezoidal rule of
    ``a * c`` for nodal ``a``.
    """
    c = np.asarray(c, float)
    out = np.zeros(c.shape[:-1] + (mesh.n_nodes,))
    out[..., :-1] += 0.5 * mesh.h * c
    out[..., 1:] += 0.5 * mesh.h * c
    return out / mesh.weights


def inner_H(mesh: Mesh1D, f: np.ndarray, g: np.ndarray) -> float:
    """``(f, g)_H`` of two nodal vectors."""
    return float(np.dot(f, mesh.mass_matrix().matvec(np.asarray(g, float))))


def inner_X(mesh: Mesh1D, f: np.ndarray, g: np.ndarray) -> float:
    """``(f, g)_X``: bulk ``H`` product plus the two boundary products."""
    f = np.asarray(f, float)
    g = np.asarray(g, float)
    return inner_H(mesh, f, g) + float(f[0] * g[0] + f[-1] * g[-1])


def norm_H(mesh: Mesh1D, f: np.ndarray) -> float:
    return math.sqrt(max(inner_H(mesh, f, f), 0.0))


def norm_X(mesh: Mesh1D, f: np.ndarray) -> float:
    return math.sqrt(max(inner_X(mesh, f, f), 0.0))


def _seminorm2(mesh: Mesh1D, f: np.ndarray) -> float:
    d = diff_x(mesh, f)
    return float(mesh.h * np.dot(d, d))


def norm_V(mesh: Mesh1D, f: np.ndarray) -> float:
    """``H^1`` norm ``(|f|_H^2 + |f_x|_H^2)^(1/2)``."""
    return math.sqrt(inner_H(mesh, f, f) + _seminorm2(mesh, f))


def norm_W(mesh: Mesh1D, f: np.ndarray) -> float:
    """Norm of ``[f, f_Gamma]`` in ``V x H_Gamma``."""
    f = np.asarray(f, float)
    return math.sqrt(norm_V(mesh, f) ** 2 + float(f[0] ** 2 + f[-1] ** 2))


def norm_V0(mesh: Mesh1D, f: np.ndarray) -> float:
    """Norm of ``V_0 = H^1_0``: ``|f_x|_H``."""
    return math.sqrt(_seminorm2(mesh, f))


def norm_V0_dual(mesh: Mesh1D, f: np.ndarray) -> float:
    """Dual norm in ``V_0^*`` of the functional ``psi -> (f, psi)_H``.

    Parameters
    ----------
    mesh : Mesh1D
    f : ndarray
        Density, given either at all nodes or at the interior nodes only.

    Returns
    -------
    float
        ``sqrt(l^T K^{-1} l)`` where ``l`` is the interior load vector and
        ``K`` the Dirichlet stiffness matrix.
    """
    f = np.asarray(f, float)
    if f.shape == (mesh.n_interior,):
        f = mesh.extend(f)
    mesh.check_nodal(f, "density")
    load = mesh.load(f)[1:-1]
    return dual_norm_of_load(mesh, load)


def dual_norm_of_load(mesh: Mesh1D, load: np.ndarray) -> float:
    """``sqrt(l^T K^{-1} l)`` for an interior load vector ``l``."""
    K = mesh.stiffness_matrix().interior()
    y = K.solve(np.asarray(load, float))
    return math.sqrt(max(float(np.dot(load, y)), 0.0))
