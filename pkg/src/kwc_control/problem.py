"""Problem data: controls, states and the optimal-control configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .material import MaterialModel
from .mesh import BulkBoundaryFn, Mesh1D, TimeGrid

__all__ = [
    "Weights",
    "ProblemConfig",
    "ControlTriple",
    "GradientTriple",
    "StateTriple",
    "SolverTolerances",
]


@dataclass(frozen=True)
class Weights:
    """Nonnegative cost weights.

    ``K, K_Gamma, Lambda`` weight the tracking terms of ``eta``,
    ``eta_Gamma`` and ``theta``; ``L, L_Gamma, M`` weight the controls and
    also multiply them in the state equations.
    """

    K: float = 1.0
    K_Gamma: float = 1.0
    Lambda: float = 1.0
    L: float = 1.0
    L_Gamma: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"weight {name} must be finite and nonnegative, got {val!r}")


@dataclass(frozen=True)
class SolverTolerances:
    """Newton settings of the nonlinear time steps.

    ``scheme`` selects ``"split"`` (eta step with the previous theta, then
    theta step with the new eta) or ``"coupled"`` (one Newton solve for both
    fields; requires ``eps > 0``).
    """

    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    scheme: str = "split"
    certificate_samples: int = 50
    certificate_tol: float = 1e-7

    def __post_init__(self):
        if self.scheme not in ("split", "coupled"):
            raise ValueError(f"unknown time-stepping scheme {self.scheme!r}")
        if not self.newton_tol > 0 or self.newton_max_iter < 1:
            raise ValueError("Newton tolerance and iteration cap must be positive")


@dataclass(frozen=True)
class ControlTriple:
    """Controls ``[u, u_Gamma, v]`` on the time nodes.

    ``u`` and ``v`` are nodal, shape ``(N+1, n+1)``; ``u_Gamma`` has shape
    ``(N+1, 2)``.  Under the backward (right-endpoint) time interpolation the
    value at node ``i >= 1`` acts on ``(t_{i-1}, t_i]``; node 0 is unused by
    the dynamics and by the cost.
    """

    u: np.ndarray
    u_Gamma: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("u", "u_Gamma", "v"):
            arr = np.asarray(getattr(self, name), float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"control {name} has non-finite entries")
            object.__setattr__(self, name, arr)
        if self.u.shape != self.v.shape or self.u_Gamma.shape != (self.u.shape[0], 2):
            raise ValueError("inconsistent control shapes")

    @classmethod
    def zeros(cls, mesh: Mesh1D, tgrid: TimeGrid) -> "ControlTriple":
        N1 = tgrid.n_steps + 1
        return cls(np.zeros((N1, mesh.n_nodes)), np.zeros((N1, 2)), np.zeros((N1, mesh.n_nodes)))

    @classmethod
    def random(cls, mesh: Mesh1D, tgrid: TimeGrid, rng: np.random.Generator, scale: float = 1.0):
        """Smooth random controls (a few low Fourier modes in space and time)."""
        t = tgrid.times[:, None]
        x = mesh.nodes[None, :]

        def smooth():
            out = np.zeros((t.size, x.size))
            for kt in range(3):
                for kx in range(3):
                    c = rng.normal() / (1 + kt + kx)
                    out += c * np.cos(math.pi * kt * t / tgrid.T) * np.cos(math.pi * kx * x)
            return scale * out

        ug = scale * np.stack(
            [sum(rng.normal() * np.cos(math.pi * k * tgrid.times / tgrid.T) / (1 + k) for k in range(3)) for _ in range(2)],
            axis=-1,
        )
        return cls(smooth(), ug, smooth())

    def __add__(self, other: "ControlTriple") -> "ControlTriple":
        return ControlTriple(self.u + other.u, self.u_Gamma + other.u_Gamma, self.v + other.v)

    def __sub__(self, other: "ControlTriple") -> "ControlTriple":
        return ControlTriple(self.u - other.u, self.u_Gamma - other.u_Gamma, self.v - other.v)

    def scaled(self, s: float) -> "ControlTriple":
        return ControlTriple(s * self.u, s * self.u_Gamma, s * self.v)

    def inner(self, other: "ControlTriple", mesh: Mesh1D, tgrid: TimeGrid) -> float:
        """``(., .)`` of ``X x H`` integrated in time (right-endpoint rule)."""
        Mm = mesh.mass_matrix()
        s = 0.0
        for i in range(1, tgrid.n_steps + 1):
            s += float(np.dot(self.u[i], Mm.matvec(other.u[i])))
            s += float(np.dot(self.u_Gamma[i], other.u_Gamma[i]))
            s += float(np.dot(self.v[i], Mm.matvec(other.v[i])))
        return tgrid.tau * s

    def norm(self, mesh: Mesh1D, tgrid: TimeGrid) -> float:
        return math.sqrt(max(self.inner(self, mesh, tgrid), 0.0))


GradientTriple = ControlTriple


@dataclass(frozen=True)
class StateTriple:
    """``[eta, eta_Gamma, theta]`` at one time.

    ``eta`` is the nodal bulk vector whose end values are ``eta_Gamma``;
    ``theta`` is nodal with zero end values.
    """

    eta: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, float)
        theta = np.asarray(self.theta, float)
        if eta.shape != theta.shape or eta.ndim != 1:
            raise ValueError("eta and theta must be nodal vectors of equal length")
        if abs(theta[0]) > 1e-12 or abs(theta[-1]) > 1e-12:
            raise ValueError("theta must vanish at both boundary points")
        theta = theta.copy()
        theta[[0, -1]] = 0.0
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "theta", theta)

    @property
    def eta_Gamma(self) -> np.ndarray:
        return self.eta[[0, -1]].copy()

    @property
    def eta_pair(self) -> BulkBoundaryFn:
        return BulkBoundaryFn.from_bulk(self.eta)


@dataclass(frozen=True)
class ProblemConfig:
    """Everything that defines an instance of the control problem.

    Attributes
    ----------
    mesh, tgrid : Mesh1D, TimeGrid
    material : MaterialModel
    nu : float
        Positive diffusion parameter of ``theta``.
    eps : float
        Regularisation parameter, ``>= 0``.
    weights : Weights
    eta_ad, eta_Gamma_ad, theta_ad : ndarray
        Targets on the time nodes: ``(N+1, n+1)``, ``(N+1, 2)``, ``(N+1, n+1)``.
    tolerances : SolverTolerances
    seed : int
        Seed of the random test directions of the ``eps = 0`` certificate.
    """

    mesh: Mesh1D
    tgrid: TimeGrid
    material: MaterialModel
    nu: float = 1.0
    eps: float = 0.1
    weights: Weights = field(default_factory=Weights)
    eta_ad: np.ndarray | None = None
    eta_Gamma_ad: np.ndarray | None = None
    theta_ad: np.ndarray | None = None
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ValueError(f"eps must be nonnegative, got {self.eps!r}")
        N1, n1 = self.tgrid.n_steps + 1, self.mesh.n_nodes
        for name, shape in (("eta_ad", (N1, n1)), ("eta_Gamma_ad", (N1, 2)), ("theta_ad", (N1, n1))):
            val = getattr(self, name)
            arr = np.zeros(shape) if val is None else np.asarray(val, float)
            if arr.shape != shape:
                raise ValueError(f"target {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"target {name} has non-finite entries")
            object.__setattr__(self, name, arr)

    def with_eps(self, eps: float) -> "ProblemConfig":
        return replace(self, eps=float(eps))

    def with_targets(self, eta_ad, eta_Gamma_ad, theta_ad) -> "ProblemConfig":
        return replace(self, eta_ad=eta_ad, eta_Gamma_ad=eta_Gamma_ad, theta_ad=theta_ad)
