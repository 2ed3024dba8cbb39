"""Material functions of the phase-field model and their validation.

A :class:`MaterialModel` bundles the mobility ``alpha`` (with two
derivatives), the reaction ``g`` with its primitive ``G``, the relaxation
coefficient ``alpha0(t, x)`` with its time derivative, the lower bound
``delta_star`` and declared global bounds.  Declared bounds cannot be proven
numerically; :func:`validate` spot-checks them on a sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "MaterialModel",
    "CheckResult",
    "ValidationReport",
    "validate",
    "builtin_default",
    "builtin",
    "BUILTIN_NAMES",
]

Scalar = Callable[[np.ndarray], np.ndarray]
SpaceTime = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MaterialModel:
    """Model functions and declared constants.

    Attributes
    ----------
    alpha, alpha_prime, alpha_double_prime : callable
        Mobility ``alpha(eta)`` and its first two derivatives (vectorised).
    g, g_prime, G : callable
        Reaction term, its derivative and a primitive with ``G' = g``.
    alpha0, alpha0_dt : callable
        ``alpha0(t, x)`` and ``d/dt alpha0(t, x)``.
    delta_star : float
        Lower bound of ``alpha`` and ``alpha0``, in ``(0, 1)``.
    alpha_prime_bound, g_prime_bound, alpha_alpha_prime_lip : float
        Declared bounds of ``|alpha'|``, ``|g'|`` and the Lipschitz constant
        of ``alpha * alpha'``.
    alpha0_w1inf : float
        Declared ``W^{1,inf}`` norm of ``alpha0`` on ``[0, 1] x [0, 1]``.
    name : str
        Catalog name (informational).
    params : dict
        Parameters the model was built from (informational).
    """

    alpha: Scalar
    alpha_prime: Scalar
    alpha_double_prime: Scalar
    g: Scalar
    g_prime: Scalar
    G: Scalar
    alpha0: SpaceTime
    alpha0_dt: SpaceTime
    delta_star: float
    alpha_prime_bound: float
    g_prime_bound: float
    alpha_alpha_prime_lip: float
    alpha0_w1inf: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.delta_star < 1.0):
            raise ValueError(f"delta_star must lie in (0, 1), got {self.delta_star!r}")

    def alpha_sup(self, eta_range: tuple[float, float]) -> float:
        """Supremum of ``|alpha|`` over a closed interval, by sampling."""
        lo, hi = eta_range
        s = np.linspace(lo, hi, 2001)
        return float(np.max(np.abs(self.alpha(s))))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate`; one entry per assumption."""

    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _central_diff(fn: Scalar, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    return (fn(x + step) - fn(x - step)) / (2 * step)


def validate(model: MaterialModel, sample_grid, tol: float = 1e-6) -> ValidationReport:
    """Spot-check the model assumptions on a sample grid.

    Parameters
    ----------
    model : MaterialModel
    sample_grid : array_like
        Nonempty set of ``eta`` values.  ``alpha0`` is checked on a fixed
        ``64 x 64`` grid of ``[0, 1] x [0, 1]``.
    tol : float
        Tolerance; derivative comparisons are relative to ``max(1, |d|)``.

    Returns
    -------
    ValidationReport
        Pass/fail and worst violation per check.  Never raises for a failing
        model.
    """
    s = np.asarray(sample_grid, float).ravel()
    if s.size == 0:
        raise ValueError("sample grid must be nonempty")
    checks: list[CheckResult] = []

    def add(name: str, violation: float):
        violation = float(violation) if np.isfinite(violation) else math.inf
        checks.append(CheckResult(name, violation <= tol, violation))

    def fd_violation(fn: Scalar, dfn: Scalar) -> float:
        d = np.asarray(dfn(s), float)
        fd = _central_diff(fn, s)
        return float(np.max(np.abs(fd - d) / np.maximum(1.0, np.abs(d))))

    a = np.asarray(model.alpha(s), float)
    add("alpha >= delta_star", np.max(np.maximum(0.0, model.delta_star - a)))

    t = np.linspace(0.0, 1.0, 64)
    x = np.linspace(0.0, 1.0, 64)
    a0 = np.array([model.alpha0(ti, x) for ti in t], dtype=float)
    add("alpha0 >= delta_star", np.max(np.maximum(0.0, model.delta_star - a0)))

    add("alpha'(0) = 0", abs(float(model.alpha_prime(np.array([0.0]))[0])))
    add("alpha'' >= 0", np.max(np.maximum(0.0, -np.asarray(model.alpha_double_prime(s)))))
    add("G >= 0", np.max(np.maximum(0.0, -np.asarray(model.G(s), float))))
    add("G' = g", fd_violation(model.G, model.g))
    add("alpha' consistent", fd_violation(model.alpha, model.alpha_prime))
    add("alpha'' consistent", fd_violation(model.alpha_prime, model.alpha_double_prime))
    add("g' consistent", fd_violation(model.g, model.g_prime))

    step = 1e-5
    dt_fd = np.array(
        [(model.alpha0(ti + step, x) - model.alpha0(ti - step, x)) / (2 * step) for ti in t]
    )
    dt = np.array([model.alpha0_dt(ti, x) for ti in t], dtype=float)
    add("alpha0_dt consistent", np.max(np.abs(dt_fd - dt) / np.maximum(1.0, np.abs(dt))))

    def bound_violation(values: np.ndarray, bound: float) -> float:
        return float(np.max(np.maximum(0.0, np.abs(values) - bound)) / max(1.0, bound))

    add("alpha' in L-infinity", bound_violation(np.asarray(model.alpha_prime(s)), model.alpha_prime_bound))
    add("g' in L-infinity", bound_violation(np.asarray(model.g_prime(s)), model.g_prime_bound))
    aap = lambda e: model.alpha(e) * model.alpha_prime(e)  # noqa: E731
    add("(alpha alpha')' in L-infinity", bound_violation(_central_diff(aap, s), model.alpha_alpha_prime_lip))

    dx = np.gradient(a0, x, axis=1)
    w1 = np.max(np.abs(a0)) + np.max(np.abs(dt)) + np.max(np.abs(dx))
    add("alpha0 W1,inf bound", max(0.0, w1 - model.alpha0_w1inf) / max(1.0, model.alpha0_w1inf))
    return ValidationReport(tuple(checks))


def builtin_default(
    delta_star: float = 0.5, g_scale: float = 1.0, alpha0_rate: float = 0.0
) -> MaterialModel:
    """Built-in smooth model.

    ``alpha(eta) = delta_star + sqrt(1 + eta**2)``,
    ``g(eta) = g_scale * sin(pi eta)``,
    ``G(eta) = g_scale * (1 - cos(pi eta)) / pi`` and
    ``alpha0(t, x) = 1 + alpha0_rate * t * x``.

    Parameters
    ----------
    delta_star : float
        Offset of the mobility, also its lower bound.
    g_scale : float
        Amplitude of the reaction term; must be nonnegative so that ``G >= 0``.
    alpha0_rate : float
        Rate of the space-time variation of ``alpha0``; nonnegative.
    """
    if g_scale < 0:
        raise ValueError("g_scale must be nonnegative")
    if alpha0_rate < 0:
        raise ValueError("alpha0_rate must be nonnegative")
    pi = math.pi
    return MaterialModel(
        alpha=lambda e: delta_star + np.sqrt(1.0 + np.square(e)),
        alpha_prime=lambda e: np.asarray(e, float) / np.sqrt(1.0 + np.square(e)),
        alpha_double_prime=lambda e: (1.0 + np.square(e)) ** -1.5,
        g=lambda e: g_scale * np.sin(pi * np.asarray(e, float)),
        g_prime=lambda e: g_scale * pi * np.cos(pi * np.asarray(e, float)),
        G=lambda e: g_scale * (1.0 - np.cos(pi * np.asarray(e, float))) / pi,
        alpha0=lambda t, x: 1.0 + alpha0_rate * t * np.asarray(x, float),
        alpha0_dt=lambda t, x: alpha0_rate * np.asarray(x, float) + 0.0 * t,
        delta_star=delta_star,
        alpha_prime_bound=1.0,
        g_prime_bound=g_scale * pi,
        alpha_alpha_prime_lip=1.0 + delta_star,
        alpha0_w1inf=1.0 + 3.0 * alpha0_rate,
        name="default",
        params={"delta_star": delta_star, "g_scale": g_scale, "alpha0_rate": alpha0_rate},
    )


_CATALOG: dict[str, dict] = {
    "default": {},
    "varying_alpha0": {"alpha0_rate": 0.1},
    "no_reaction": {"g_scale": 0.0},
}
BUILTIN_NAMES = tuple(_CATALOG)


def builtin(name: str, params: dict | None = None) -> MaterialModel:
    """Catalog lookup by name plus parameter overrides.

    ``"default"`` is :func:`builtin_default`; ``"varying_alpha0"`` uses
    ``alpha0(t, x) = 1 + 0.1 t x``; ``"no_reaction"`` sets ``g = G = 0``.
    """
    if name not in _CATALOG:
        raise KeyError(f"unknown material model {name!r}; known: {', '.join(BUILTIN_NAMES)}")
    kwargs = dict(_CATALOG[name])
    kwargs.update(params or {})
    allowed = {"delta_star", "g_scale", "alpha0_rate"}
    unknown = set(kwargs) - allowed
    if unknown:
        raise KeyError(f"unknown material parameters {sorted(unknown)}")
    model = builtin_default(**kwargs)
    return MaterialModel(**{**model.__dict__, "name": name})
