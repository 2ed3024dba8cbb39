"""Smooth approximation of the absolute value and its subdifferential.

``f_eps(xi) = sqrt(eps**2 + xi**2)`` approximates ``|xi|`` uniformly with
``|f_eps - f_epst| <= |eps - epst|``; at ``eps = 0`` it is ``|xi|`` itself,
whose subdifferential is the set-valued sign ``Sgn^1``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "f_eps",
    "f_eps_prime",
    "f_eps_second",
    "sgn1",
    "sgn_residual",
    "check_eps",
]


def check_eps(eps: float, *, smooth: bool = False) -> float:
    """Validate a regularisation parameter.

    Parameters
    ----------
    eps : float
        Must be finite and nonnegative.
    smooth : bool
        If true, ``eps = 0`` is rejected because the caller needs derivatives.
    """
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"regularisation parameter must be >= 0, got {eps!r}")
    if smooth and eps == 0.0:
        raise ValueError("eps = 0 has no derivative; use a positive eps")
    return eps


def f_eps(eps: float, xi):
    """``sqrt(eps**2 + xi**2)``; ``|xi|`` when ``eps = 0``."""
    eps = check_eps(eps)
    return np.hypot(eps, xi)


def f_eps_prime(eps: float, xi):
    """``xi / sqrt(eps**2 + xi**2)``, which lies in ``(-1, 1)``."""
    eps = check_eps(eps, smooth=True)
    return np.asarray(xi, float) / np.hypot(eps, xi)


def f_eps_second(eps: float, xi):
    """``eps**2 / (eps**2 + xi**2)**(3/2)``, bounded by ``1 / eps``."""
    eps = check_eps(eps, smooth=True)
    r = np.hypot(eps, xi)
    return eps**2 / r**3


def sgn1(xi: float) -> tuple[float, float]:
    """The set ``Sgn^1(xi)`` as a closed interval ``(lo, hi)``."""
    xi = float(xi)
    if xi > 0:
        return (1.0, 1.0)
    if xi < 0:
        return (-1.0, -1.0)
    return (-1.0, 1.0)


def sgn_residual(nu, xi):
    """Distance from ``nu`` to the set ``Sgn^1(xi)`` (elementwise).

    ``max(0, |nu| - 1)`` where ``xi = 0`` and ``|nu - sign(xi)|`` elsewhere.
    """
    nu = np.asarray(nu, float)
    xi = np.asarray(xi, float)
    out = np.where(xi == 0.0, np.maximum(0.0, np.abs(nu) - 1.0), np.abs(nu - np.sign(xi)))
    return out if out.ndim else float(out)
