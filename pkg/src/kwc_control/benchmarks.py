"""Named benchmark problems.

Each benchmark is a partial configuration dictionary (see
:mod:`kwc_control.config`); a configuration file selects one with
``"benchmark": name`` and may override any key.

``smooth``
    Default material, smooth initial data, smooth random controls and
    targets; short horizon.  Used for gradient and conjugacy checks.
``inverse_crime``
    Reaction-free material, zero initial state, targets generated by a known
    smooth control over a long horizon; the optimizer must recover a
    control whose cost is far below the cost of the zero control.
``facet``
    Reaction-free material and a flat-topped ``theta`` target; solved by
    continuation in ``eps`` towards the non-smooth limit, where ``theta``
    develops flat facets.
``decay``
    No forcing: the energy of the free evolution must not increase.
"""

from __future__ import annotations

__all__ = ["BENCHMARKS", "benchmark_names"]

BENCHMARKS: dict[str, dict] = {
    "smooth": {
        "mode": "adjoint",
        "cells": 32,
        "steps": 32,
        "T": 0.2,
        "eps": 0.1,
        "material": {"name": "default", "params": {}},
        "initial": {"eta": {"kind": "cos", "amp": 0.3, "k": 1}, "theta": {"kind": "sin", "amp": 0.2, "k": 1}},
        "controls": {
            "u": {"kind": "random", "scale": 2.0, "seed": 1},
            "u_Gamma": 0.0,
            "v": {"kind": "random", "scale": 2.0, "seed": 2},
        },
        "targets": {
            "eta": {"kind": "random", "scale": 1.0, "seed": 5},
            "eta_Gamma": 0.0,
            "theta": {"kind": "sin", "amp": 0.1, "k": 1},
        },
    },
    "inverse_crime": {
        "mode": "optimize",
        "cells": 32,
        "steps": 128,
        "T": 6.0,
        "eps": 0.1,
        "material": {"name": "no_reaction", "params": {}},
        "initial": {"eta": 0.0, "theta": 0.0},
        "targets": {
            "from_controls": {
                "u": {"kind": "cos", "offset": 1.0, "amp": 0.5, "k": 1, "time": {"kind": "sin", "amp": 0.5}},
                "u_Gamma": 0.5,
                "v": {"kind": "sin", "amp": 0.5, "k": 1, "time": {"kind": "cos", "offset": 0.0, "amp": 1.0}},
            }
        },
        "optimizer": {"max_iters": 200, "rel_tol": 1e-6, "strategy": "bb"},
    },
    "facet": {
        "mode": "continuation",
        "cells": 32,
        "steps": 32,
        "T": 1.0,
        "eps": 0.0,
        "material": {"name": "no_reaction", "params": {}},
        "initial": {"eta": {"kind": "cos", "amp": 0.2, "k": 1}, "theta": {"kind": "sin", "amp": 0.2, "k": 1}},
        "targets": {"eta": 0.0, "eta_Gamma": 0.0, "theta": {"kind": "plateau", "height": 0.5, "slope": 2.0}},
        "optimizer": {"max_iters": 100, "rel_tol": 1e-4, "strategy": "bb"},
        "continuation": {"eps_levels": [0.5, 0.25, 0.1, 0.05]},
    },
    "decay": {
        "mode": "state",
        "cells": 64,
        "T": 1.0,
        "eps": 0.1,
        "initial": {"eta": {"kind": "cos", "amp": 0.5, "k": 2}, "theta": {"kind": "sin", "amp": 0.3, "k": 1}},
        "controls": {"u": 0.0, "u_Gamma": 0.0, "v": 0.0},
    },
}


def benchmark_names() -> tuple[str, ...]:
    return tuple(sorted(BENCHMARKS))
