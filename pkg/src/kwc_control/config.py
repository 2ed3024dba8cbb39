"""Experiment configuration: JSON parsing, defaults and problem assembly.

A configuration is a JSON object.  Every physical input is a named
built-in with parameters or an inline table, so a configuration file is a
complete, reproducible description of a run.  :func:`parse_config` returns
an :class:`ExperimentSpec` whose :meth:`~ExperimentSpec.to_dict` is the fully
resolved configuration (all defaults materialised); feeding that dictionary
back through :func:`spec_from_dict` reproduces the same spec.

Grid-function fields accept

* a number (constant in space and time);
* a list of ``n + 1`` nodal values (constant in time) or a table of
  ``N + 1`` such rows;
* an object ``{"kind": ..., ...}`` with kinds ``constant`` (``value``),
  ``sin``/``cos`` (``offset + amp * sin(k pi x)``, parameters ``offset``,
  ``amp``, ``k``),
  ``plateau`` (``min(height, slope * min(x, 1 - x))``) and ``random``
  (smooth random field, parameters ``scale`` and ``seed``), optionally
  multiplied by a time profile
  ``"time": {"kind": "sin"|"cos", "offset": c, "amp": a}`` meaning
  ``c + a sin(pi t / T)`` (resp. ``cos``); ``c`` defaults to 1.

Boundary pairs accept a number, ``[left, right]``, a table of ``N + 1`` pairs,
or ``{"kind": "constant", "value": [left, right]}`` with the same optional
time profile.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .linear import CoefficientQuintet, ForcingTriple, tau0
from .material import BUILTIN_NAMES, builtin
from .mesh import Mesh1D, TimeGrid
from .optimizer import ContinuationSchedule, OptimizerConfig
from .problem import ControlTriple, ProblemConfig, SolverTolerances, StateTriple, Weights

__all__ = [
    "MODES",
    "ExperimentSpec",
    "Problem",
    "parse_config",
    "spec_from_dict",
    "build_problem",
    "field_values",
    "pair_values",
]

MODES = ("state", "linear", "adjoint", "optimize", "continuation", "verify")
FIELD_KINDS = ("constant", "sin", "cos", "plateau", "random")

DEFAULTS: dict[str, Any] = {
    "cells": 64,
    "consistent_mass": False,
    "T": 1.0,
    "nu": 1.0,
    "eps": 0.1,
    "seed": 0,
    "material": {"name": "default", "params": {}},
    "weights": {"K": 1.0, "K_Gamma": 1.0, "Lambda": 1.0, "L": 1.0, "L_Gamma": 1.0, "M": 1.0},
    "initial": {"eta": 0.0, "theta": 0.0},
    "controls": {"u": 0.0, "u_Gamma": 0.0, "v": 0.0},
    "targets": {"eta": 0.0, "eta_Gamma": 0.0, "theta": 0.0},
    # a "targets" object may instead hold {"from_controls": {...}}: the
    # targets are then the state driven by those controls
    "solver": {
        "newton_tol": 1e-10,
        "newton_max_iter": 50,
        "scheme": "split",
        "certificate_samples": 50,
        "certificate_tol": 1e-7,
    },
    "optimizer": {
        "max_iters": 200,
        "c1": 1e-4,
        "backtrack": 0.5,
        "initial_step": 1.0,
        "tol": 1e-8,
        "rel_tol": 0.0,
        "strategy": "bb",
        "max_backtracks": 40,
    },
    "continuation": {"eps_levels": [0.5, 0.25, 0.1, 0.05]},
    "linear": {
        "a": 1.0,
        "b": 0.0,
        "mu": 0.0,
        "omega": 0.0,
        "A": 0.0,
        "h": 0.0,
        "h_Gamma": 0.0,
        "k": 0.0,
        "p0": 0.0,
        "z0": 0.0,
    },
    "verify": {"samples": 100000, "gronwall_instances": 1000, "C": 10.0},
}

TOP_KEYS = set(DEFAULTS) | {"mode", "benchmark", "steps", "tau"}


@dataclass(frozen=True)
class ExperimentSpec:
    """Validated, fully resolved experiment description."""

    mode: str
    config: dict

    def to_dict(self) -> dict:
        return copy.deepcopy(self.config)

    @property
    def seed(self) -> int:
        return int(self.config["seed"])


@dataclass
class Problem:
    """Objects assembled from a spec."""

    cfg: ProblemConfig
    init: StateTriple
    controls: ControlTriple
    opt: OptimizerConfig
    schedule: ContinuationSchedule


# -- parsing --------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and not _is_field_object(v):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _is_field_object(v: dict) -> bool:
    return "kind" in v


def parse_config(path: str | Path, overrides: dict | None = None) -> ExperimentSpec:
    """Read a JSON configuration file.

    Raises
    ------
    ConfigError
        On unreadable files, JSON syntax errors (with line and column) and
        every semantic violation found.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: the configuration must be a JSON object")
    return spec_from_dict(raw, overrides)


def spec_from_dict(raw: dict, overrides: dict | None = None) -> ExperimentSpec:
    """Validate a configuration dictionary and materialise all defaults.

    ``overrides`` (``seed``, ``tau``, ``cells``) replace the file values;
    ``tau`` also drops a configured ``steps``.
    """
    from .benchmarks import BENCHMARKS

    errors: list[str] = []
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        errors.append(f"unknown keys {sorted(unknown)}; allowed: {sorted(TOP_KEYS)}")
    base = copy.deepcopy(DEFAULTS)
    bench = raw.get("benchmark")
    if bench is not None:
        if bench not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {bench!r}; known: {', '.join(sorted(BENCHMARKS))}")
        base = _merge(base, BENCHMARKS[bench])
    cfg = _merge(base, {k: v for k, v in raw.items() if k in TOP_KEYS})
    # explicit targets in the file replace targets generated by a preset
    if isinstance(raw.get("targets"), dict) and "from_controls" not in raw["targets"]:
        cfg["targets"].pop("from_controls", None)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        cfg[k] = v
        if k == "tau":
            cfg.pop("steps", None)
    cfg.setdefault("mode", "state")
    if cfg["mode"] not in MODES:
        errors.append(f"mode must be one of {MODES}, got {cfg['mode']!r}")

    def check(cond, msg):
        if not cond:
            errors.append(msg)

    check(isinstance(cfg["cells"], int) and cfg["cells"] >= 2, "cells must be an integer >= 2")
    check(_num(cfg["T"]) and cfg["T"] > 0, "T must be a positive number")
    check(_num(cfg["nu"]) and cfg["nu"] > 0, "nu must be positive")
    check(_num(cfg["eps"]) and cfg["eps"] >= 0, "eps must be nonnegative")
    check(isinstance(cfg["seed"], int) and cfg["seed"] >= 0, "seed must be a nonnegative integer")
    if "steps" in cfg:
        check(isinstance(cfg["steps"], int) and cfg["steps"] >= 1, "steps must be a positive integer")
    if "tau" in cfg and "steps" not in cfg:
        check(_num(cfg["tau"]) and 0 < cfg["tau"] < 1, "tau must lie in (0, 1)")
    mat = cfg["material"]
    if not isinstance(mat, dict) or mat.get("name") not in BUILTIN_NAMES:
        errors.append(
            f"unknown material {mat.get('name') if isinstance(mat, dict) else mat!r}; "
            f"catalog: {', '.join(BUILTIN_NAMES)}"
        )
    w = cfg["weights"]
    for name in DEFAULTS["weights"]:
        val = w.get(name)
        if not (_num(val) and val >= 0):
            errors.append(
                f"weight {name} = {val!r}: cost weights must be nonnegative constants"
            )
    unknown_w = set(w) - set(DEFAULTS["weights"])
    if unknown_w:
        errors.append(f"unknown weights {sorted(unknown_w)}")
    for section in ("solver", "optimizer", "continuation", "linear", "verify", "initial", "controls", "targets"):
        if not isinstance(cfg[section], dict):
            errors.append(f"section {section!r} must be an object")
            continue
        allowed = set(DEFAULTS[section]) | ({"from_controls"} if section == "targets" else set())
        extra = set(cfg[section]) - allowed
        if extra:
            errors.append(f"unknown keys in {section!r}: {sorted(extra)}")
    try:
        SolverTolerances(**cfg["solver"])
    except (TypeError, ValueError) as exc:
        errors.append(f"solver: {exc}")
    try:
        OptimizerConfig(**cfg["optimizer"])
    except (TypeError, ValueError) as exc:
        errors.append(f"optimizer: {exc}")
    try:
        ContinuationSchedule(tuple(cfg["continuation"]["eps_levels"]))
    except (TypeError, ValueError, KeyError) as exc:
        errors.append(f"continuation: {exc}")
    if cfg["mode"] in ("adjoint", "optimize") and not (_num(cfg["eps"]) and cfg["eps"] > 0):
        errors.append(f"mode {cfg['mode']!r} needs eps > 0")
    if errors:
        raise ConfigError("invalid configuration:\n  - " + "\n  - ".join(errors))
    # resolve the time grid so that the echoed spec is self-contained
    if "steps" not in cfg:
        try:
            cfg["steps"] = _default_steps(cfg)
        except ValueError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
    cfg.pop("tau", None)
    cfg["tau"] = cfg["T"] / cfg["steps"]
    try:
        build_problem(ExperimentSpec(cfg["mode"], cfg))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return ExperimentSpec(cfg["mode"], cfg)


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _default_steps(cfg: dict) -> int:
    """``tau`` from a configured value or from half the step bound."""
    T = cfg["T"]
    if "tau" in cfg:
        return TimeGrid.from_tau(T, cfg["tau"]).n_steps
    from .state import frozen_tau0

    mesh = Mesh1D(cfg["cells"], cfg["consistent_mass"])
    probe = TimeGrid(T, max(1, math.ceil(T / 0.5)))
    if cfg["mode"] == "linear":
        q = _quintet(cfg, mesh, probe)
        bound = tau0(q, cfg["nu"])
    else:
        material = builtin(cfg["material"]["name"], cfg["material"].get("params"))
        pcfg = ProblemConfig(mesh, probe, material, nu=cfg["nu"], eps=cfg["eps"])
        bound = frozen_tau0(pcfg, _initial_state(cfg, mesh, probe))
    return TimeGrid.from_tau(T, min(0.5 * bound, 0.5)).n_steps


# -- field evaluation -------------------------------------------------------------


def _time_profile(spec: dict, tg: TimeGrid) -> np.ndarray:
    prof = spec.get("time")
    if prof is None:
        return np.ones(tg.n_steps + 1)
    kind, amp, off = prof.get("kind"), float(prof.get("amp", 1.0)), float(prof.get("offset", 1.0))
    arg = math.pi * tg.times / tg.T
    if kind == "sin":
        return off + amp * np.sin(arg)
    if kind == "cos":
        return off + amp * np.cos(arg)
    if kind == "constant":
        return np.ones(tg.n_steps + 1)
    raise ValueError(f"unknown time profile {kind!r}")


def field_values(spec, mesh: Mesh1D, tg: TimeGrid, name: str = "field") -> np.ndarray:
    """Evaluate a grid-function spec on all time nodes, shape ``(N+1, n+1)``."""
    N1, n1 = tg.n_steps + 1, mesh.n_nodes
    x = mesh.nodes
    if _num(spec):
        return np.full((N1, n1), float(spec))
    if isinstance(spec, list):
        arr = np.asarray(spec, float)
        if arr.shape == (n1,):
            return np.tile(arr, (N1, 1))
        if arr.shape == (N1, n1):
            return arr
        raise ValueError(f"{name}: inline table has shape {arr.shape}, expected ({n1},) or ({N1}, {n1})")
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "constant":
            space = np.full(n1, float(spec.get("value", 0.0)))
        elif kind in ("sin", "cos"):
            fn = np.sin if kind == "sin" else np.cos
            space = float(spec.get("offset", 0.0)) + float(spec.get("amp", 1.0)) * fn(
                math.pi * float(spec.get("k", 1.0)) * x
            )
        elif kind == "plateau":
            space = np.minimum(float(spec.get("height", 0.5)), float(spec.get("slope", 2.0)) * np.minimum(x, 1 - x))
        elif kind == "random":
            rng = np.random.default_rng(int(spec.get("seed", 0)))
            return ControlTriple.random(mesh, tg, rng, float(spec.get("scale", 1.0))).u
        else:
            raise ValueError(f"{name}: unknown field kind {kind!r}; known: {FIELD_KINDS}")
        return _time_profile(spec, tg)[:, None] * space[None, :]
    raise ValueError(f"{name}: cannot interpret {spec!r} as a grid function")


def pair_values(spec, tg: TimeGrid, name: str = "pair") -> np.ndarray:
    """Evaluate a boundary-pair spec, shape ``(N+1, 2)``."""
    N1 = tg.n_steps + 1
    if _num(spec):
        return np.full((N1, 2), float(spec))
    if isinstance(spec, list):
        arr = np.asarray(spec, float)
        if arr.shape == (2,):
            return np.tile(arr, (N1, 1))
        if arr.shape == (N1, 2):
            return arr
        raise ValueError(f"{name}: inline table has shape {arr.shape}, expected (2,) or ({N1}, 2)")
    if isinstance(spec, dict) and spec.get("kind") == "constant":
        val = np.broadcast_to(np.asarray(spec.get("value", 0.0), float), (2,))
        return _time_profile(spec, tg)[:, None] * val[None, :]
    raise ValueError(f"{name}: cannot interpret {spec!r} as a boundary pair")


def _controls(spec: dict, mesh: Mesh1D, tg: TimeGrid) -> ControlTriple:
    return ControlTriple(
        field_values(spec.get("u", 0.0), mesh, tg, "u"),
        pair_values(spec.get("u_Gamma", 0.0), tg, "u_Gamma"),
        field_values(spec.get("v", 0.0), mesh, tg, "v"),
    )


def _initial_state(cfg: dict, mesh: Mesh1D, tg: TimeGrid) -> StateTriple:
    eta = field_values(cfg["initial"]["eta"], mesh, tg, "initial eta")[0]
    theta = field_values(cfg["initial"]["theta"], mesh, tg, "initial theta")[0].copy()
    if abs(theta[0]) > 1e-12 or abs(theta[-1]) > 1e-12:
        raise ValueError("initial theta must vanish at both boundary points")
    theta[[0, -1]] = 0.0
    return StateTriple(eta, theta)


def _quintet(cfg: dict, mesh: Mesh1D, tg: TimeGrid) -> CoefficientQuintet:
    lin = cfg["linear"]
    a = field_values(lin["a"], mesh, tg, "a")
    b = field_values(lin["b"], mesh, tg, "b")
    mu = field_values(lin["mu"], mesh, tg, "mu")
    om_nodes = field_values(lin["omega"], mesh, tg, "omega")
    omega = np.stack([om_nodes[:, :-1], om_nodes[:, 1:]], axis=-1)
    A_nodes = field_values(lin["A"], mesh, tg, "A")
    A = 0.5 * (A_nodes[:, :-1] + A_nodes[:, 1:])
    return CoefficientQuintet(mesh, tg, a, b, mu, omega, A)


def linear_data(spec: ExperimentSpec):
    """``(quintet, forcing, p0, z0, nu)`` for the linear mode."""
    cfg = spec.config
    mesh = Mesh1D(cfg["cells"], cfg["consistent_mass"])
    tg = TimeGrid(cfg["T"], cfg["steps"])
    lin = cfg["linear"]
    q = _quintet(cfg, mesh, tg)
    forcing = ForcingTriple(
        field_values(lin["h"], mesh, tg, "h"),
        pair_values(lin["h_Gamma"], tg, "h_Gamma"),
        field_values(lin["k"], mesh, tg, "k"),
    )
    p0 = field_values(lin["p0"], mesh, tg, "p0")[0]
    z0 = field_values(lin["z0"], mesh, tg, "z0")[0].copy()
    z0[[0, -1]] = 0.0
    return q, forcing, p0, z0, float(cfg["nu"])


def build_problem(spec: ExperimentSpec) -> Problem:
    """Assemble the solver objects described by a resolved spec."""
    from .state import solve_state

    cfg = spec.config
    mesh = Mesh1D(cfg["cells"], cfg["consistent_mass"])
    tg = TimeGrid(cfg["T"], cfg["steps"])
    material = builtin(cfg["material"]["name"], cfg["material"].get("params"))
    weights = Weights(**cfg["weights"])
    tol = SolverTolerances(**cfg["solver"])
    init = _initial_state(cfg, mesh, tg)
    controls = _controls(cfg["controls"], mesh, tg)
    base = ProblemConfig(mesh, tg, material, cfg["nu"], cfg["eps"], weights, tolerances=tol, seed=cfg["seed"])
    tgt = cfg["targets"]
    if "from_controls" in tgt:
        # inverse-crime targets: the state of a known control
        known = _controls(tgt["from_controls"], mesh, tg)
        traj = solve_state(init, known, base)
        eta_ad, eg_ad, th_ad = traj.eta, traj.eta_Gamma, traj.theta
    else:
        eta_ad = field_values(tgt["eta"], mesh, tg, "target eta")
        eg_ad = pair_values(tgt["eta_Gamma"], tg, "target eta_Gamma")
        th_ad = field_values(tgt["theta"], mesh, tg, "target theta").copy()
        th_ad[:, [0, -1]] = 0.0
    pcfg = base.with_targets(eta_ad, eg_ad, th_ad)
    opt = OptimizerConfig(**cfg["optimizer"])
    schedule = ContinuationSchedule(tuple(cfg["continuation"]["eps_levels"]))
    return Problem(pcfg, init, controls, opt, schedule)
