"""State solver: single steps, energy, trajectories and the eps = 0 limit."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from kwc_control.material import builtin, builtin_default
from kwc_control.mesh import Mesh1D, TimeGrid, diff_x, inner_H
from kwc_control.problem import ControlTriple, ProblemConfig, SolverTolerances, StateTriple, Weights
from kwc_control.state import energy, solve_state, step_eta, step_theta
from kwc_control.verify import check_energy_dissipation


def flat_material():
    """No reaction and constant mobility: alpha' = alpha'' = 0."""
    m = builtin("no_reaction")
    return replace(
        m,
        alpha=lambda e: 1.5 + 0.0 * np.asarray(e, float),
        alpha_prime=lambda e: 0.0 * np.asarray(e, float),
        alpha_double_prime=lambda e: 0.0 * np.asarray(e, float),
    )


def cfg_for(n=16, N=16, T=0.1, eps=0.1, material=None, **kw):
    return ProblemConfig(Mesh1D(n), TimeGrid(T, N), material or builtin_default(), eps=eps, **kw)


def theta_functional(cfg, theta_prev, eta_ref, v, eps):
    """Independent dense evaluation of the theta-step functional on interior values."""
    mesh, tau, nu, h = cfg.mesh, cfg.tgrid.tau, cfg.nu, cfg.mesh.h
    w = mesh.weights
    abar = 0.5 * (cfg.material.alpha(eta_ref)[:-1] + cfg.material.alpha(eta_ref)[1:])
    load = cfg.weights.M * w * v

    def J(y):
        th = np.concatenate([[0.0], y, [0.0]])
        d = th - theta_prev
        tx = np.diff(th) / h
        return (
            0.5 / tau * np.sum(w * d * d)
            + 0.5 * nu**2 * h * np.sum(tx**2)
            + h * np.sum(abar * np.sqrt(eps**2 + tx**2))
            - np.sum(load * th)
        )

    return J


# -- single steps ----------------------------------------------------------------


def test_eta_step_keeps_constants():
    cfg = cfg_for(material=flat_material())
    eta_prev = np.full(17, 0.37)
    eta, _ = step_eta(cfg, eta_prev, np.zeros(17), np.zeros(17), np.zeros(2))
    np.testing.assert_allclose(eta, eta_prev, atol=1e-12)


def test_eta_step_manufactured_exponential_decay():
    # eta = eta_Gamma = e^{-t} solves the bulk/boundary system with u = u_Gamma = -e^{-t}
    def err(N):
        cfg = cfg_for(n=8, N=N, T=0.5, material=flat_material())
        eta = np.ones(9)
        worst = 0.0
        for i, t in enumerate(cfg.tgrid.times[1:], start=1):
            u = -math.exp(-t) * np.ones(9)
            eta, _ = step_eta(cfg, eta, np.zeros(9), u, -math.exp(-t) * np.ones(2))
            worst = max(worst, float(np.max(np.abs(eta - math.exp(-t)))))
        return worst

    e1, e2, e3 = err(16), err(32), err(64)
    assert e1 / e2 == pytest.approx(2.0, rel=0.1)
    assert e2 / e3 == pytest.approx(2.0, rel=0.1)


def test_eta_step_ignores_controls_with_zero_weights(rng):
    cfg = cfg_for(weights=Weights(L=0.0, L_Gamma=0.0))
    prev = 0.3 * np.cos(np.pi * cfg.mesh.nodes)
    th = 0.2 * np.sin(np.pi * cfg.mesh.nodes)
    a, _ = step_eta(cfg, prev, th, rng.normal(size=17), rng.normal(size=2))
    b, _ = step_eta(cfg, prev, th, 5 * rng.normal(size=17), rng.normal(size=2))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_theta_step_zero_data_gives_zero(eps):
    cfg = cfg_for(eps=eps)
    th, _, _ = step_theta(cfg, np.zeros(17), np.zeros(17), np.zeros(17), 0.1)
    assert np.all(th == 0.0)


def test_theta_step_matches_independent_minimiser(rng):
    cfg = cfg_for(eps=0.1)
    x = cfg.mesh.nodes
    prev = 0.2 * np.sin(np.pi * x)
    eta_ref = 0.3 * np.cos(np.pi * x)
    v = 30.0 * np.ones(17)
    th, _, _ = step_theta(cfg, prev, eta_ref, v, 0.05)
    J = theta_functional(cfg, prev, eta_ref, v, 0.1)
    ref = minimize(J, prev[1:-1], method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
    np.testing.assert_allclose(th[1:-1], ref.x, atol=1e-6)
    # discrete gradient of the functional vanishes at the returned step
    y = th[1:-1]
    g = np.array([(J(y + 1e-6 * e) - J(y - 1e-6 * e)) / 2e-6 for e in np.eye(y.size)])
    assert np.max(np.abs(g)) < 1e-6


def test_theta_step_facet_for_dominant_mobility():
    # constant large mobility and a small force: zero is the exact minimiser at eps = 0
    m = replace(flat_material(), alpha=lambda e: 50.0 + 0.0 * np.asarray(e, float))
    cfg = cfg_for(eps=0.0, material=m)
    v = 0.5 * np.sin(np.pi * cfg.mesh.nodes)
    th, _, cert = step_theta(cfg, np.zeros(17), np.zeros(17), v, 0.05)
    np.testing.assert_allclose(th, 0.0, atol=1e-12)
    J = theta_functional(cfg, np.zeros(17), np.zeros(17), v, 0.0)
    smooth_th, _, _ = step_theta(cfg.with_eps(1e-3), np.zeros(17), np.zeros(17), v, 0.05)
    assert J(th[1:-1]) <= J(smooth_th[1:-1]) + 1e-14
    assert cert <= 1e-7


def test_theta_step_eps0_beats_generic_minimiser_and_satisfies_inequality(rng):
    cfg = cfg_for(eps=0.0)
    x = cfg.mesh.nodes
    prev = 0.5 * np.sin(np.pi * x)
    eta_ref = 0.3 * np.cos(np.pi * x)
    v = 20.0 * np.sin(2 * np.pi * x)
    th, _, cert = step_theta(cfg, prev, eta_ref, v, 0.05)
    J = theta_functional(cfg, prev, eta_ref, v, 0.0)
    ref = minimize(J, prev[1:-1], method="Powell", options={"xtol": 1e-10, "ftol": 1e-14, "maxfev": 200000})
    assert J(th[1:-1]) <= ref.fun + 1e-12
    assert cert <= 1e-7
    # the inequality against fresh random test functions
    for _ in range(50):
        psi = th[1:-1] + 10.0 ** rng.uniform(-4, 0) * rng.normal(size=15)
        assert J(th[1:-1]) <= J(psi) + 1e-12


# -- energy ---------------------------------------------------------------------------


def test_energy_examples():
    mesh = Mesh1D(8)
    z = StateTriple(np.zeros(9), np.zeros(9))
    m = builtin_default()
    assert energy(mesh, z, 0.0, 7.0, m, 1.0).phi == pytest.approx(1.125, abs=1e-14)
    assert energy(mesh, z, 1.0, 7.0, m, 1.0).phi == pytest.approx(3.125, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 10), st.floats(0, 2), st.integers(0, 10_000))
def test_energy_shift_additivity_and_split_invariance(R, eps, seed):
    rng = np.random.default_rng(seed)
    mesh = Mesh1D(12)
    st_ = StateTriple(rng.normal(size=13), mesh.extend(rng.normal(size=11)))
    m = builtin_default()
    e0 = energy(mesh, st_, eps, 0.0, m, 1.0)
    eR = energy(mesh, st_, eps, R, m, 1.0)
    assert eR.phi - e0.phi == pytest.approx(0.5 * R * inner_H(mesh, st_.eta, st_.eta), rel=1e-12, abs=1e-12)
    assert eR.total == pytest.approx(e0.total, rel=1e-12, abs=1e-12)
    assert eR.phi >= 0


# -- trajectories ----------------------------------------------------------------------


def test_zero_controls_zero_state_is_stationary():
    cfg = cfg_for(N=32, eps=0.1)
    tr = solve_state(StateTriple(np.zeros(17), np.zeros(17)), ControlTriple.zeros(cfg.mesh, cfg.tgrid), cfg)
    assert np.max(np.abs(tr.eta)) < 1e-14
    assert np.max(np.abs(tr.theta)) < 1e-14


@pytest.mark.parametrize(
    "eps, scheme", [(0.0, "split"), (0.1, "split"), (1.0, "split"), (0.1, "coupled"), (1.0, "coupled")]
)
def test_energy_nonincreasing_without_forcing(eps, scheme):
    cfg = cfg_for(n=32, N=32, T=0.2, eps=eps, tolerances=SolverTolerances(scheme=scheme))
    x = cfg.mesh.nodes
    init = StateTriple(0.5 * np.cos(2 * np.pi * x), 0.3 * np.sin(np.pi * x))
    tr = solve_state(init, ControlTriple.zeros(cfg.mesh, cfg.tgrid), cfg)
    E = np.array([r.total for r in tr.energy])
    tol = 10 * (cfg.tgrid.tau + cfg.mesh.h**2) * abs(E[0])
    assert np.all(np.diff(E) <= tol * cfg.tgrid.tau)
    assert check_energy_dissipation(tr, cfg).passed


def test_trace_and_boundary_invariants(smooth_problem):
    pb = smooth_problem
    tr = solve_state(pb.init, pb.controls, pb.cfg)
    np.testing.assert_array_equal(tr.eta_Gamma, tr.eta[:, [0, -1]])
    assert np.all(tr.theta[:, 0] == 0.0) and np.all(tr.theta[:, -1] == 0.0)
    np.testing.assert_array_equal(tr.eta[0], pb.init.eta)
    np.testing.assert_array_equal(tr.theta[0], pb.init.theta)


def test_eps0_certificates_recorded(smooth_problem):
    pb = smooth_problem
    cfg = pb.cfg.with_eps(0.0)
    tr = solve_state(pb.init, pb.controls, cfg)
    assert len(tr.certificate_violation) == cfg.tgrid.n_steps
    assert max(tr.certificate_violation) <= cfg.tolerances.certificate_tol


def test_dependence_on_eps_shrinks_with_gap(smooth_problem):
    pb = smooth_problem
    base = solve_state(pb.init, pb.controls, pb.cfg.with_eps(0.1))
    d = []
    for e in (0.2, 0.11, 0.101):
        tr = solve_state(pb.init, pb.controls, pb.cfg.with_eps(e))
        d.append(float(np.max(np.abs(tr.theta - base.theta)) + np.max(np.abs(tr.eta - base.eta))))
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-3


def test_doubling_initial_perturbation_roughly_doubles_difference(smooth_problem):
    pb = smooth_problem
    x = pb.cfg.mesh.nodes
    base = solve_state(pb.init, pb.controls, pb.cfg)
    dirn = 1e-3 * np.cos(3 * np.pi * x)
    diffs = []
    for s in (1.0, 2.0):
        tr = solve_state(StateTriple(pb.init.eta + s * dirn, pb.init.theta), pb.controls, pb.cfg)
        diffs.append(float(np.max(np.abs(tr.eta - base.eta))))
    assert diffs[1] / diffs[0] == pytest.approx(2.0, rel=0.1)


def test_deterministic(smooth_problem):
    pb = smooth_problem
    cfg = pb.cfg.with_eps(0.0)
    a = solve_state(pb.init, pb.controls, cfg)
    b = solve_state(pb.init, pb.controls, cfg)
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.certificate_violation, b.certificate_violation)


def test_initial_theta_must_vanish_on_boundary():
    with pytest.raises(ValueError):
        StateTriple(np.zeros(5), np.ones(5))
    assert diff_x(Mesh1D(4), np.zeros(5)).shape == (4,)
