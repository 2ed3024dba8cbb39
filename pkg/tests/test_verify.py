"""Executable inequality checks: uniform regularisation bound, discrete
Gronwall, energy dissipation, observed orders and continuous dependence."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwc_control.linear import ForcingTriple, solve_P
from kwc_control.mesh import Mesh1D, TimeGrid
from kwc_control.problem import ControlTriple, ProblemConfig, StateTriple
from kwc_control.material import builtin_default
from kwc_control.state import solve_state
from kwc_control.verify import (
    GronwallInstance,
    ManufacturedLinearProblem,
    check_continuous_dependence,
    check_energy_dissipation,
    check_mosco_bound,
    convergence_study,
    discrete_gronwall_bound,
    gronwall_instance_at_equality,
    gronwall_max_ratio,
    observed_order,
    random_gronwall_instance,
)


# -- uniform bound of the regularisation ---------------------------------------------


def test_mosco_equal_eps_is_zero():
    xi = np.linspace(-3, 3, 101)
    assert check_mosco_bound(0.3, 0.3, xi) == 0.0


def test_mosco_tight_at_zero_slope():
    # at xi = 0 the two sides coincide exactly
    assert check_mosco_bound(0.7, 0.2, 0.0) == pytest.approx(0.0, abs=1e-16)
    assert check_mosco_bound(0.7, 0.2, np.array([0.0, 1.0])) == pytest.approx(0.0, abs=1e-16)


def test_mosco_rejects_negative_eps():
    with pytest.raises(ValueError):
        check_mosco_bound(-0.1, 0.2, 1.0)
    with pytest.raises(ValueError):
        check_mosco_bound(np.nan, 0.2, 1.0)


@given(
    st.floats(0, 10, allow_nan=False),
    st.floats(0, 10, allow_nan=False),
    st.floats(-1e3, 1e3, allow_nan=False),
)
def test_mosco_bound_property(e1, e2, xi):
    assert check_mosco_bound(e1, e2, xi) <= 1e-14 * max(1.0, abs(xi), e1, e2)


# -- discrete Gronwall -----------------------------------------------------------------


def test_gronwall_bound_examples():
    inst = gronwall_instance_at_equality(0.0, 0.1, 1.0, 1.0, np.ones(10))
    assert inst.n_steps == 10
    assert discrete_gronwall_bound(inst) == pytest.approx(4.0)
    assert inst.P[-1] == pytest.approx(2.0)
    assert gronwall_max_ratio(inst) == pytest.approx(0.5)
    zero = gronwall_instance_at_equality(1.0, 0.1, 1.0, 0.0, np.zeros(10))
    assert discrete_gronwall_bound(zero) == 0.0
    assert gronwall_max_ratio(zero) == 0.0


def test_gronwall_step_count_rule():
    # smallest N with (N - 1) tau < T <= N tau
    assert gronwall_instance_at_equality(0.0, 0.3, 1.0, 1.0, np.ones(4)).n_steps == 4
    with pytest.raises(ValueError):
        gronwall_instance_at_equality(0.0, 0.3, 1.0, 1.0, np.ones(3))


def test_gronwall_rejects_bad_hypotheses():
    with pytest.raises(ValueError, match="c \\* tau"):
        GronwallInstance(4.0, 0.5, 1.0, np.ones(3), np.zeros(3))
    with pytest.raises(ValueError, match="recursion"):
        GronwallInstance(0.0, 0.5, 1.0, np.array([1.0, 5.0, 5.0]), np.zeros(3))
    with pytest.raises(ValueError):
        GronwallInstance(0.0, 1.5, 3.0, np.ones(3), np.zeros(3))


def test_gronwall_bound_fails_close_to_ctau_two():
    # the recursion hypothesis admits c tau up to 2, but the amplification
    # ((1 + c tau / 2) / (1 - c tau / 2))^N then outgrows 2 exp(3/2 c T)
    inst = gronwall_instance_at_equality(3.8, 0.5, 1.0, 1.0, np.zeros(2))
    assert gronwall_max_ratio(inst) > 1.0
    # with c tau <= 2/3 each step amplifies by at most exp(3/2 c tau)
    x = 1.0 / 3.0
    assert (1 + x) / (1 - x) <= math.exp(1.5 * 2 / 3)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_gronwall_bound_holds_for_ctau_at_most_two_thirds(seed):
    inst = random_gronwall_instance(np.random.default_rng(seed))
    assert inst.c * inst.tau <= 2 / 3 + 1e-15
    assert gronwall_max_ratio(inst) <= 1.0


# -- energy dissipation --------------------------------------------------------------


def test_energy_dissipation_stationary_run():
    cfg = ProblemConfig(Mesh1D(16), TimeGrid(0.1, 32), builtin_default(), eps=0.1)
    tr = solve_state(StateTriple(np.zeros(17), np.zeros(17)), ControlTriple.zeros(cfg.mesh, cfg.tgrid), cfg)
    rep = check_energy_dissipation(tr, cfg)
    assert rep.passed
    np.testing.assert_allclose(rep.margins, rep.tol, atol=1e-12)


def test_energy_dissipation_detects_injected_energy(smooth_problem):
    pb = smooth_problem
    tr = solve_state(pb.init, ControlTriple.zeros(pb.cfg.mesh, pb.cfg.tgrid), pb.cfg)
    assert check_energy_dissipation(tr, pb.cfg).passed
    # pretending the data did no work while a forced run gains energy fails the check
    forced = solve_state(pb.init, pb.controls.scaled(50.0), pb.cfg)
    E = np.array([r.total for r in forced.energy])
    D = np.array([r.dissipation for r in forced.energy[1:]])
    tol = 10 * (pb.cfg.tgrid.tau + pb.cfg.mesh.h**2) * abs(E[0])
    assert np.min(tol - D - np.diff(E) / pb.cfg.tgrid.tau) < 0


# -- observed orders -----------------------------------------------------------------


def test_observed_order_examples():
    assert observed_order([0.1, 0.05], [0.01, 0.0025]) == pytest.approx(2.0)
    assert observed_order([1, 0.5, 0.25], [0, 0, 0]) == math.inf
    with pytest.raises(ValueError):
        observed_order([1.0], [1.0])
    with pytest.raises(ValueError):
        observed_order([1.0, 0.5], [1.0, 0.0])


@given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
def test_observed_order_recovers_power_law(p, c):
    s = np.array([0.1, 0.05, 0.025])
    assert observed_order(s, c * s**p) == pytest.approx(p, rel=1e-9)


def test_convergence_study_pairwise():
    res = convergence_study(lambda s: 3 * s, [0.4, 0.2, 0.1])
    assert res.order == pytest.approx(1.0)
    np.testing.assert_allclose(res.pairwise_orders, 1.0)


def test_manufactured_problem_temporal_order():
    mp = ManufacturedLinearProblem(T=0.5)
    res = convergence_study(lambda tau: mp.error(256, round(0.5 / tau)), [0.5 / 16, 0.5 / 32, 0.5 / 64])
    assert abs(res.order - 1.0) < 0.2


# -- continuous dependence ------------------------------------------------------------


def _linear_setup(n=16, N=32, T=0.5):
    mp = ManufacturedLinearProblem(T=T)
    mesh, tg = Mesh1D(n), TimeGrid(T, N)
    q = mp.quintet(mesh, tg)
    f = mp.forcing(mesh, tg)
    p0 = mp.p_exact(0.0, mesh.nodes)
    z0 = mp.z_exact(0.0, mesh.nodes)
    z0[[0, -1]] = 0.0
    return mesh, tg, q, f, p0, z0


def test_continuous_dependence_identical_data():
    mesh, tg, q, f, p0, z0 = _linear_setup()
    r = solve_P(p0, z0, q, f, 1.0, enforce_step_bound=False)
    item = check_continuous_dependence(r, r, f, f, q, 1.0)
    assert item.lhs == 0.0 and item.passed


def test_continuous_dependence_scaled_and_random_data(rng):
    mesh, tg, q, f, p0, z0 = _linear_setup()
    r1 = solve_P(p0, z0, q, f, 1.0, enforce_step_bound=False)
    f2 = f.scaled(1.5)
    r2 = solve_P(1.5 * p0, 1.5 * z0, q, f2, 1.0, enforce_step_bound=False)
    assert check_continuous_dependence(r1, r2, f, f2, q, 1.0).passed
    c = ControlTriple.random(mesh, tg, rng, 1.0)
    f3 = f + ForcingTriple(c.u, c.u_Gamma, c.v)
    r3 = solve_P(p0, z0, q, f3, 1.0, enforce_step_bound=False)
    item = check_continuous_dependence(r1, r3, f, f3, q, 1.0)
    assert item.passed and item.lhs > 0
