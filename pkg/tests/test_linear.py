"""Coupled linear scheme: step bound, constants, step solves and estimates."""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwc_control.errors import StepSizeError
from kwc_control.linear import (
    CoefficientQuintet,
    ForcingTriple,
    StepSizeWarning,
    check_apriori,
    constants,
    solve_P,
    solve_step,
    tau0,
    time_reverse,
)
from kwc_control.mesh import Mesh1D, TimeGrid
from kwc_control.problem import ControlTriple
from kwc_control.verify import ManufacturedLinearProblem, convergence_study


def quintet(mesh, tg, a=1.0, b=0.0, mu=0.0, omega=0.0, A=0.0):
    return CoefficientQuintet.from_functions(mesh, tg, a=a, b=b, mu=mu, omega=omega, A=A)


def random_data(mesh, tg, rng, scale=1.0):
    c = ControlTriple.random(mesh, tg, rng, scale)
    return ForcingTriple(c.u, c.u_Gamma, c.v)


def test_tau0_examples():
    mesh, tg = Mesh1D(8), TimeGrid(1.0, 4)
    assert tau0(quintet(mesh, tg), 1.0) == pytest.approx(0.0625)
    assert tau0(quintet(mesh, tg), 0.5) == pytest.approx(0.015625)
    vals = [tau0(quintet(mesh, tg, omega=w), 1.0) for w in (0.0, 0.5, 1.0, 2.0)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_constants_examples():
    mesh, tg = Mesh1D(8), TimeGrid(0.01, 4)
    c = constants(quintet(mesh, tg), 1.0, 0.01)
    assert c.C0 == pytest.approx(32.0)
    assert c.C1 == pytest.approx(4 * 32.0**2 * math.exp(48 * 0.01))
    # halving delta_*(a) when it is the minimum doubles C0 (a W1,inf fixed by the numerator term)
    c_half = constants(quintet(mesh, tg, a=0.5), 1.0, 0.01)
    assert c_half.C0 == pytest.approx(16.0 * 1.5 / 0.5)


def test_zero_step_and_zero_trajectory():
    mesh, tg = Mesh1D(10), TimeGrid(0.5, 10)
    q = quintet(mesh, tg, mu=0.3, omega=0.2, A=0.1)
    z = mesh.zeros()
    p, zz = solve_step(mesh, 0.01, 1.0, q.at(1), z, z, z, np.zeros(2), z)
    assert np.all(p == 0) and np.all(zz == 0)
    tr = solve_P(z, z, q, ForcingTriple.zeros(mesh, tg), 1.0)
    assert np.all(tr.p == 0) and np.all(tr.z == 0)


def test_uncoupled_p_block_matches_standalone_heat_step(rng):
    # oracle: (M_X/tau + S + M_mu) p = M_X p_prev / tau + load, assembled densely
    mesh = Mesh1D(12)
    tau, mu = 0.01, 0.4
    tg = TimeGrid(tau, 1)
    q = quintet(mesh, tg, mu=mu, A=0.2)
    p_prev = rng.normal(size=13)
    h = rng.normal(size=13)
    hG = rng.normal(size=2)
    p, _ = solve_step(mesh, tau, 1.0, q.at(1), p_prev, mesh.zeros(), h, hG, mesh.zeros())
    M = mesh.mass_matrix().to_dense()
    MX = M.copy()
    MX[0, 0] += 1.0
    MX[-1, -1] += 1.0
    S = mesh.stiffness_matrix().to_dense()
    rhs = MX @ p_prev / tau + M @ h
    rhs[0] += hG[0]
    rhs[-1] += hG[1]
    p_ref = np.linalg.solve(MX / tau + S + mu * M, rhs)
    np.testing.assert_allclose(p, p_ref, rtol=1e-12, atol=1e-12)


def test_symmetric_data_gives_symmetric_solution():
    mesh, tg = Mesh1D(16), TimeGrid(0.1, 5)
    x = mesh.nodes
    q = quintet(mesh, tg, a=lambda t, x: 1 + 0.2 * np.cos(2 * np.pi * x), mu=0.3, A=0.1)
    N1 = tg.n_steps + 1
    h = np.tile(np.cos(2 * np.pi * x), (N1, 1))
    k = np.tile(np.sin(np.pi * x), (N1, 1))
    tr = solve_P(np.cos(2 * np.pi * x), np.sin(np.pi * x) * 0.3, q, ForcingTriple(h, np.ones((N1, 2)), k), 1.0)
    np.testing.assert_allclose(tr.p, tr.p[:, ::-1], atol=1e-12)
    np.testing.assert_allclose(tr.z, tr.z[:, ::-1], atol=1e-12)


def test_manufactured_decay_solution_converges():
    # p = e^{-t} with p_Gamma = e^{-t}, z = 0, h = h_Gamma = -e^{-t}
    def err(n_steps, n_cells=16):
        mesh, tg = Mesh1D(n_cells), TimeGrid(0.5, n_steps)
        q = quintet(mesh, tg)
        f = ForcingTriple.from_functions(
            mesh, tg, h=lambda t, x: -np.exp(-t) * np.ones_like(x), h_Gamma=lambda t: -np.exp(-t) * np.ones(2)
        )
        tr = solve_P(np.ones(n_cells + 1), mesh.zeros(), q, f, 1.0, enforce_step_bound=False)
        return float(np.max(np.abs(tr.p - np.exp(-tg.times)[:, None])))

    res = convergence_study(lambda tau: err(int(round(0.5 / tau))), [0.5 / 16, 0.5 / 32, 0.5 / 64])
    assert res.order == pytest.approx(1.0, abs=0.15)


def test_superposition(rng):
    mesh, tg = Mesh1D(10), TimeGrid(0.2, 8)
    q = quintet(mesh, tg, mu=0.2, omega=0.3, A=0.1)
    d1, d2 = random_data(mesh, tg, rng), random_data(mesh, tg, rng)
    p1, p2 = rng.normal(size=11), rng.normal(size=11)
    z1 = mesh.extend(rng.normal(size=9))
    z2 = mesh.extend(rng.normal(size=9))
    a, b = 0.7, -1.3
    t1 = solve_P(p1, z1, q, d1, 1.0, enforce_step_bound=False)
    t2 = solve_P(p2, z2, q, d2, 1.0, enforce_step_bound=False)
    t12 = solve_P(a * p1 + b * p2, a * z1 + b * z2, q, d1.scaled(a) + d2.scaled(b), 1.0, enforce_step_bound=False)
    np.testing.assert_allclose(t12.p, a * t1.p + b * t2.p, atol=1e-11)
    np.testing.assert_allclose(t12.z, a * t1.z + b * t2.z, atol=1e-11)


def test_step_policy_warns_and_refuses():
    mesh = Mesh1D(8)
    q_of = lambda N: quintet(mesh, TimeGrid(N * 0.0, N) if False else TimeGrid(0.0625 * 1.5 * N, N))  # noqa: E731
    f = lambda q: ForcingTriple.zeros(mesh, q.tgrid)  # noqa: E731
    q = q_of(2)  # tau = 1.5 tau0
    with pytest.warns(StepSizeWarning):
        solve_P(mesh.zeros(), mesh.zeros(), q, f(q), 1.0)
    q2 = quintet(mesh, TimeGrid(0.0625 * 2.5 * 2, 2))  # tau = 2.5 tau0
    with pytest.raises(StepSizeError):
        solve_P(mesh.zeros(), mesh.zeros(), q2, f(q2), 1.0)
    q3 = quintet(mesh, TimeGrid(0.0625 * 0.5 * 2, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_P(mesh.zeros(), mesh.zeros(), q3, f(q3), 1.0)


def test_apriori_zero_data_passes():
    mesh, tg = Mesh1D(8), TimeGrid(0.1, 4)
    q = quintet(mesh, tg)
    f = ForcingTriple.zeros(mesh, tg)
    tr = solve_P(mesh.zeros(), mesh.zeros(), q, f, 1.0)
    rep = check_apriori(tr, q, f, 1.0)
    assert rep.passed
    assert all(it.lhs == 0 for it in rep.items)


def test_apriori_manufactured_run_passes():
    m = ManufacturedLinearProblem()
    tr = m.solve(32, 64)
    q = m.quintet(tr.mesh, tr.tgrid)
    rep = check_apriori(tr, q, m.forcing(tr.mesh, tr.tgrid), m.nu)
    assert rep.passed, [(it.name, it.lhs, it.rhs) for it in rep.items]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_apriori_random_smooth_problems(seed):
    rng = np.random.default_rng(seed)
    mesh = Mesh1D(16)
    probe = TimeGrid(0.5, 1)
    coef = dict(
        a=lambda t, x: 1 + 0.3 * np.sin(np.pi * x) * np.cos(t),
        b=float(rng.uniform(0, 0.5)),
        mu=float(rng.uniform(-0.5, 0.5)),
        omega=float(rng.uniform(-0.5, 0.5)),
        A=float(rng.uniform(0, 0.5)),
    )
    bound = tau0(quintet(mesh, probe, **coef), 1.0)
    tg = TimeGrid(32 * bound / 2, 32)
    q = quintet(mesh, tg, **coef)
    f = random_data(mesh, tg, rng)
    tr = solve_P(rng.normal(size=17), mesh.extend(rng.normal(size=15)), q, f, 1.0)
    assert check_apriori(tr, q, f, 1.0).passed


def test_time_reverse():
    np.testing.assert_array_equal(time_reverse(np.array([1, 2, 3])), [3, 2, 1])
    a = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(time_reverse(time_reverse(a)), a)
    np.testing.assert_array_equal(time_reverse(np.full(5, 2.0)), np.full(5, 2.0))


def test_cross_coupling_blocks_are_transposes():
    from kwc_control.linear import assemble_step_matrix

    mesh = Mesh1D(6)
    n1 = mesh.n_nodes
    om = np.full((6, 2), 0.4)
    M = assemble_step_matrix(mesh, 0.01, 1.0, np.ones(n1), np.zeros(n1), np.zeros(n1), om, np.zeros(6)).to_dense()
    from kwc_control.linear import _p_index, _z_index

    P, Z = _p_index(6), _z_index(6)
    np.testing.assert_allclose(M[np.ix_(P, Z)], M[np.ix_(Z, P)].T, atol=1e-13)
