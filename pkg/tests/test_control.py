import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from majorminor.control import (ControlMeanField, ControlScenario, bellman_slack_mass, condition,
                                consistent_flow_step, control_consistency, control_model, control_reward,
                                control_toy, control_toy_coupled, dynamics_residual, family_oracle,
                                forward_flow, greedy_policy, optimal_values, solve_control_equilibrium,
                                verify_control)
from majorminor.equilibrium import SolveConfig
from majorminor.instances import random_control_scenario, random_policy
from majorminor.oracle import brute_force_control
from majorminor.paths import build_path_space
from majorminor.scenario import load_scenario


def instance(seed, **kw):
    rng = np.random.default_rng(seed)
    cs = random_control_scenario(rng, **kw)
    space = build_path_space(cs)
    mf = ControlMeanField.random(space, cs.n_minor, cs.n_minor_actions, rng)
    alpha = random_policy(rng, space, cs.actions)
    return cs, space, mf, alpha, rng


def random_minor_policy(rng, cm):
    pol = []
    for f in cm.f:
        x = rng.random(f.shape)
        pol.append(x / x.sum(axis=2, keepdims=True))
    return pol


@given(seed=st.integers(0, 10 ** 6))
def test_dp_matches_enumeration(seed):
    cs, space, mf, alpha, _ = instance(seed, horizon=2)
    cm = control_model(cs, space, alpha, mf)
    V, _ = optimal_values(cm)
    value, policy, _ = brute_force_control(cm)
    assert abs(float((cm.start * V[0]).sum()) - value) <= 1e-9
    assert control_reward(forward_flow(cm, policy), cm) == pytest.approx(value, abs=1e-12)


@given(seed=st.integers(0, 10 ** 6))
def test_forward_flows_lie_in_the_admissible_set(seed):
    cs, space, mf, alpha, rng = instance(seed, horizon=3)
    cm = control_model(cs, space, alpha, mf)
    flow = forward_flow(cm, random_minor_policy(rng, cm))
    assert dynamics_residual(flow, cm) <= 1e-10
    assert flow.mass_error() <= 1e-12
    assert min(a.min() for a in flow.v) >= 0


@given(seed=st.integers(0, 10 ** 6))
def test_greedy_flow_has_no_bellman_slack(seed):
    cs, space, mf, alpha, rng = instance(seed, horizon=2)
    cm = control_model(cs, space, alpha, mf)
    V, Q = optimal_values(cm)
    pol = [greedy_policy(q, 1e-12, None) for q in Q]
    flow = forward_flow(cm, pol)
    assert bellman_slack_mass(flow, V, Q, 1e-12) == 0.0
    assert control_reward(flow, cm) == pytest.approx(float((cm.start * V[0]).sum()), abs=1e-12)
    other = forward_flow(cm, random_minor_policy(rng, cm))
    assert control_reward(other, cm) <= float((cm.start * V[0]).sum()) + 1e-12


def test_flow_step_matches_simulation():
    cs, space, mf, alpha, rng = instance(11, horizon=1, n_minor=3, n_major=2, n_minor_actions=2)
    cm = control_model(cs, space, alpha, mf)
    pol = random_minor_policy(rng, cm)
    v0 = cm.start[:, :, None] * pol[0]
    exact = consistent_flow_step(cm, 0, v0, None)
    n = 400_000
    flat = v0.ravel() / v0.sum()
    idx = rng.choice(flat.size, size=n, p=flat)
    u, x, a = np.unravel_index(idx, v0.shape)
    s_next = (rng.random(n)[:, None] > np.cumsum(cm.q[0][u], axis=1)).sum(axis=1)
    y = (rng.random(n)[:, None] > np.cumsum(cm.kernel[0][u, x, a], axis=1)).sum(axis=1)
    node = space.child[0][u, s_next]
    counts = np.zeros_like(exact)
    np.add.at(counts, (node, y), 1.0)
    assert np.abs(counts / n - exact).max() <= 5 / np.sqrt(n)


def test_greedy_tie_rules():
    Q = np.array([[[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]]])
    np.testing.assert_allclose(greedy_policy(Q, 1e-12, None), [[[0.5, 0.5, 0], [0, 0.5, 0.5]]])
    np.testing.assert_allclose(greedy_policy(Q, 1e-12, 0.0), [[[1, 0, 0], [0, 1, 0]]])
    np.testing.assert_allclose(greedy_policy(Q, 1e-12, 1.0), [[[0, 1, 0], [0, 0, 1]]])
    np.testing.assert_allclose(greedy_policy(np.array([[[0.0, 3.0]]]), 1e-12, 0.3), [[[0, 1]]])


@given(seed=st.integers(0, 10 ** 6))
def test_condition_round_trip(seed):
    cs, space, mf, alpha, rng = instance(seed)
    cm = control_model(cs, space, alpha, mf)
    flow = forward_flow(cm, random_minor_policy(rng, cm))
    cond = condition(flow, mf)
    assert control_consistency(cond, flow) <= 1e-12


@given(seed=st.integers(0, 10 ** 6))
def test_decoupled_random_equilibrium_in_two_iterations(seed):
    cs, space, *_ = instance(seed, coupling=0.0)
    rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.2, tol=1e-10))
    assert rep.converged and rep.iterations <= 2
    cert = verify_control(rep, cs, space, 1e-9)
    assert cert.ok, cert.values


def test_control_toy_two_iterations_and_certificate():
    cs = control_toy()
    space = build_path_space(cs)
    rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.1, tol=1e-10))
    assert rep.converged and rep.iterations <= 2
    assert dynamics_residual(rep.flow, control_model(cs, space, rep.alpha, rep.mf)) <= 1e-10
    assert verify_control(rep, cs, space, 1e-10).ok


def test_coupled_toy_matches_family_search():
    cs = control_toy_coupled()
    space = build_path_space(cs)
    lam = 0.1
    rep = solve_control_equilibrium(cs, space, SolveConfig(lam=lam, tol=1e-12))
    cert = verify_control(rep, cs, space, 1e-6)
    assert rep.converged and cert.ok
    fam = family_oracle(cs, space, lam, np.linspace(0, 1, 101))
    best = fam["best"]
    assert fam["residual"][best] <= 1e-12
    from majorminor.control import control_flow_distance
    assert control_flow_distance(fam["mean_field"][best], rep.mf) <= 1e-6


def test_tampered_control_report_fails():
    cs = control_toy_coupled()
    space = build_path_space(cs)
    rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.1))
    rep.flow.v[0] = rep.flow.v[0][:, :, ::-1].copy()  # everyone plays the other action
    cert = verify_control(rep, cs, space, 1e-6)
    assert not cert.passed["bellman"] and not cert.passed["consistency"]


@pytest.mark.parametrize("make", [control_toy, control_toy_coupled])
def test_round_trip(tmp_path, make):
    cs = make()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cs.to_json()))
    again = load_scenario(path)
    assert isinstance(again, ControlScenario)
    assert json.dumps(again.to_json()) == json.dumps(cs.to_json())
