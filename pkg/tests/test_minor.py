import numpy as np
import pytest
from hypothesis import given, strategies as st

from majorminor.equilibrium import example_policy
from majorminor.errors import CapacityError, InfeasibleFlow
from majorminor.flows import MeanField
from majorminor.instances import random_policy, random_scenario, with_stopping_tie
from majorminor.minor import (assemble_constraints, best_response_gap, flow_from_rule, lp_best_response,
                              minor_model, minor_objective, minor_reward, solve_dp, solve_lp)
from majorminor.oracle import brute_force_stopping, stopping_rule_count
from majorminor.paths import build_path_space


def instance(seed, **kw):
    rng = np.random.default_rng(seed)
    kw.setdefault("n_minor", int(rng.integers(1, 5)))
    kw.setdefault("n_major", int(rng.integers(1, 3)))
    kw.setdefault("horizon", int(rng.integers(1, 4)))
    sc = random_scenario(rng, **kw)
    space = build_path_space(sc)
    mf = MeanField.random(space, sc.n_minor, rng)
    alpha = random_policy(rng, space, sc.actions)
    return sc, space, mf, alpha


@given(seed=st.integers(0, 10 ** 6))
def test_dp_lp_and_enumeration_agree(seed):
    sc, space, mf, alpha = instance(seed)
    mm = minor_model(sc, space, mf, alpha)
    dp, flow = solve_dp(sc, space, mf, alpha, model=mm)
    lp_flow, lp_value = lp_best_response(sc, space, mf, alpha, model=mm)
    assert abs(dp.total - lp_value) <= 1e-9
    assert abs(minor_reward(flow, mm) - dp.total) <= 1e-12
    assert abs(minor_reward(lp_flow, mm) - lp_value) <= 1e-12
    if stopping_rule_count(mm) <= 10 ** 4:
        value, stop, _ = brute_force_stopping(mm)
        assert abs(value - dp.total) <= 1e-9
        assert abs(minor_reward(flow_from_rule(mm, stop), mm) - value) <= 1e-12


@given(seed=st.integers(0, 10 ** 6))
def test_flow_invariants(seed):
    sc, space, mf, alpha = instance(seed)
    system = assemble_constraints(sc, space, mf, alpha)
    for q in (0.0, 0.5, 1.0):
        _, flow = solve_dp(sc, space, mf, alpha, q=q)
        assert abs(flow.stopped_mass() - 1.0) <= 1e-10
        assert flow.balance_residual() <= 1e-10
        assert system.residual(flow) <= 1e-10
        assert flow.min_entry() >= 0
    lp_flow, _ = lp_best_response(sc, space, mf, alpha)
    assert abs(lp_flow.stopped_mass() - 1.0) <= 1e-10 and lp_flow.balance_residual() <= 1e-10


@given(seed=st.integers(0, 10 ** 6))
def test_pack_unpack_round_trip(seed):
    sc, space, mf, alpha = instance(seed)
    system = assemble_constraints(sc, space, mf, alpha)
    _, flow = solve_dp(sc, space, mf, alpha)
    x = system.pack(flow)
    again = system.unpack(x)
    assert all(np.array_equal(a, b) for a, b in zip(again.mu_tilde + again.m_tilde, flow.mu_tilde + flow.m_tilde))
    assert np.abs(system.A @ x - system.b).max() <= 1e-12


def tie_instance(seed):
    sc, space, mf, alpha = instance(seed, n_minor=2, n_major=2, horizon=2)
    mm = minor_model(sc, space, mf, alpha)
    dp, _ = solve_dp(sc, space, mf, alpha, model=mm)
    cont0 = mm.continuation(0, dp.values[1])
    tied = with_stopping_tie(sc, float(cont0[0, 0]), space, 0, 0)
    return tied, space, mf, alpha


@given(seed=st.integers(0, 10 ** 6), theta=st.floats(0, 1))
def test_optimizer_set_is_convex(seed, theta):
    sc, space, mf, alpha = tie_instance(seed)
    mm = minor_model(sc, space, mf, alpha)
    d0, f0 = solve_dp(sc, space, mf, alpha, q=0.0, model=mm)
    _, f1 = solve_dp(sc, space, mf, alpha, q=1.0, model=mm)
    assert d0.tie[0][0, 0]
    assert np.abs(f0.mu_tilde[0] - f1.mu_tilde[0]).max() > 1e-3  # two distinct optimizers
    system = assemble_constraints(sc, space, mf, alpha, model=mm)
    mix = f0.combine(f1, theta)
    assert system.residual(mix) <= 1e-10
    assert abs(minor_reward(mix, mm) - d0.total) <= 1e-10
    assert abs(best_response_gap(mix, sc, space, mf, alpha)) <= 1e-10


def test_infeasible_flow_rejected():
    sc, space, mf, alpha = instance(7)
    _, flow = solve_dp(sc, space, mf, alpha)
    flow.mu_tilde[0] = flow.mu_tilde[0] + 0.1
    with pytest.raises(InfeasibleFlow):
        best_response_gap(flow, sc, space, mf, alpha)


def test_lp_dump_lists_every_row():
    sc, space, mf, alpha = instance(3, horizon=1, n_major=1, n_minor=2)
    system = assemble_constraints(sc, space, mf, alpha)
    text = system.dump()
    assert all(name in text for name in system.row_names)
    assert text.rstrip().endswith("ENDATA")


def test_enumeration_budget():
    sc, space, mf, alpha = instance(5, n_minor=4, n_major=2, horizon=3)
    mm = minor_model(sc, space, mf, alpha)
    with pytest.raises(CapacityError):
        brute_force_stopping(mm, budget=100)


def test_bad_tie_parameter(example):
    sc, space = example
    with pytest.raises(ValueError):
        solve_dp(sc, space, MeanField.uniform(space, 1), example_policy(sc, space, 0.0), q=1.5)


@pytest.mark.parametrize("p,value,stop_time", [(0.0, 0.5, 1), (1.0, 1.0, 2)])
def test_example_best_responses(example, p, value, stop_time):
    sc, space = example
    mf = MeanField.uniform(space, 1)
    alpha = example_policy(sc, space, p)
    dp, flow = solve_dp(sc, space, mf, alpha)
    assert dp.total == value
    stopped = [float(a.sum()) for a in flow.mu_tilde]
    assert stopped[stop_time] == 1.0


def test_example_threshold_at_one_quarter(example):
    sc, space = example
    mf = MeanField.uniform(space, 1)
    for p in np.linspace(0, 1, 21):
        dp, flow = solve_dp(sc, space, mf, example_policy(sc, space, float(p)))
        # waiting pays 1 if the major exits at 1, else 1/3 at the end
        assert dp.total == pytest.approx(max(0.5, p + (1 - p) / 3), abs=1e-12)
        continues = float(flow.mu_tilde[1].sum()) < 0.5
        if abs(p - 0.25) > 1e-9:
            assert continues == (p > 0.25)
