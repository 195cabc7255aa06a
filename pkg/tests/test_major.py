import numpy as np
import pytest
from hypothesis import given, strategies as st

from majorminor.builtins import bankrun_toy
from majorminor.flows import MeanField
from majorminor.instances import random_policy, random_scenario
from majorminor.major import (MajorPolicy, dpp_residual, entropy, gibbs, initial_value, major_model,
                              major_reward, solve_regularized, solve_unregularized)
from majorminor.paths import build_path_space

finite = st.floats(-50, 50, allow_nan=False)


@given(st.lists(finite, min_size=2, max_size=6), st.floats(-1e3, 1e3), st.floats(1e-3, 10))
def test_gibbs_shift_invariance(adv, shift, lam):
    a = np.array([adv])
    d1, v1 = gibbs(a, lam, np.ones(a.shape[1]))
    d2, v2 = gibbs(a + shift, lam, np.ones(a.shape[1]))
    assert np.abs(d1 - d2).max() <= 1e-12
    assert v2[0] - v1[0] == pytest.approx(shift, abs=1e-9)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=6))
def test_gibbs_uniform_at_large_lambda(adv):
    a = np.array([adv])
    d, _ = gibbs(a, 1e6, np.ones(a.shape[1]))
    assert np.abs(d - 1.0 / a.shape[1]).max() <= 1e-5


def test_gibbs_underflow_safe():
    d, v = gibbs(np.array([[0.0, -1e6, 1e6]]), 1e-8, np.ones(3))
    assert np.all(np.isfinite(d)) and d[0, 2] == 1.0 and np.isfinite(v[0])


def test_entropy_bounds(rng):
    p = rng.random(10_000)
    h = entropy(np.stack([p, 1 - p], axis=1))
    assert h.max() <= np.log(2) + 1e-12 <= 2 / np.e
    for A in (2, 3, 7):
        d = rng.dirichlet(np.full(A, 0.3), size=10_000)
        assert entropy(d).max() <= np.log(A) + 1e-12
        assert entropy(d).min() >= -1e-15
    assert entropy(np.array([1.0, 0.0])) == 0.0


def test_grid_entropy_is_nonpositive_on_unit_volume():
    sc = bankrun_toy()
    w = sc.actions.weights
    d = np.full(w.size, 1.0 / sc.actions.volume)
    assert entropy(d, w) == pytest.approx(0.0, abs=1e-15)


def setup(seed, **kw):
    rng = np.random.default_rng(seed)
    sc = random_scenario(rng, **kw)
    space = build_path_space(sc)
    return sc, space, MeanField.random(space, sc.n_minor, rng), rng


@given(seed=st.integers(0, 10 ** 6), lam=st.floats(1e-3, 5))
def test_dpp_holds_for_gibbs_policy(seed, lam):
    sc, space, mf, _ = setup(seed, horizon=3)
    model = major_model(sc, space, mf)
    pol, V = solve_regularized(sc, space, mf, lam, model=model)
    assert dpp_residual(sc, space, pol, V, lam, model) <= 1e-10
    assert pol.normalization_error() <= 1e-12
    assert major_reward(sc, space, pol, mf, lam, model=model) == pytest.approx(initial_value(sc, space, V),
                                                                             abs=1e-10)


@given(seed=st.integers(0, 10 ** 6))
def test_gibbs_beats_every_other_policy(seed):
    sc, space, mf, rng = setup(seed)
    lam = 0.3
    pol, V = solve_regularized(sc, space, mf, lam)
    best = initial_value(sc, space, V)
    for _ in range(5):
        other = random_policy(rng, space, sc.actions)
        assert major_reward(sc, space, other, mf, lam) <= best + 1e-12


@given(seed=st.integers(0, 10 ** 6))
def test_small_lambda_approaches_plain_optimum(seed):
    sc, space, mf, _ = setup(seed)
    V0, argmax = solve_unregularized(sc, space, mf)
    pol, V = solve_regularized(sc, space, mf, 1e-4)
    # soft value exceeds hard value by at most lambda * T * ln|A|
    gap = initial_value(sc, space, V) - initial_value(sc, space, V0)
    assert -1e-12 <= gap <= 1e-4 * sc.horizon * np.log(sc.n_actions) + 1e-12
    greedy = MajorPolicy.from_choices(space, sc.actions,
                                      lambda t, h: int(np.argmax(argmax.advantage[t][space.find(h).index])))
    assert major_reward(sc, space, greedy, mf) == pytest.approx(initial_value(sc, space, V0), abs=1e-12)


def test_zero_lambda_rejected(example):
    sc, space = example
    with pytest.raises(ValueError, match="lambda"):
        solve_regularized(sc, space, MeanField.uniform(space, 1), 0.0)


def test_example_major_value_is_one(example):
    sc, space = example
    V, argmax = solve_unregularized(sc, space, MeanField.uniform(space, 1))
    assert initial_value(sc, space, V) == 1.0
    # at t = 1 on the active path both actions are optimal
    node = space.find(("active", "active")).index
    assert argmax.mask[1][node].tolist() == [True, True]
