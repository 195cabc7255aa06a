"""Random problem instances for tests, oracles and demos."""
from __future__ import annotations

import dataclasses

import numpy as np

from .flows import MeanField
from .major import MajorPolicy
from .scenario import ActionSpace, AffineTable, FeatureMap, Scenario


def _kernel(rng, shape, lo, hi, coupling):
    """Random rows over the last axis that stay stochastic over the feature box."""
    K = lo.size
    base = 0.2 + rng.random(shape)
    base /= base.sum(axis=-1, keepdims=True)
    coef = np.zeros((K,) + shape)
    if K and coupling:
        raw = rng.uniform(-1, 1, (K,) + shape)
        raw -= raw.mean(axis=-1, keepdims=True)
        bound = np.maximum(np.abs(lo), np.abs(hi)).reshape((K,) + (1,) * len(shape))
        spend = (bound * np.abs(raw)).sum(axis=0)
        room = base / np.where(spend > 0, spend, 1.0)
        scale = 0.9 * coupling * room.min(axis=-1, keepdims=True)
        coef = raw * scale[None]
    return AffineTable(base, coef)


def _reward(rng, shape, K, coupling):
    return AffineTable(rng.uniform(-1, 1, shape), coupling * rng.uniform(-0.5, 0.5, (K,) + shape))


def random_scenario(rng: np.random.Generator, n_minor: int = 3, n_major: int = 2, horizon: int = 2,
                    n_actions: int = 2, feature: str | None = None, coupling: float = 1.0,
                    path_window: int = 1, grid_actions: bool = False) -> Scenario:
    """Random scenario with affine mean-field coupling through one feature map."""
    grid = np.sort(rng.uniform(-1, 2, n_minor))
    feature = feature or rng.choice(["none", "mass", "cells", "moment"])
    feats = FeatureMap(str(feature), grid)
    lo, hi = feats.box()
    K = feats.dim
    T, S, S0, W = horizon, n_minor, n_major, n_major ** path_window
    actions = ActionSpace.grid([0.0], [2.0], [n_actions]) if grid_actions else ActionSpace.finite(
        np.arange(n_actions, dtype=float))
    p0 = 0.2 + rng.random(S0)
    q0 = 0.2 + rng.random(S)
    return Scenario(
        name="random", horizon=T, major_states=tuple(f"s{i}" for i in range(S0)), minor_grid=grid,
        actions=actions, features=feats,
        major_kernel=_kernel(rng, (T, W, n_actions, S0), lo, hi, coupling),
        minor_kernel=_kernel(rng, (T, S, W, S), lo, hi, coupling),
        major_running_reward=_reward(rng, (T, S0, n_actions), K, coupling),
        major_terminal_reward=_reward(rng, (S0,), K, coupling),
        minor_continuation_reward=_reward(rng, (T, W, S), K, coupling),
        minor_stopping_reward=_reward(rng, (T + 1, W, S), K, coupling),
        initial_major_law=p0 / p0.sum(), initial_minor_law=q0 / q0.sum(), path_window=path_window,
    ).validate()


def random_mean_field(rng, space, n_minor: int) -> MeanField:
    return MeanField.random(space, n_minor, rng)


def random_policy(rng, space, actions: ActionSpace) -> MajorPolicy:
    dens = []
    for t in range(space.horizon):
        x = rng.random((space.size(t), actions.size)) ** 3
        x /= (x * actions.weights).sum(axis=1, keepdims=True)
        dens.append(x)
    return MajorPolicy(actions, dens)


def with_stopping_tie(scenario: Scenario, cont0: np.ndarray, space, root: int, x: int) -> Scenario:
    """Copy of the scenario whose t=0 stopping reward at (x, root) equals ``cont0``.

    ``cont0`` is the continuation value at that cell, so stopping and
    continuing tie there and the best-response set has more than one point.
    """
    tab = scenario.minor_stopping_reward
    base, coef = tab.base.copy(), tab.coef.copy()
    w = scenario.window(space.hist[0][root])
    base[0, w, x] = cont0
    coef[:, 0, w, x] = 0.0
    return dataclasses.replace(scenario, minor_stopping_reward=AffineTable(base, coef)).validate()


def random_control_scenario(rng: np.random.Generator, n_minor: int = 2, n_major: int = 2, horizon: int = 2,
                            n_actions: int = 2, n_minor_actions: int = 2, feature: str | None = None,
                            coupling: float = 1.0):
    """Random control-variant scenario with affine coupling through one feature map."""
    from .control import ControlFeatures, ControlScenario
    grid = np.sort(rng.uniform(-1, 2, n_minor))
    feature = feature or rng.choice(["none", "cells", "moment", "action_cells"])
    feats = ControlFeatures(str(feature), grid, n_minor_actions)
    lo, hi = feats.box()
    K = feats.dim
    T, S, S0, A1 = horizon, n_minor, n_major, n_minor_actions
    p0 = 0.2 + rng.random(S0)
    q0 = 0.2 + rng.random(S)
    return ControlScenario(
        name="random-control", horizon=T, major_states=tuple(f"s{i}" for i in range(S0)), minor_grid=grid,
        actions=ActionSpace.finite(np.arange(n_actions, dtype=float)),
        minor_actions=ActionSpace.finite(np.arange(A1, dtype=float)), features=feats,
        major_kernel=_kernel(rng, (T, S0, n_actions, S0), lo, hi, coupling),
        minor_kernel=_kernel(rng, (T, S, S0, A1, S), lo, hi, coupling),
        major_running_reward=_reward(rng, (T, S0, n_actions), K, coupling),
        major_terminal_reward=_reward(rng, (S0,), K, coupling),
        minor_running_reward=_reward(rng, (T, S0, S, A1), K, coupling),
        minor_terminal_reward=_reward(rng, (S0, S), K, coupling),
        initial_major_law=p0 / p0.sum(), initial_minor_law=q0 / q0.sum(),
    ).validate()
