"""Packaged scenarios.

paper-ex-2.1
    The three-path example whose relaxed-equilibrium set is not convex.  The
    major player is active until it exits (stops); the minor player is
    rewarded 1/2 for stopping first, 1 for stopping second if the major exited
    exactly then, and 1/3 at the end.  Information reaches the minor player
    one period after the major player's decision, so the minor clock runs one
    step behind: the minor player's first real decision is at t=1 and its last
    payoff at t=3.  The major horizon therefore has three steps, the last of
    which forces exit, so exactly three terminal histories remain.
decoupled-toy
    Two-regime economy with zero mean-field coefficients.
bankrun-toy
    The major's chance of an up move is (a + m(S)) / 2, with effort a on a
    five-cell grid over [0, 1] and m(S) the mass of depositors still in the bank.
control-toy, control-toy-coupled
    Minor players choose controls; see ``majorminor.control``.
"""
from __future__ import annotations

import numpy as np

from .scenario import ActionSpace, AffineTable, FeatureMap, Scenario


def _tab(base, k=0):
    base = np.asarray(base, dtype=float)
    return AffineTable(base, np.zeros((k,) + base.shape))


def three_path_example() -> Scenario:
    T, S0, A, W = 3, 2, 2, 4
    ACT, EXIT = 0, 1

    def win(prev, cur):
        return prev * S0 + cur

    kern = np.zeros((T, W, A, S0))
    for t in range(T):
        for prev in range(S0):
            kern[t, win(prev, EXIT), :, EXIT] = 1.0
            w = win(prev, ACT)
            if t < T - 1:
                kern[t, w, 0, ACT] = 1.0
                kern[t, w, 1, EXIT] = 1.0
            else:
                kern[t, w, :, EXIT] = 1.0
    run = np.zeros((T, S0, A))
    run[1, ACT, 1] = 1.0   # exit after one period of activity
    run[2, ACT, :] = 1.0   # still active at the last step
    stop = np.zeros((T + 1, W, 1))
    stop[1] = 0.5
    stop[2, win(ACT, EXIT)] = 1.0  # major exited exactly one step earlier
    stop[3] = 1.0 / 3.0
    return Scenario(
        name="paper-ex-2.1",
        description="three major paths; the set of relaxed equilibria is not convex",
        horizon=T, major_states=("active", "exit"), minor_grid=np.array([0.0]),
        actions=ActionSpace.finite([0, 1]), features=FeatureMap("none", np.array([0.0])),
        major_kernel=_tab(kern), minor_kernel=_tab(np.ones((T, 1, W, 1))),
        major_running_reward=_tab(run), major_terminal_reward=_tab(np.zeros(S0)),
        minor_continuation_reward=_tab(np.zeros((T, W, 1))), minor_stopping_reward=_tab(stop),
        initial_major_law=np.array([1.0, 0.0]), initial_minor_law=np.array([1.0]),
        path_window=2, stopping_mode=True, absorbing="exit",
    ).validate()


def decoupled_toy() -> Scenario:
    T, S0, A, S = 2, 2, 2, 3
    grid = np.array([0.0, 1.0, 2.0])
    kern = np.zeros((T, S0, A, S0))
    kern[:, :, 0] = [0.7, 0.3]
    kern[:, :, 1] = [0.2, 0.8]
    run = np.zeros((T, S0, A))
    run[:, 1, :] = 1.0
    run[:, :, 1] -= 0.3
    walk = np.zeros((T, S, S0, S))
    for x in range(S):
        up, down = min(x + 1, S - 1), max(x - 1, 0)
        walk[:, x, 1, up] += 0.6
        walk[:, x, 1, down] += 0.4
        walk[:, x, 0, up] += 0.3
        walk[:, x, 0, down] += 0.7
    cont = np.full((T, S0, S), 0.05)
    stop = np.broadcast_to(grid * 0.5, (T + 1, S0, S)).copy()
    stop[:, 1, :] += 0.2
    k = 1
    return Scenario(
        name="decoupled-toy", description="two regimes, mean-field coefficients all zero",
        horizon=T, major_states=("low", "high"), minor_grid=grid,
        actions=ActionSpace.finite([0, 1]), features=FeatureMap("mass", grid),
        major_kernel=_tab(kern, k), minor_kernel=_tab(walk, k),
        major_running_reward=_tab(run, k), major_terminal_reward=_tab([0.0, 1.0], k),
        minor_continuation_reward=_tab(cont, k), minor_stopping_reward=_tab(stop, k),
        initial_major_law=np.array([0.5, 0.5]), initial_minor_law=np.full(S, 1.0 / S),
    ).validate()


def bankrun_toy() -> Scenario:
    T, S0, S = 3, 2, 3
    acts = ActionSpace.grid([0.0], [1.0], [5])
    a = acts.points[:, 0]
    A = a.size
    grid = np.array([0.0, 1.0, 2.0])
    DOWN, UP = 0, 1
    kern = AffineTable(np.zeros((T, S0, A, S0)), np.zeros((1, T, S0, A, S0)))
    kern.base[..., UP] = a / 2
    kern.base[..., DOWN] = 1 - a / 2
    kern.coef[0, ..., UP] = 0.5
    kern.coef[0, ..., DOWN] = -0.5
    run = AffineTable(np.zeros((T, S0, A)), np.zeros((1, T, S0, A)))
    run.base[:] = -0.5 * a ** 2
    run.base[:, UP, :] += 0.25
    run.coef[0] = 0.5  # deposits still in the bank pay the manager
    term = _tab([0.0, 1.0], 1)
    walk = np.zeros((T, S, S0, S))
    for x in range(S):
        up, down = min(x + 1, S - 1), max(x - 1, 0)
        walk[:, x, UP, up] += 0.5
        walk[:, x, UP, x] += 0.5
        walk[:, x, DOWN, down] += 0.5
        walk[:, x, DOWN, x] += 0.5
    cont = AffineTable(np.full((T, S0, S), 0.02), np.zeros((1, T, S0, S)))
    stop = AffineTable(np.zeros((T + 1, S0, S)), np.zeros((1, T + 1, S0, S)))
    stop.base[:] = 0.4 * grid
    stop.base[:, DOWN, :] -= 0.1
    stop.coef[0] = 0.2  # withdrawing is worth more while the bank is still funded
    return Scenario(
        name="bankrun-toy", description="up-move chance (a + m(S)) / 2 with m(S) the active depositor mass",
        horizon=T, major_states=("down", "up"), minor_grid=grid, actions=acts,
        features=FeatureMap("mass", grid), major_kernel=kern, minor_kernel=_tab(walk, 1),
        major_running_reward=run, major_terminal_reward=term,
        minor_continuation_reward=cont, minor_stopping_reward=stop,
        initial_major_law=np.array([0.5, 0.5]), initial_minor_law=np.array([0.2, 0.5, 0.3]),
    ).validate()


def _registry():
    from .control import control_toy, control_toy_coupled
    return {
        "paper-ex-2.1": three_path_example,
        "decoupled-toy": decoupled_toy,
        "bankrun-toy": bankrun_toy,
        "control-toy": control_toy,
        "control-toy-coupled": control_toy_coupled,
    }


def builtin_names() -> list:
    return list(_registry())


def get_builtin(name: str):
    reg = _registry()
    if name not in reg:
        raise FileNotFoundError(f"scenario not found: builtin:{name} (known: {', '.join(reg)})")
    return reg[name]()


def builtin_scenarios() -> list:
    """[(name, scenario)] for every packaged instance."""
    return [(name, make()) for name, make in _registry().items()]
