"""Minor players who choose controls instead of a stopping time.

The mean field is a per-(t, node) law over (minor state, minor action) for
t < T and over minor states at T.  Minor players are represented only by
their state-action flow v_t, a joint law over (node, x, a1).  The
equilibrium loop is shared with the stopping game (``equilibrium.iterate``);
conditioning divides v_t by its own node marginal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .equilibrium import (Certificate, EquilibriumReport, SolveConfig, Step, run_anneal, run_regularized)
from .errors import NonFiniteValue, ParseError, ShapeMismatch, ValidationError
from .flows import MajorMarginal
from .major import (MajorModel, MajorPolicy, initial_node_law, initial_value, major_reward, solve_regularized,
                    solve_unregularized)
from .meanfield import EPS_P
from .scenario import (BOX_TOL, FORMAT_VERSION, ActionSpace, AffineTable, FeatureOutOfRange, _check_kernel,
                       _check_law, _table, window_index)

ETA_SCALE = 1e-9


# --------------------------------------------------------------------------
# scenario
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlFeatures:
    """Features of a state-action law nu (S, A1), or of a state law at T.

    kinds: ``none``, ``cells`` (state masses), ``moment`` (state first
    moment), ``action_cells`` (action masses; zero at T, where no action is
    taken).
    """

    kind: str
    grid: np.ndarray
    n_actions: int

    def __post_init__(self):
        if self.kind not in ("none", "cells", "moment", "action_cells"):
            raise ValidationError(f"unknown control feature kind {self.kind!r}")

    @property
    def dim(self) -> int:
        if self.kind == "none":
            return 0
        if self.kind == "cells":
            return int(self.grid.shape[0])
        if self.kind == "action_cells":
            return self.n_actions
        return 1 if self.grid.ndim == 1 else int(self.grid.shape[1])

    def box(self):
        k = self.dim
        if self.kind != "moment":
            return np.zeros(k), np.ones(k)
        g = self.grid.reshape(self.grid.shape[0], -1)
        return np.minimum(0.0, g.min(axis=0)), np.maximum(0.0, g.max(axis=0))

    def __call__(self, nu: np.ndarray, terminal: bool) -> np.ndarray:
        """nu is (n, S, A1) before T and (n, S) at T."""
        n = nu.shape[0]
        if self.kind == "none":
            return np.zeros((n, 0))
        if self.kind == "action_cells":
            return np.zeros((n, self.n_actions)) if terminal else nu.sum(axis=1)
        state = nu if terminal else nu.sum(axis=2)
        if self.kind == "cells":
            return state.copy()
        return state @ self.grid.reshape(self.grid.shape[0], -1)


@dataclass(frozen=True, eq=False)
class ControlScenario:
    """Index conventions (w = path-window index):

    major_kernel          [t][w][a][x0']
    minor_kernel          [t][x][w][a1][x']
    major_running_reward  [t][x0][a]
    major_terminal_reward [x0]
    minor_running_reward  [t][w][x][a1]
    minor_terminal_reward [w][x]
    """

    name: str
    horizon: int
    major_states: tuple
    minor_grid: np.ndarray
    actions: ActionSpace
    minor_actions: ActionSpace
    features: ControlFeatures
    major_kernel: AffineTable
    minor_kernel: AffineTable
    major_running_reward: AffineTable
    major_terminal_reward: AffineTable
    minor_running_reward: AffineTable
    minor_terminal_reward: AffineTable
    initial_major_law: np.ndarray
    initial_minor_law: np.ndarray
    path_window: int = 1
    description: str = ""
    callbacks: Mapping = field(default_factory=dict)
    stopping_mode: bool = False
    absorbing: str | None = None

    n_major = property(lambda self: len(self.major_states))
    n_minor = property(lambda self: int(self.minor_grid.shape[0]))
    n_actions = property(lambda self: self.actions.size)
    n_minor_actions = property(lambda self: self.minor_actions.size)
    n_windows = property(lambda self: self.n_major ** self.path_window)

    def window(self, history) -> int:
        return window_index(history, self.path_window, self.n_major)

    def _windows(self, hist):
        return np.array([self.window(h) for h in hist], dtype=int)

    def feats(self, nu, terminal=False):
        f = self.features(nu, terminal)
        if f.size:
            lo, hi = self.features.box()
            if np.any(f < lo - BOX_TOL) or np.any(f > hi + BOX_TOL):
                raise FeatureOutOfRange("mean-field features outside the declared box")
        return f

    def major_kernel_rows(self, t, hist, nu):
        w = self._windows(hist)
        return self.major_kernel.at((np.full(w.size, t), w), self.feats(nu))

    def major_running(self, t, hist, nu):
        s = hist[:, -1]
        return self.major_running_reward.at((np.full(s.size, t), s), self.feats(nu))

    def major_terminal(self, hist, nu_T):
        return self.major_terminal_reward.at((hist[:, -1],), self.feats(nu_T, terminal=True))

    def minor_kernel_rows(self, t, hist, nu):
        """(n, S, A1, S)."""
        w = self._windows(hist)
        n, S = w.size, self.n_minor
        f = np.repeat(self.feats(nu), S, axis=0)
        idx = (np.full(n * S, t), np.tile(np.arange(S), n), np.repeat(w, S))
        return self.minor_kernel.at(idx, f).reshape(n, S, self.n_minor_actions, S)

    def minor_running(self, t, hist, nu):
        """(n, S, A1)."""
        w = self._windows(hist)
        return self.minor_running_reward.at((np.full(w.size, t), w), self.feats(nu))

    def minor_terminal(self, hist, nu_T):
        w = self._windows(hist)
        return self.minor_terminal_reward.at((w,), self.feats(nu_T, terminal=True))

    def reward_bound(self) -> float:
        lo, hi = self.features.box()
        best = 0.0
        for tab in (self.major_running_reward, self.major_terminal_reward,
                    self.minor_running_reward, self.minor_terminal_reward):
            spread = np.zeros_like(tab.base)
            for k in range(tab.coef.shape[0]):
                spread = spread + np.maximum(np.abs(lo[k] * tab.coef[k]), np.abs(hi[k] * tab.coef[k]))
            best = max(best, float(np.max(np.abs(tab.base) + spread, initial=0.0)))
        return best

    def validate(self) -> "ControlScenario":
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        _check_law(self.initial_major_law, self.n_major, "initial_major_law")
        _check_law(self.initial_minor_law, self.n_minor, "initial_minor_law")
        lo, hi = self.features.box()
        _check_kernel(self.major_kernel, lo, hi, "major_kernel", ("t", "w", "a"))
        _check_kernel(self.minor_kernel, lo, hi, "minor_kernel", ("t", "x", "w", "a1"))
        return self

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION, "variant": "control", "name": self.name,
            "description": self.description, "horizon": self.horizon,
            "major_states": list(self.major_states), "minor_grid": self.minor_grid.tolist(),
            "actions": self.actions.to_json(), "minor_actions": self.minor_actions.to_json(),
            "features": {"kind": self.features.kind}, "path_window": self.path_window,
            "major_kernel": self.major_kernel.to_json(), "minor_kernel": self.minor_kernel.to_json(),
            "major_running_reward": self.major_running_reward.to_json(),
            "major_terminal_reward": self.major_terminal_reward.to_json(),
            "minor_running_reward": self.minor_running_reward.to_json(),
            "minor_terminal_reward": self.minor_terminal_reward.to_json(),
            "initial_major_law": self.initial_major_law.tolist(),
            "initial_minor_law": self.initial_minor_law.tolist(),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "ControlScenario":
        if d.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported format_version {d.get('format_version')!r}")
        try:
            T = int(d["horizon"])
            states = tuple(str(s) for s in d["major_states"])
            grid = np.asarray(d["minor_grid"], dtype=float)
            acts = ActionSpace.from_json(d["actions"])
            macts = ActionSpace.from_json(d["minor_actions"])
            feats = ControlFeatures(d.get("features", {"kind": "none"})["kind"], grid, macts.size)
            kwin = int(d.get("path_window", 1))
            S0, S, A, A1, K = len(states), grid.shape[0], acts.size, macts.size, feats.dim
            W = S0 ** kwin
            tabs = dict(
                major_kernel=_table(d["major_kernel"], (T, W, A, S0), K, "major_kernel"),
                minor_kernel=_table(d["minor_kernel"], (T, S, W, A1, S), K, "minor_kernel"),
                major_running_reward=_table(d["major_running_reward"], (T, S0, A), K, "major_running_reward"),
                major_terminal_reward=_table(d["major_terminal_reward"], (S0,), K, "major_terminal_reward"),
                minor_running_reward=_table(d["minor_running_reward"], (T, W, S, A1), K, "minor_running_reward"),
                minor_terminal_reward=_table(d["minor_terminal_reward"], (W, S), K, "minor_terminal_reward"),
            )
            p0 = np.asarray(d["initial_major_law"], dtype=float)
            q0 = np.asarray(d["initial_minor_law"], dtype=float)
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ParseError(str(exc)) from None
        return cls(name=str(d.get("name", "unnamed")), horizon=T, major_states=states, minor_grid=grid,
                   actions=acts, minor_actions=macts, features=feats, initial_major_law=p0,
                   initial_minor_law=q0, path_window=kwin, description=str(d.get("description", "")),
                   **tabs).validate()


# --------------------------------------------------------------------------
# flows
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ControlMeanField:
    """mu[t]: (n_t, S, A1) conditional state-action laws for t < T, (n_T, S) at T."""

    mu: list

    def blend(self, other: "ControlMeanField", theta: float) -> "ControlMeanField":
        return ControlMeanField([(1 - theta) * a + theta * b for a, b in zip(self.mu, other.mu)])

    def copy(self) -> "ControlMeanField":
        return ControlMeanField([a.copy() for a in self.mu])

    @classmethod
    def uniform(cls, space, S, A1):
        T = space.horizon
        return cls([np.full((space.size(t), S, A1), 1.0 / (S * A1)) for t in range(T)]
                   + [np.full((space.size(T), S), 1.0 / S)])

    @classmethod
    def random(cls, space, S, A1, rng):
        def draw(shape):
            x = rng.random(shape)
            return x / x.reshape(shape[0], -1).sum(axis=1).reshape((-1,) + (1,) * (len(shape) - 1))
        T = space.horizon
        return cls([draw((space.size(t), S, A1)) for t in range(T)] + [draw((space.size(T), S))])


@dataclass(eq=False)
class StateActionFlow:
    """v[t]: joint law over (node, x, a1) for t < T, over (node, x) at T; each sums to 1."""

    v: list

    def node_marginal(self, t: int) -> np.ndarray:
        return self.v[t].reshape(self.v[t].shape[0], -1).sum(axis=1)

    def state_marginal(self, t: int) -> np.ndarray:
        return self.v[t] if self.v[t].ndim == 2 else self.v[t].sum(axis=2)

    def mass_error(self) -> float:
        return max(abs(float(a.sum()) - 1.0) for a in self.v)


def control_flow_distance(a: ControlMeanField, b: ControlMeanField) -> float:
    worst = 0.0
    if len(a.mu) != len(b.mu):
        raise ShapeMismatch("flows have different horizons")
    for x, y in zip(a.mu, b.mu):
        if x.shape != y.shape:
            raise ShapeMismatch(f"{x.shape} vs {y.shape}")
        if x.size:
            worst = max(worst, float(np.abs(x - y).reshape(x.shape[0], -1).sum(axis=1).max()))
    return worst


# --------------------------------------------------------------------------
# one-step data
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ControlModel:
    major: MajorModel
    kernel: list   # (n_t, S, A1, S)
    q: list        # (n_t, S0) major next-state law under alpha0
    f: list        # (n_t, S, A1)
    g: np.ndarray  # (n_T, S)
    start: np.ndarray
    child: list
    sizes: tuple

    @property
    def horizon(self):
        return len(self.f)


def control_major_model(cs: ControlScenario, space, mf: ControlMeanField) -> MajorModel:
    T = cs.horizon
    kernel = [cs.major_kernel_rows(t, space.hist[t], mf.mu[t]) for t in range(T)]
    running = [cs.major_running(t, space.hist[t], mf.mu[t]) for t in range(T)]
    terminal = cs.major_terminal(space.hist[T], mf.mu[T])
    for arr in running + [terminal]:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue("major rewards contain non-finite entries")
    return MajorModel(kernel, running, terminal, space.child)


def control_model(cs, space, alpha0: MajorPolicy, mf: ControlMeanField, major: MajorModel | None = None):
    major = major or control_major_model(cs, space, mf)
    T = cs.horizon
    kernel = [cs.minor_kernel_rows(t, space.hist[t], mf.mu[t]) for t in range(T)]
    q = [major.next_probs(t, alpha0.probs(t)) for t in range(T)]
    f = [cs.minor_running(t, space.hist[t], mf.mu[t]) for t in range(T)]
    g = cs.minor_terminal(space.hist[T], mf.mu[T])
    start = initial_node_law(cs, space)[:, None] * cs.initial_minor_law[None, :]
    return ControlModel(major, kernel, q, f, g, start, space.child, space.sizes)


def _mixed_next(cm: ControlModel, t: int, v_next: np.ndarray) -> np.ndarray:
    """(n_t, S) expectation of v_next(x', u') over the major move, per next minor state."""
    ch = cm.child[t]
    nxt = np.where((ch >= 0)[:, :, None], v_next[np.maximum(ch, 0)], 0.0)
    return np.einsum("us,usy->uy", cm.q[t], nxt)


def q_values(cm: ControlModel, t: int, v_next: np.ndarray) -> np.ndarray:
    return cm.f[t] + np.einsum("uxay,uy->uxa", cm.kernel[t], _mixed_next(cm, t, v_next))


def bellman_backup(cs, space, alpha0: MajorPolicy, mf: ControlMeanField, v_next: np.ndarray, t: int,
                   model: ControlModel | None = None) -> np.ndarray:
    """(T_t v)(x, u) = max_a { f + E v(x', u') }."""
    cm = model or control_model(cs, space, alpha0, mf)
    return q_values(cm, t, v_next).max(axis=2)


def optimal_values(cm: ControlModel):
    T = cm.horizon
    V = [None] * (T + 1)
    Q = [None] * T
    V[T] = cm.g.copy()
    for t in range(T - 1, -1, -1):
        Q[t] = q_values(cm, t, V[t + 1])
        V[t] = Q[t].max(axis=2)
    return V, Q


def _eta(V, eta):
    if eta is not None:
        return eta
    return ETA_SCALE * (1.0 + max(float(np.max(np.abs(v), initial=0.0)) for v in V))


def greedy_policy(Q: np.ndarray, eta: float, tie_q: float | None) -> np.ndarray:
    """(n, S, A1) action law on the maximizers.

    With tie_q None ties are split evenly; otherwise the last maximizer gets
    weight tie_q and the first 1 - tie_q.
    """
    best = Q >= Q.max(axis=2, keepdims=True) - eta
    if tie_q is None:
        return best / best.sum(axis=2, keepdims=True)
    A1 = Q.shape[2]
    idx = np.arange(A1)
    first = np.where(best, idx, A1).min(axis=2)
    last = np.where(best, idx, -1).max(axis=2)
    pol = np.zeros(Q.shape)
    n, S = Q.shape[:2]
    uu, xx = np.meshgrid(np.arange(n), np.arange(S), indexing="ij")
    single = first == last
    pol[uu, xx, first] += np.where(single, 1.0, 1.0 - tie_q)
    pol[uu, xx, last] += np.where(single, 0.0, tie_q)
    return pol


def consistent_flow_step(cm: ControlModel, t: int, v_t: np.ndarray, policy_next: np.ndarray | None):
    """Push the joint state-action law one step and extend it by the next policy."""
    moved = np.einsum("uxa,uxay->uy", v_t, cm.kernel[t])
    out = np.zeros((cm.sizes[t + 1], moved.shape[1]))
    ch = cm.child[t]
    for s in range(ch.shape[1]):
        ok = ch[:, s] >= 0
        out[ch[ok, s]] += moved[ok] * cm.q[t][ok, s][:, None]
    if policy_next is None:
        return out
    return out[:, :, None] * policy_next


def forward_flow(cm: ControlModel, policy: list) -> StateActionFlow:
    v = [cm.start[:, :, None] * policy[0]]
    for t in range(cm.horizon):
        v.append(consistent_flow_step(cm, t, v[t], policy[t + 1] if t + 1 < cm.horizon else None))
    return StateActionFlow(v)


@dataclass(eq=False)
class ControlBestResponse:
    flow: StateActionFlow
    values: list
    q: list
    policy: list
    total: float
    eta: float


def minor_control_best_response(cs, space, alpha0: MajorPolicy, mf: ControlMeanField,
                                tie_q: float | None = None, eta: float | None = None,
                                model: ControlModel | None = None) -> ControlBestResponse:
    cm = model or control_model(cs, space, alpha0, mf)
    V, Q = optimal_values(cm)
    eta = _eta(V, eta)
    policy = [greedy_policy(q, eta, tie_q) for q in Q]
    flow = forward_flow(cm, policy)
    return ControlBestResponse(flow, V, Q, policy, float((cm.start * V[0]).sum()), eta)


def control_reward(flow: StateActionFlow, cm: ControlModel) -> float:
    total = sum(float((f * v).sum()) for f, v in zip(cm.f, flow.v[:-1]))
    return total + float((cm.g * flow.v[-1]).sum())


def dynamics_residual(flow: StateActionFlow, cm: ControlModel) -> float:
    """Forward-identity residual: state marginals must follow the controlled chain."""
    worst = float(np.max(np.abs(flow.state_marginal(0) - cm.start)))
    for t in range(cm.horizon):
        pushed = consistent_flow_step(cm, t, flow.v[t], None)
        worst = max(worst, float(np.max(np.abs(flow.state_marginal(t + 1) - pushed), initial=0.0)))
    return worst


def bellman_slack_mass(flow: StateActionFlow, V: list, Q: list, eta: float) -> float:
    """Total flow mass on actions whose Bellman slack exceeds eta."""
    total = 0.0
    for t, q in enumerate(Q):
        slack = V[t][:, :, None] - q
        total += float(flow.v[t][slack > eta].sum())
    return total


def condition(flow: StateActionFlow, fallback: ControlMeanField, eps_p: float = EPS_P) -> ControlMeanField:
    """Divide each v_t by its own node marginal; keep the fallback on null nodes."""
    out = []
    for t, v in enumerate(flow.v):
        pt = flow.node_marginal(t)
        ok = pt > eps_p
        res = np.array(fallback.mu[t], dtype=float, copy=True)
        res[ok] = v[ok] / pt[ok].reshape((-1,) + (1,) * (v.ndim - 1))
        out.append(res)
    return ControlMeanField(out)


def control_consistency(mf: ControlMeanField, flow: StateActionFlow, eps_p: float = EPS_P) -> float:
    worst = 0.0
    for t, v in enumerate(flow.v):
        pt = flow.node_marginal(t)
        ok = pt > eps_p
        if ok.any():
            pred = mf.mu[t][ok] * pt[ok].reshape((-1,) + (1,) * (v.ndim - 1))
            worst = max(worst, float(np.abs(v[ok] - pred).reshape(int(ok.sum()), -1).sum(axis=1).max()))
    return worst


# --------------------------------------------------------------------------
# equilibrium
# --------------------------------------------------------------------------

class ControlGame:
    variant = "control"

    def __init__(self, cs: ControlScenario, space, tie_q: float | None = None):
        self.scenario = cs
        self.space = space
        self.tie_q = tie_q

    def initial(self, config: SolveConfig) -> ControlMeanField:
        S, A1 = self.scenario.n_minor, self.scenario.n_minor_actions
        if config.seed is None:
            return ControlMeanField.uniform(self.space, S, A1)
        return ControlMeanField.random(self.space, S, A1, np.random.default_rng(config.seed))

    def step(self, z: ControlMeanField, lam: float, config: SolveConfig) -> Step:
        cs, sp = self.scenario, self.space
        major = control_major_model(cs, sp, z)
        alpha, V = solve_regularized(cs, sp, None, lam, model=major)
        cm = control_model(cs, sp, alpha, z, major=major)
        br = minor_control_best_response(cs, sp, alpha, z, tie_q=self.tie_q, eta=config.eta, model=cm)
        z_new = condition(br.flow, z)
        p = MajorMarginal([br.flow.node_marginal(t) for t in range(cs.horizon + 1)])
        major_gap = initial_value(cs, sp, V) - major_reward(cs, sp, alpha, None, lam, model=major)
        minor_gap = br.total - control_reward(br.flow, cm)
        return Step(z_new, alpha, br.flow, p, V, br.values, major_gap, minor_gap)

    def distance(self, a, b):
        return control_flow_distance(a, b)

    def blend(self, z, z_new, theta):
        return z.blend(z_new, theta)

    def consistency(self, z, step):
        return control_consistency(z, step.flow)

    def certify(self, report, eps, eps_support=1e-3, eta=None):
        return verify_control(report, self.scenario, self.space, eps, eps_support=eps_support, eta=eta)


def solve_control_equilibrium(cs: ControlScenario, space, config: SolveConfig, init=None,
                              tie_q: float | None = None) -> EquilibriumReport:
    """Regularized fixed point, or the annealed relaxed one when config.anneal is set."""
    game = ControlGame(cs, space, tie_q)
    if config.anneal is not None:
        return run_anneal(game, config, init)
    return run_regularized(game, config, init)


def verify_control(report: EquilibriumReport, cs: ControlScenario, space, eps: float,
                   eps_support: float = 1e-3, eta: float | None = None) -> Certificate:
    """major gap, Bellman-slack mass, forward-identity residual, conditioning residual."""
    mf, alpha, flow = report.mf, report.alpha, report.flow
    T = cs.horizon
    if len(mf.mu) != T + 1 or len(flow.v) != T + 1 or len(alpha.density) != T:
        raise ShapeMismatch("report horizon does not match the scenario")
    for t in range(T + 1):
        want = (space.size(t), cs.n_minor) + ((cs.n_minor_actions,) if t < T else ())
        if mf.mu[t].shape != want or flow.v[t].shape != want:
            raise ShapeMismatch(f"slice {t} does not have shape {want}")
    major = control_major_model(cs, space, mf)
    values, passed = {}, {}
    if report.mode == "regularized":
        _, V0 = solve_regularized(cs, space, None, report.lam, model=major)
        values["major"] = initial_value(cs, space, V0) - major_reward(cs, space, alpha, None, report.lam,
                                                                      model=major)
    else:
        V0, argmax = solve_unregularized(cs, space, None, eta=eta, model=major)
        values["major"] = initial_value(cs, space, V0) - major_reward(cs, space, alpha, None, 0.0, model=major)
    cm = control_model(cs, space, alpha, mf, major=major)
    V, Q = optimal_values(cm)
    values["bellman"] = bellman_slack_mass(flow, V, Q, _eta(V, eta))
    values["dynamics"] = dynamics_residual(flow, cm)
    values["consistency"] = control_consistency(mf, flow)
    for k in list(values):
        passed[k] = abs(values[k]) <= eps
    if report.mode != "regularized":
        worst = 0.0
        for t in range(T):
            live = flow.node_marginal(t) > EPS_P
            if live.any():
                worst = max(worst, float(argmax.outside_mass(alpha, t)[live].max()))
        values["support"] = worst
        passed["support"] = worst <= eps_support
    return Certificate(eps, values, passed)


def family_oracle(cs: ControlScenario, space, lam: float, grid) -> dict:
    """Grid search over mean fields generated by 'play action 1 with probability c everywhere'.

    For each c the family member mu_c is the conditioned flow of that policy;
    its fixed-point residual is the distance between mu_c and the conditioned
    best response to (alpha^lam(mu_c), mu_c).  Needs two minor actions.
    """
    if cs.n_minor_actions != 2:
        raise ValidationError("the one-parameter family needs exactly two minor actions")
    T, S = cs.horizon, cs.n_minor
    out = {"c": [], "residual": [], "mean_field": []}
    for c in grid:
        pol = [np.broadcast_to([1.0 - c, c], (space.size(t), S, 2)).copy() for t in range(T)]
        base = ControlMeanField.uniform(space, S, 2)
        # the family member depends on the mean field only through the kernels; iterate to its own flow
        mu_c = base
        for _ in range(T + 2):
            major = control_major_model(cs, space, mu_c)
            alpha, _ = solve_regularized(cs, space, None, lam, model=major)
            cm = control_model(cs, space, alpha, mu_c, major=major)
            mu_c = condition(forward_flow(cm, pol), mu_c)
        major = control_major_model(cs, space, mu_c)
        alpha, _ = solve_regularized(cs, space, None, lam, model=major)
        cm = control_model(cs, space, alpha, mu_c, major=major)
        br = minor_control_best_response(cs, space, alpha, mu_c, model=cm)
        resid = control_flow_distance(condition(br.flow, mu_c), mu_c)
        out["c"].append(float(c))
        out["residual"].append(resid)
        out["mean_field"].append(mu_c)
    i = int(np.argmin(out["residual"]))
    out["best"] = i
    return out


# --------------------------------------------------------------------------
# packaged instances
# --------------------------------------------------------------------------

def _tab(base, k):
    base = np.asarray(base, dtype=float)
    return AffineTable(base, np.zeros((k,) + base.shape))


def control_toy() -> ControlScenario:
    """Two regimes, two minor states and actions; all mean-field coefficients zero."""
    T, S0, A, S, A1, K = 2, 2, 2, 2, 2, 2
    LOW, HIGH = 0, 1
    grid = np.array([0.0, 1.0])
    kern = np.zeros((T, S0, A, S0))
    kern[:, :, 0] = [0.6, 0.4]
    kern[:, :, 1] = [0.3, 0.7]
    run = np.zeros((T, S0, A))
    run[:, HIGH, :] = 0.5
    run[:, :, 1] -= 0.2
    mk = np.zeros((T, S, S0, A1, S))
    for x in range(S):
        mk[:, x, :, 0, x] = 1.0
        mk[:, x, :, 1, 1 - x] = 0.8
        mk[:, x, :, 1, x] = 0.2
    mrun = np.zeros((T, S0, S, A1))
    mrun[:, LOW, 1, :] = 0.3
    mrun[:, HIGH, 1, :] = 0.6
    mrun[..., 1] -= 0.1
    mterm = np.array([[0.0, 0.5], [0.0, 1.0]])
    return ControlScenario(
        name="control-toy", description="minor controls, mean-field coefficients all zero",
        horizon=T, major_states=("low", "high"), minor_grid=grid, actions=ActionSpace.finite([0, 1]),
        minor_actions=ActionSpace.finite([0, 1]), features=ControlFeatures("action_cells", grid, A1),
        major_kernel=_tab(kern, K), minor_kernel=_tab(mk, K), major_running_reward=_tab(run, K),
        major_terminal_reward=_tab([0.0, 1.0], K), minor_running_reward=_tab(mrun, K),
        minor_terminal_reward=_tab(mterm, K), initial_major_law=np.array([0.5, 0.5]),
        initial_minor_law=np.array([0.5, 0.5]),
    ).validate()


def control_toy_coupled() -> ControlScenario:
    """One step; the major's chance of reaching 'high' is (a + c) / 2, c = share of minors playing 1.

    A minor's action picks its next state; state 1 pays 1 if the major ends
    high, state 0 pays 0.4 regardless.
    """
    T, S0, A, S, A1, K = 1, 2, 2, 2, 2, 2
    LOW, HIGH = 0, 1
    grid = np.array([0.0, 1.0])
    kern = AffineTable(np.zeros((T, S0, A, S0)), np.zeros((K, T, S0, A, S0)))
    kern.base[:, :, 0] = [1.0, 0.0]
    kern.base[:, :, 1] = [0.5, 0.5]
    kern.coef[1, ..., HIGH] = 0.5
    kern.coef[1, ..., LOW] = -0.5
    run = np.zeros((T, S0, A))
    run[..., 1] = -0.3
    mk = np.zeros((T, S, S0, A1, S))
    mk[:, :, :, 0, 0] = 1.0
    mk[:, :, :, 1, 1] = 1.0
    mterm = np.array([[0.4, 0.0], [0.4, 1.0]])
    return ControlScenario(
        name="control-toy-coupled", description="one coupling feature: share of minors playing action 1",
        horizon=T, major_states=("low", "high"), minor_grid=grid, actions=ActionSpace.finite([0, 1]),
        minor_actions=ActionSpace.finite([0, 1]), features=ControlFeatures("action_cells", grid, A1),
        major_kernel=kern, minor_kernel=_tab(mk, K), major_running_reward=_tab(run, K),
        major_terminal_reward=_tab([0.0, 1.0], K), minor_running_reward=_tab(np.zeros((T, S0, S, A1)), K),
        minor_terminal_reward=_tab(mterm, K), initial_major_law=np.array([1.0, 0.0]),
        initial_minor_law=np.array([0.5, 0.5]),
    ).validate()
