"""Major player: entropy-regularized and plain backward induction on the path tree."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NonFiniteValue, ShapeMismatch, ValidationError
from .flows import MeanField
from .scenario import ActionSpace

ETA_SCALE = 1e-9


@dataclass(eq=False)
class MajorPolicy:
    """density[t] (n_t, A): action densities w.r.t. the action weights.

    For finite action sets the weights are 1 and densities are plain
    probabilities.  ``probs(t)`` always returns probability masses.
    """

    actions: ActionSpace
    density: list

    def probs(self, t: int) -> np.ndarray:
        return self.density[t] * self.actions.weights

    def normalization_error(self) -> float:
        return max((float(np.max(np.abs(self.probs(t).sum(axis=1) - 1.0), initial=0.0))
                    for t in range(len(self.density))), default=0.0)

    def validate(self, tol: float = 1e-10) -> "MajorPolicy":
        for t, d in enumerate(self.density):
            if d.ndim != 2 or d.shape[1] != self.actions.size:
                raise ShapeMismatch(f"policy slice {t} has shape {d.shape}")
            if np.any(d < 0) or not np.all(np.isfinite(d)):
                raise ValidationError(f"policy slice {t} has negative or non-finite weights")
        if self.normalization_error() > tol:
            raise ValidationError("policy weights do not integrate to 1")
        return self

    @classmethod
    def uniform(cls, space, actions: ActionSpace) -> "MajorPolicy":
        d = 1.0 / actions.volume
        return cls(actions, [np.full((space.size(t), actions.size), d) for t in range(space.horizon)])

    @classmethod
    def from_choices(cls, space, actions: ActionSpace, choose) -> "MajorPolicy":
        """Point masses: ``choose(t, history) -> action index``."""
        dens = []
        for t in range(space.horizon):
            d = np.zeros((space.size(t), actions.size))
            for i, h in enumerate(space.hist[t]):
                a = choose(t, tuple(int(s) for s in h))
                d[i, a] = 1.0 / actions.weights[a]
            dens.append(d)
        return cls(actions, dens)


@dataclass(eq=False)
class MajorModel:
    """One-step data of the major problem at a fixed mean field.

    kernel[t]  (n_t, A, S0) next-state probabilities
    running[t] (n_t, A)     running rewards
    terminal   (n_T,)       terminal rewards
    """

    kernel: list
    running: list
    terminal: np.ndarray
    child: list

    def expect_next(self, t: int, v_next: np.ndarray) -> np.ndarray:
        """(n_t, A) expected next-step value under every action."""
        ch = self.child[t]
        vals = np.where(ch >= 0, v_next[np.maximum(ch, 0)], 0.0)
        return np.einsum("uas,us->ua", self.kernel[t], vals)

    def advantage(self, t: int, v_next: np.ndarray) -> np.ndarray:
        return self.running[t] + self.expect_next(t, v_next)

    def next_probs(self, t: int, probs: np.ndarray) -> np.ndarray:
        """(n_t, S0) next-state law when actions are drawn from ``probs``."""
        return np.einsum("ua,uas->us", probs, self.kernel[t])


def major_model(scenario, space, mf: MeanField) -> MajorModel:
    T = scenario.horizon
    kernel, running = [], []
    for t in range(T):
        kernel.append(scenario.major_kernel_rows(t, space.hist[t], mf.m[t]))
        running.append(scenario.major_running(t, space.hist[t], mf.m[t]))
    terminal = scenario.major_terminal(space.hist[T], mf.mu[T])
    for arr in running + [terminal]:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue("major rewards contain non-finite entries")
    return MajorModel(kernel, running, terminal, space.child)


def gibbs(adv: np.ndarray, lam: float, weights: np.ndarray):
    """Gibbs densities and soft values for advantages (n, A) at temperature lam."""
    z = adv / lam + np.log(weights)
    log_z = logsumexp(z, axis=1)
    dens = np.exp(adv / lam - log_z[:, None])
    return dens, lam * log_z


def solve_regularized(scenario, space, mf: MeanField, lam: float, model: MajorModel | None = None):
    """Soft backward induction.  Returns (policy, values) with values[t] (n_t,)."""
    if not lam > 0:
        raise ValueError("the regularized solver needs lambda > 0; use solve_unregularized for lambda = 0")
    model = model or major_model(scenario, space, mf)
    w = scenario.actions.weights
    T = scenario.horizon
    values = [None] * (T + 1)
    dens = [None] * T
    values[T] = model.terminal.copy()
    for t in range(T - 1, -1, -1):
        dens[t], values[t] = gibbs(model.advantage(t, values[t + 1]), lam, w)
    return MajorPolicy(scenario.actions, dens), values


@dataclass(eq=False)
class ArgmaxSets:
    """mask[t] (n_t, A): actions within eta of the best advantage."""

    mask: list
    advantage: list
    eta: float

    def outside_mass(self, policy: MajorPolicy, t: int) -> np.ndarray:
        """(n_t,) probability the policy puts on non-maximizing actions."""
        return np.where(self.mask[t], 0.0, policy.probs(t)).sum(axis=1)


def solve_unregularized(scenario, space, mf: MeanField, eta: float | None = None,
                        model: MajorModel | None = None):
    """Plain backward induction.  Returns (values, ArgmaxSets)."""
    model = model or major_model(scenario, space, mf)
    T = scenario.horizon
    values = [None] * (T + 1)
    adv = [None] * T
    values[T] = model.terminal.copy()
    for t in range(T - 1, -1, -1):
        adv[t] = model.advantage(t, values[t + 1])
        values[t] = adv[t].max(axis=1)
    if eta is None:
        eta = ETA_SCALE * (1.0 + max(float(np.max(np.abs(v), initial=0.0)) for v in values))
    mask = [a >= a.max(axis=1, keepdims=True) - eta for a in adv]
    return values, ArgmaxSets(mask, adv, eta)


def entropy(density, weights=None) -> np.ndarray:
    """-sum_i w_i v_i ln w_i over the last axis, with 0 ln 0 = 0."""
    d = np.asarray(density, dtype=float)
    v = np.ones(d.shape[-1]) if weights is None else np.asarray(weights, dtype=float)
    safe = np.where(d > 0, d, 1.0)
    return -(v * d * np.log(safe)).sum(axis=-1)


def initial_node_law(scenario, space) -> np.ndarray:
    return scenario.initial_major_law[space.hist[0][:, 0]]


def major_reward(scenario, space, policy: MajorPolicy, mf: MeanField, lam: float = 0.0,
                 model: MajorModel | None = None) -> float:
    """Expected total (optionally entropy-regularized) reward by forward rollout."""
    model = model or major_model(scenario, space, mf)
    w = scenario.actions.weights
    p = initial_node_law(scenario, space)
    total = 0.0
    for t in range(scenario.horizon):
        pr = policy.probs(t)
        gain = (pr * model.running[t]).sum(axis=1)
        if lam:
            gain = gain + lam * entropy(policy.density[t], w)
        total += float(p @ gain)
        p = _push(p, model.next_probs(t, pr), space.child[t], space.size(t + 1))
    return total + float(p @ model.terminal)


def _push(p, q, child, n_next):
    out = np.zeros(n_next)
    mask = child >= 0
    np.add.at(out, child[mask], (p[:, None] * q)[mask])
    return out


def dpp_residual(scenario, space, policy: MajorPolicy, values, lam: float, model: MajorModel) -> float:
    """max |V(t,u) - [sum_a alpha (f + E V(t+1)) + lam H(alpha)]| over all nodes."""
    worst = 0.0
    for t in range(scenario.horizon):
        rhs = (policy.probs(t) * model.advantage(t, values[t + 1])).sum(axis=1)
        if lam:
            rhs = rhs + lam * entropy(policy.density[t], scenario.actions.weights)
        worst = max(worst, float(np.max(np.abs(values[t] - rhs), initial=0.0)))
    return worst


def initial_value(scenario, space, values) -> float:
    return float(initial_node_law(scenario, space) @ values[0])
