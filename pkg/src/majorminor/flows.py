"""Containers for per-(t, node) quantities.

All per-node arrays are indexed ``[node, x]`` (or ``[node, a]``) and kept in
plain lists with one entry per time step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


def _copy(arrs):
    return [np.array(a, dtype=float, copy=True) for a in arrs]


@dataclass(eq=False)
class MeanField:
    """Conditional minor-state flows given the major path.

    mu[t] (n_t, S) for t = 0..T: stopped minor players.
    m[t]  (n_t, S) for t = 0..T-1: still-active minor players.
    """

    mu: list
    m: list

    def copy(self) -> "MeanField":
        return MeanField(_copy(self.mu), _copy(self.m))

    def blend(self, other: "MeanField", theta: float) -> "MeanField":
        """(1 - theta) * self + theta * other."""
        _same_shape(self, other)
        return MeanField([(1 - theta) * a + theta * b for a, b in zip(self.mu, other.mu)],
                         [(1 - theta) * a + theta * b for a, b in zip(self.m, other.m)])

    @classmethod
    def uniform(cls, space, n_minor: int, mass: float = 1.0) -> "MeanField":
        T = space.horizon
        mu = [np.full((space.size(t), n_minor), mass / n_minor) for t in range(T + 1)]
        m = [np.full((space.size(t), n_minor), mass / n_minor) for t in range(T)]
        return cls(mu, m)

    @classmethod
    def random(cls, space, n_minor: int, rng: np.random.Generator) -> "MeanField":
        def draw(n):
            x = rng.random((n, n_minor))
            return x / x.sum(axis=1, keepdims=True) * rng.random((n, 1))
        T = space.horizon
        return cls([draw(space.size(t)) for t in range(T + 1)], [draw(space.size(t)) for t in range(T)])


@dataclass(eq=False)
class OccupationFlow:
    """Joint (minor state, major path) masses of stopped and active players.

    mu_tilde[t] (n_t, S) for t = 0..T; m_tilde[t] (n_t, S) for t = 0..T-1.
    """

    mu_tilde: list
    m_tilde: list

    def copy(self) -> "OccupationFlow":
        return OccupationFlow(_copy(self.mu_tilde), _copy(self.m_tilde))

    def combine(self, other: "OccupationFlow", theta: float) -> "OccupationFlow":
        """theta * self + (1 - theta) * other."""
        return OccupationFlow([theta * a + (1 - theta) * b for a, b in zip(self.mu_tilde, other.mu_tilde)],
                              [theta * a + (1 - theta) * b for a, b in zip(self.m_tilde, other.m_tilde)])

    def stopped_mass(self) -> float:
        return float(sum(a.sum() for a in self.mu_tilde))

    def balance_residual(self) -> float:
        """max_t |active mass at t + stopped mass up to t - 1| (t < T) and total-mass error."""
        worst = abs(self.stopped_mass() - 1.0)
        stopped = 0.0
        for t, mt in enumerate(self.m_tilde):
            stopped += float(self.mu_tilde[t].sum())
            worst = max(worst, abs(float(mt.sum()) + stopped - 1.0))
        return worst

    def min_entry(self) -> float:
        return float(min(a.min(initial=0.0) for a in self.mu_tilde + self.m_tilde))


@dataclass(eq=False)
class MajorMarginal:
    """p[t] (n_t,): probability of each major history."""

    p: list

    def __getitem__(self, t):
        return self.p[t]


def _same_shape(a: MeanField, b: MeanField):
    if len(a.mu) != len(b.mu) or len(a.m) != len(b.m):
        raise ShapeMismatch("flows have different horizons")
    for x, y in zip(a.mu + a.m, b.mu + b.m):
        if np.shape(x) != np.shape(y):
            raise ShapeMismatch(f"flow slices differ in shape: {np.shape(x)} vs {np.shape(y)}")
