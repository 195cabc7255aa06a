"""Reachable major-player trajectories, one slice per time step.

A node at time t is a history (x0_0, ..., x0_t) of major state indices.
Slices are stored as integer arrays; nodes are ordered lexicographically in
their history, which is also the order produced by expanding parents in
order and children by ascending state index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError

DEFAULT_NODE_BUDGET = 1_000_000


@dataclass(frozen=True)
class PathNode:
    t: int
    history: tuple
    parent: int
    index: int


@dataclass(frozen=True, eq=False)
class PathSpace:
    """Trajectory tree of the major state.

    hist[t]   (n_t, t+1) histories
    parent[t] (n_t,) index of the prefix node in slice t-1, -1 for roots
    child[t]  (n_t, |S0|) index of the extension in slice t+1, -1 if absent
    """

    horizon: int
    n_states: int
    labels: tuple
    hist: list
    parent: list
    child: list

    @property
    def sizes(self) -> tuple:
        return tuple(h.shape[0] for h in self.hist)

    @property
    def total(self) -> int:
        return int(sum(self.sizes))

    def size(self, t: int) -> int:
        return int(self.hist[t].shape[0])

    def current(self, t: int) -> np.ndarray:
        return self.hist[t][:, -1]

    def node(self, t: int, i: int) -> PathNode:
        return PathNode(t, tuple(int(s) for s in self.hist[t][i]), int(self.parent[t][i]), int(i))

    def nodes(self, t: int) -> list:
        return [self.node(t, i) for i in range(self.size(t))]

    def find(self, history) -> PathNode:
        """Node with the given history (state indices or labels)."""
        h = tuple(self.labels.index(s) if isinstance(s, str) else int(s) for s in history)
        t = len(h) - 1
        hits = np.flatnonzero(np.all(self.hist[t] == np.asarray(h), axis=1))
        if hits.size == 0:
            raise KeyError(f"history {history!r} is not reachable")
        return self.node(t, int(hits[0]))

    def children(self, node: PathNode) -> list:
        """(child node, next-state label) pairs of a node with t < T."""
        if node.t >= self.horizon:
            return []
        row = self.child[node.t][node.index]
        return [(self.node(node.t + 1, int(c)), self.labels[s]) for s, c in enumerate(row) if c >= 0]

    def label_history(self, node: PathNode) -> tuple:
        return tuple(self.labels[s] for s in node.history)


def psi(node: PathNode, s: int) -> int:
    """State index occupied at time s along the node's history."""
    if s < 0 or s > node.t:
        raise IndexError(f"time {s} outside 0..{node.t}")
    return node.history[s]


def encode_matrix(node: PathNode, horizon: int, n_states: int) -> np.ndarray:
    """(T+1) x |S0| binary matrix: row s one-hot at history[s] for s <= t."""
    if node.t > horizon:
        raise ValueError("node is beyond the horizon")
    out = np.zeros((horizon + 1, n_states), dtype=np.uint8)
    out[np.arange(node.t + 1), list(node.history)] = 1
    return out


def decode_matrix(matrix) -> tuple:
    """History encoded by a binary path matrix (inverse of encode_matrix)."""
    mat = np.asarray(matrix)
    filled = mat.sum(axis=1)
    if np.any(filled > 1):
        raise ValueError("path matrix rows must be one-hot or zero")
    t = int(np.count_nonzero(filled)) - 1
    if t < 0 or np.any(filled[: t + 1] != 1):
        raise ValueError("path matrix must have one-hot rows followed by zero rows")
    return tuple(int(j) for j in mat[: t + 1].argmax(axis=1))


def _next_support(scenario) -> np.ndarray | None:
    """Boolean [t][w][x0'] of structurally possible next states."""
    if "major_kernel" in scenario.callbacks:
        return None
    tab = scenario.major_kernel
    nz = tab.base != 0
    if tab.coef.shape[0]:
        nz = nz | np.any(tab.coef != 0, axis=0)
    return nz.any(axis=2)


def build_path_space(scenario, budget: int = DEFAULT_NODE_BUDGET) -> PathSpace:
    """Materialize every history with nonzero structural probability.

    Roots are the support of the initial major law; a history is extended by
    every state that some action reaches with a structurally nonzero entry
    (base or any feature coefficient).  Scenarios with a kernel callback are
    extended by every state.
    """
    S0 = scenario.n_major
    support = _next_support(scenario)
    roots = np.flatnonzero(scenario.initial_major_law > 0)
    hist = [roots[:, None].astype(np.int64)]
    parent = [np.full(roots.size, -1, dtype=np.int64)]
    child = []
    total = roots.size
    if total > budget:
        raise CapacityError(f"path space needs more than {budget} nodes")
    for t in range(scenario.horizon):
        h = hist[t]
        if support is None:
            allowed = np.ones((h.shape[0], S0), dtype=bool)
        else:
            w = np.array([scenario.window(row) for row in h], dtype=np.int64)
            allowed = support[t][w]
        n_next = int(allowed.sum())
        total += n_next
        if total > budget:
            raise CapacityError(f"path space needs more than {budget} nodes (reached t={t + 1})")
        u, s = np.nonzero(allowed)  # row-major: parents in order, states ascending
        ch = np.full((h.shape[0], S0), -1, dtype=np.int64)
        ch[u, s] = np.arange(n_next)
        child.append(ch)
        hist.append(np.concatenate([h[u], s[:, None]], axis=1))
        parent.append(u.astype(np.int64))
    return PathSpace(scenario.horizon, S0, tuple(scenario.major_states), hist, parent, child)
