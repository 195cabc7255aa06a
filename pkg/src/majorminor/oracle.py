"""Brute-force reference solutions for small instances.

Stopping: every deterministic stopping rule that is adapted to (t, x, node)
is enumerated and scored exactly.  Control: every deterministic Markov
policy of the minor player is enumerated.  Both are vectorized over rules.
"""
from __future__ import annotations

import itertools

import numpy as np

from .control import ControlModel, consistent_flow_step
from .errors import CapacityError
from .minor import MinorModel, flow_from_rule

DEFAULT_RULE_BUDGET = 100_000
CHUNK = 4096


def _decision_cells(active: list) -> list:
    """(t, node, x) cells where some mass can be active under never-stop."""
    return [(t, int(u), int(x)) for t, a in enumerate(active) for u, x in zip(*np.nonzero(a > 0))]


def stopping_rule_count(mm: MinorModel) -> int:
    never = flow_from_rule(mm, [np.zeros_like(f) for f in mm.f])
    return 2 ** len(_decision_cells(never.m_tilde))


def brute_force_stopping(mm: MinorModel, budget: int = DEFAULT_RULE_BUDGET):
    """Best deterministic stopping rule.  Returns (value, stop list, rules scored)."""
    never = flow_from_rule(mm, [np.zeros_like(f) for f in mm.f])
    cells = _decision_cells(never.m_tilde)
    n_rules = 2 ** len(cells)
    if n_rules > budget:
        raise CapacityError(f"{n_rules} stopping rules exceed the budget of {budget}")
    T = mm.horizon
    best_val, best_bits = -np.inf, None
    for start in range(0, n_rules, CHUNK):
        ids = np.arange(start, min(start + CHUNK, n_rules))
        bits = (ids[:, None] >> np.arange(len(cells))[None, :]) & 1
        stop = [np.zeros((ids.size,) + f.shape) for f in mm.f]
        for k, (t, u, x) in enumerate(cells):
            stop[t][:, u, x] = bits[:, k]
        vals = _score_rules(mm, stop, T)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_bits = float(vals[i]), bits[i]
    best = [np.zeros_like(f) for f in mm.f]
    for k, (t, u, x) in enumerate(cells):
        best[t][u, x] = best_bits[k]
    return best_val, best, n_rules


def _score_rules(mm: MinorModel, stop: list, T: int) -> np.ndarray:
    arrive = np.broadcast_to(mm.start, (stop[0].shape[0],) + mm.start.shape).copy()
    total = np.zeros(arrive.shape[0])
    for t in range(T):
        mu = stop[t] * arrive
        m = arrive - mu
        total += (mu * mm.g[t]).sum(axis=(1, 2)) + (m * mm.f[t]).sum(axis=(1, 2))
        moved = np.einsum("rux,uxy->ruy", m, mm.minor[t])
        nxt = np.zeros((arrive.shape[0], mm.sizes[t + 1], moved.shape[2]))
        ch = mm.child[t]
        for s in range(ch.shape[1]):
            ok = ch[:, s] >= 0
            nxt[:, ch[ok, s]] += moved[:, ok] * mm.major[t][ok, s][None, :, None]
        arrive = nxt
    return total + (arrive * mm.g[T]).sum(axis=(1, 2))


def brute_force_control(cm: ControlModel, budget: int = DEFAULT_RULE_BUDGET):
    """Best deterministic Markov policy of the minor player.  Returns (value, choices, policies scored)."""
    T = cm.horizon
    A1 = cm.f[0].shape[2]
    reach = [cm.start]
    for t in range(T - 1):
        uniform = np.full(cm.f[t].shape, 1.0 / A1)
        reach.append(consistent_flow_step(cm, t, reach[t][:, :, None] * uniform, None))
    cells = [(t, int(u), int(x)) for t, r in enumerate(reach) for u, x in zip(*np.nonzero(r > 0))]
    n_pol = A1 ** len(cells)
    if n_pol > budget:
        raise CapacityError(f"{n_pol} minor policies exceed the budget of {budget}")
    best_val, best_choice = -np.inf, None
    for chunk in _chunks(itertools.product(range(A1), repeat=len(cells)), CHUNK):
        choice = np.array(chunk, dtype=int).reshape(len(chunk), len(cells))
        pol = [np.zeros((len(chunk),) + f.shape) for f in cm.f]
        for t in range(T):
            pol[t][..., 0] = 1.0  # unreachable cells: any action
        for k, (t, u, x) in enumerate(cells):
            pol[t][:, u, x, :] = 0.0
            pol[t][np.arange(len(chunk)), u, x, choice[:, k]] = 1.0
        vals = _score_policies(cm, pol)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_choice = float(vals[i]), [p[i].copy() for p in pol]
    return best_val, best_choice, n_pol


def _chunks(it, n):
    buf = []
    for item in it:
        buf.append(item)
        if len(buf) == n:
            yield buf
            buf = []
    if buf:
        yield buf


def _score_policies(cm: ControlModel, pol: list) -> np.ndarray:
    T = cm.horizon
    R = pol[0].shape[0]
    state = np.broadcast_to(cm.start, (R,) + cm.start.shape).copy()
    total = np.zeros(R)
    for t in range(T):
        v = state[..., None] * pol[t]
        total += (v * cm.f[t]).sum(axis=(1, 2, 3))
        moved = np.einsum("ruxa,uxay->ruy", v, cm.kernel[t])
        nxt = np.zeros((R, cm.sizes[t + 1], moved.shape[2]))
        ch = cm.child[t]
        for s in range(ch.shape[1]):
            ok = ch[:, s] >= 0
            nxt[:, ch[ok, s]] += moved[:, ok] * cm.q[t][ok, s][None, :, None]
        state = nxt
    return total + (state * cm.g).sum(axis=(1, 2))
