"""Minor player's optimal stopping: backward induction and the occupation LP."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfeasibleFlow
from .flows import MeanField, OccupationFlow
from .lp import LPResult, simplex
from .major import MajorModel, MajorPolicy, initial_node_law, major_model

ETA_SCALE = 1e-9
FEASIBILITY_TOL = 1e-6


@dataclass(eq=False)
class MinorModel:
    """Data of the stopping problem at a fixed mean field and major policy.

    minor[t] (n_t, S, S)  minor transition rows
    major[t] (n_t, S0)    major next-state law under the policy
    f[t]     (n_t, S)     continuation rewards, t < T
    g[t]     (n_t, S)     stopping rewards, t <= T
    start    (n_0, S)     initial joint law m0*
    """

    minor: list
    major: list
    f: list
    g: list
    start: np.ndarray
    child: list
    parent: list
    sizes: tuple

    @property
    def horizon(self) -> int:
        return len(self.f)

    def continuation(self, t: int, w_next: np.ndarray) -> np.ndarray:
        ch = self.child[t]
        nxt = np.where((ch >= 0)[:, :, None], w_next[np.maximum(ch, 0)], 0.0)  # (n, S0, S)
        mixed = np.einsum("us,usy->uy", self.major[t], nxt)
        return self.f[t] + np.einsum("uxy,uy->ux", self.minor[t], mixed)

    def push(self, t: int, active: np.ndarray) -> np.ndarray:
        """Joint mass arriving at t+1 from active mass (n_t, S) at t."""
        moved = np.einsum("ux,uxy->uy", active, self.minor[t])
        out = np.zeros((self.sizes[t + 1], moved.shape[1]))
        ch = self.child[t]
        for s in range(ch.shape[1]):
            ok = ch[:, s] >= 0
            out[ch[ok, s]] += moved[ok] * self.major[t][ok, s][:, None]
        return out


def minor_model(scenario, space, mf: MeanField, alpha: MajorPolicy,
                model: MajorModel | None = None) -> MinorModel:
    model = model or major_model(scenario, space, mf)
    T = scenario.horizon
    minor, major, f, g = [], [], [], []
    for t in range(T):
        h = space.hist[t]
        minor.append(scenario.minor_kernel_rows(t, h, mf.m[t]))
        major.append(model.next_probs(t, alpha.probs(t)))
        f.append(scenario.minor_running(t, h, mf.m[t]))
        g.append(scenario.minor_stopping(t, h, mf.mu[t]))
    g.append(scenario.minor_stopping(T, space.hist[T], mf.mu[T]))
    start = initial_node_law(scenario, space)[:, None] * scenario.initial_minor_law[None, :]
    return MinorModel(minor, major, f, g, start, space.child, space.parent, space.sizes)


@dataclass(eq=False)
class MinorValue:
    """values[t] (n_t, S) optimal remaining reward; stop[t] (n_t, S) the stop fraction used."""

    values: list
    stop: list
    tie: list
    total: float
    eta: float


def solve_dp(scenario, space, mf: MeanField, alpha: MajorPolicy, q: float = 0.0,
             eta: float | None = None, model: MinorModel | None = None):
    """Backward induction then forward split of mass.  Returns (MinorValue, OccupationFlow).

    Where stopping and continuing tie (within eta) a fraction q of the
    arriving mass stops.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("tie parameter q must lie in [0, 1]")
    mm = model or minor_model(scenario, space, mf, alpha)
    T = mm.horizon
    W = [None] * (T + 1)
    cont = [None] * T
    W[T] = mm.g[T].copy()
    for t in range(T - 1, -1, -1):
        cont[t] = mm.continuation(t, W[t + 1])
        W[t] = np.maximum(mm.g[t], cont[t])
    if eta is None:
        eta = ETA_SCALE * (1.0 + max(float(np.max(np.abs(w), initial=0.0)) for w in W))
    stop, tie = [], []
    for t in range(T):
        diff = mm.g[t] - cont[t]
        tied = np.abs(diff) <= eta
        tie.append(tied)
        stop.append(np.where(tied, q, (diff > 0).astype(float)))
    flow = flow_from_rule(mm, stop)
    total = float((mm.start * W[0]).sum())
    return MinorValue(W, stop, tie, total, eta), flow


def flow_from_rule(mm: MinorModel, stop: list) -> OccupationFlow:
    """Occupation flow of the randomized stopping rule ``stop``."""
    arrive = mm.start.copy()
    mu, m = [], []
    for t in range(mm.horizon):
        mu.append(stop[t] * arrive)
        m.append((1.0 - stop[t]) * arrive)
        arrive = mm.push(t, m[t])
    mu.append(arrive)
    return OccupationFlow(mu, m)


def minor_reward(flow: OccupationFlow, mm: MinorModel) -> float:
    """J1 = sum_t <f_t, m_tilde_t> + sum_t <g_t, mu_tilde_t>."""
    total = sum(float((f * a).sum()) for f, a in zip(mm.f, flow.m_tilde))
    return total + sum(float((g * a).sum()) for g, a in zip(mm.g, flow.mu_tilde))


# --------------------------------------------------------------------------
# occupation LP
# --------------------------------------------------------------------------

@dataclass(eq=False)
class LinearSystem:
    """Equality system A x = b over the stacked flow variables.

    Variables are ordered by time; within time t the block mu_tilde_t comes
    first, then m_tilde_t (absent at T); within a block entries run over
    (node, x) in row-major order.  Rows follow the same (t, node, x) order.
    """

    A: np.ndarray
    b: np.ndarray
    offsets: list  # (mu_offset, m_offset or None) per t
    sizes: tuple
    n_minor: int
    names: list
    row_names: list

    def pack(self, flow: OccupationFlow) -> np.ndarray:
        x = np.zeros(self.A.shape[1])
        for t, (om, oa) in enumerate(self.offsets):
            blk = flow.mu_tilde[t]
            if blk.shape != (self.sizes[t], self.n_minor):
                raise DimensionMismatch(f"mu_tilde[{t}] has shape {blk.shape}")
            x[om:om + blk.size] = blk.ravel()
            if oa is not None:
                blk = flow.m_tilde[t]
                if blk.shape != (self.sizes[t], self.n_minor):
                    raise DimensionMismatch(f"m_tilde[{t}] has shape {blk.shape}")
                x[oa:oa + blk.size] = blk.ravel()
        return x

    def unpack(self, x: np.ndarray) -> OccupationFlow:
        mu, m = [], []
        S = self.n_minor
        for t, (om, oa) in enumerate(self.offsets):
            n = self.sizes[t] * S
            mu.append(x[om:om + n].reshape(self.sizes[t], S).copy())
            if oa is not None:
                m.append(x[oa:oa + n].reshape(self.sizes[t], S).copy())
        return OccupationFlow(mu, m)

    def residual(self, flow: OccupationFlow) -> float:
        x = self.pack(flow)
        return float(np.max(np.abs(self.A @ x - self.b), initial=0.0))

    def dump(self) -> str:
        """MPS-like listing: ROWS, then COLUMNS (name, row, coefficient), then RHS."""
        lines = ["NAME          OCCUPATION", "ROWS", " N  OBJ"]
        lines += [f" E  {r}" for r in self.row_names]
        lines.append("COLUMNS")
        for j, name in enumerate(self.names):
            for i in np.flatnonzero(self.A[:, j]):
                lines.append(f"    {name:<20s} {self.row_names[i]:<20s} {self.A[i, j]!r}")
        lines.append("RHS")
        for i in np.flatnonzero(self.b):
            lines.append(f"    RHS                  {self.row_names[i]:<20s} {self.b[i]!r}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


def assemble_constraints(scenario, space, mf: MeanField, alpha: MajorPolicy,
                         model: MinorModel | None = None) -> LinearSystem:
    """Forward-balance equalities of admissible occupation flows.

    mu_0 + m_0 = m0*;  mu_{t+1} + m_{t+1} - pi_{t+1} m_t = 0  (no m_T).
    """
    mm = model or minor_model(scenario, space, mf, alpha)
    _check_dims(space, mf, alpha, scenario)
    T, S = mm.horizon, scenario.n_minor
    sizes = space.sizes
    offsets, names = [], []
    col = 0
    for t in range(T + 1):
        n = sizes[t] * S
        om = col
        names += [f"MU_{t}_{u}_{x}" for u in range(sizes[t]) for x in range(S)]
        col += n
        oa = None
        if t < T:
            oa = col
            names += [f"M_{t}_{u}_{x}" for u in range(sizes[t]) for x in range(S)]
            col += n
        offsets.append((om, oa))
    row_start = np.concatenate([[0], np.cumsum([n * S for n in sizes])])
    A = np.zeros((int(row_start[-1]), col))
    b = np.zeros(int(row_start[-1]))
    row_names = [f"R_{t}_{u}_{x}" for t in range(T + 1) for u in range(sizes[t]) for x in range(S)]
    for t in range(T + 1):
        n = sizes[t] * S
        rows = row_start[t] + np.arange(n)
        om, oa = offsets[t]
        A[rows, om + np.arange(n)] = 1.0
        if oa is not None:
            A[rows, oa + np.arange(n)] = 1.0
        if t == 0:
            b[rows] = mm.start.ravel()
        else:
            # inflow into (child, y) from (u, x) active at t-1
            src = offsets[t - 1][1]
            ch = space.child[t - 1]
            pm, pq = mm.minor[t - 1], mm.major[t - 1]
            for u in range(sizes[t - 1]):
                for s in np.flatnonzero(ch[u] >= 0):
                    c = ch[u, s]
                    block = pm[u] * pq[u, s]  # [x, y]
                    r0 = row_start[t] + c * S
                    c0 = src + u * S
                    A[r0:r0 + S, c0:c0 + S] -= block.T
    return LinearSystem(A, b, offsets, sizes, S, names, row_names)


def minor_objective(system: LinearSystem, mm: MinorModel) -> np.ndarray:
    c = np.zeros(system.A.shape[1])
    for t, (om, oa) in enumerate(system.offsets):
        g = mm.g[t].ravel()
        c[om:om + g.size] = g
        if oa is not None:
            f = mm.f[t].ravel()
            c[oa:oa + f.size] = f
    return c


def solve_lp(system: LinearSystem, objective: np.ndarray) -> tuple[OccupationFlow, LPResult]:
    res = simplex(objective, system.A, system.b)
    return system.unpack(res.x), res


def lp_best_response(scenario, space, mf: MeanField, alpha: MajorPolicy, model: MinorModel | None = None):
    """(flow, optimal value) from the occupation LP."""
    mm = model or minor_model(scenario, space, mf, alpha)
    system = assemble_constraints(scenario, space, mf, alpha, model=mm)
    flow, res = solve_lp(system, minor_objective(system, mm))
    return flow, res.value


def best_response_gap(flow: OccupationFlow, scenario, space, mf: MeanField, alpha: MajorPolicy) -> float:
    """LP optimum minus the flow's reward.  Raises InfeasibleFlow for non-admissible flows."""
    mm = minor_model(scenario, space, mf, alpha)
    system = assemble_constraints(scenario, space, mf, alpha, model=mm)
    resid = system.residual(flow)
    if resid > FEASIBILITY_TOL or flow.min_entry() < -FEASIBILITY_TOL:
        raise InfeasibleFlow(f"flow violates the balance equations (residual {resid:.3g})")
    _, res = solve_lp(system, minor_objective(system, mm))
    return res.value - minor_reward(flow, mm)


def _check_dims(space, mf, alpha, scenario):
    T = space.horizon
    if len(mf.mu) != T + 1 or len(mf.m) != T or len(alpha.density) != T:
        raise DimensionMismatch("flows and policy must cover the whole horizon")
    for t in range(T + 1):
        if mf.mu[t].shape != (space.size(t), scenario.n_minor):
            raise DimensionMismatch(f"mu[{t}] has shape {mf.mu[t].shape}")
        if t < T:
            if mf.m[t].shape != (space.size(t), scenario.n_minor):
                raise DimensionMismatch(f"m[{t}] has shape {mf.m[t].shape}")
            if alpha.density[t].shape != (space.size(t), scenario.n_actions):
                raise DimensionMismatch(f"alpha[{t}] has shape {alpha.density[t].shape}")
