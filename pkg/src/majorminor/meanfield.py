"""Major path law, conditioning of occupation flows, and flow metrics."""
from __future__ import annotations

import numpy as np

from .errors import MassMismatch, ShapeMismatch
from .flows import MajorMarginal, MeanField, OccupationFlow, _same_shape
from .major import MajorModel, MajorPolicy, initial_node_law, major_model

EPS_P = 1e-12
MASS_TOL = 1e-9


def marginal_law(scenario, space, alpha: MajorPolicy, mf: MeanField,
                 model: MajorModel | None = None) -> MajorMarginal:
    """Probability of every major history under alpha at the given mean field."""
    model = model or major_model(scenario, space, mf)
    p = [initial_node_law(scenario, space)]
    for t in range(scenario.horizon):
        q = model.next_probs(t, alpha.probs(t))
        nxt = np.zeros(space.size(t + 1))
        ch = space.child[t]
        mask = ch >= 0
        np.add.at(nxt, ch[mask], (p[t][:, None] * q)[mask])
        p.append(nxt)
    return MajorMarginal(p)


def disintegrate(flow: OccupationFlow, p: MajorMarginal, fallback: MeanField,
                 eps_p: float = EPS_P) -> MeanField:
    """Condition joint masses on the major path.

    Nodes with p <= eps_p keep the fallback flow there.
    """
    mu = [_condition(a, p[t], fallback.mu[t], eps_p, f"mu_tilde[{t}]") for t, a in enumerate(flow.mu_tilde)]
    m = [_condition(a, p[t], fallback.m[t], eps_p, f"m_tilde[{t}]") for t, a in enumerate(flow.m_tilde)]
    return MeanField(mu, m)


def _condition(joint, pt, fallback, eps_p, name):
    mass = joint.sum(axis=1)
    over = mass - pt
    if np.any(over > MASS_TOL):
        i = int(np.argmax(over))
        raise MassMismatch(f"{name}: node {i} carries mass {mass[i]!r} above its path probability {pt[i]!r}")
    ok = pt > eps_p
    out = np.array(fallback, dtype=float, copy=True)
    out[ok] = joint[ok] / pt[ok, None]
    return out


def reconstruct(mf: MeanField, p: MajorMarginal) -> OccupationFlow:
    """Joint masses mu_t(u)(x) * p_t(u)."""
    return OccupationFlow([a * p[t][:, None] for t, a in enumerate(mf.mu)],
                          [a * p[t][:, None] for t, a in enumerate(mf.m)])


def consistency_residual(mf: MeanField, flow: OccupationFlow, p: MajorMarginal,
                         eps_p: float = EPS_P) -> float:
    """Max L1 gap between the joint flow and mean field times path law, on supported nodes."""
    worst = 0.0
    pairs = list(zip(flow.mu_tilde, mf.mu, range(len(mf.mu)))) + list(zip(flow.m_tilde, mf.m, range(len(mf.m))))
    for joint, cond, t in pairs:
        if joint.shape != cond.shape:
            raise ShapeMismatch(f"slice {t}: {joint.shape} vs {cond.shape}")
        ok = p[t] > eps_p
        if ok.any():
            gap = np.abs(joint[ok] - cond[ok] * p[t][ok, None]).sum(axis=1)
            worst = max(worst, float(gap.max()))
    return worst


def flow_distance(a: MeanField, b: MeanField) -> float:
    """Max over (t, node) of the L1 distance, over both components."""
    _same_shape(a, b)
    worst = 0.0
    for x, y in zip(a.mu + a.m, b.mu + b.m):
        if x.size:
            worst = max(worst, float(np.abs(x - y).sum(axis=1).max()))
    return worst


def aggregate_balance(mf: MeanField, p: MajorMarginal, flow: OccupationFlow) -> float:
    """max_t |sum_u p m-mass + stopped mass up to t - 1| for t < T."""
    worst = 0.0
    stopped = 0.0
    for t, mt in enumerate(mf.m):
        stopped += float(flow.mu_tilde[t].sum())
        worst = max(worst, abs(float(p[t] @ mt.sum(axis=1)) + stopped - 1.0))
    return worst


def conditional_flow(scenario, space, mf: MeanField, stop: list) -> MeanField:
    """Mean field generated along each fixed major path by a stopping rule.

    ``stop[t]`` (n_t, S) is the stopping probability of an arriving player at
    (t, x, node).  Each node's flow conditions on its own history, so it is
    defined on every node, including ones the major player never visits.
    """
    T = scenario.horizon
    arrive = np.tile(scenario.initial_minor_law, (space.size(0), 1))
    mu, m = [], []
    for t in range(T):
        mu.append(stop[t] * arrive)
        m.append((1.0 - stop[t]) * arrive)
        pm = scenario.minor_kernel_rows(t, space.hist[t], mf.m[t])
        moved = np.einsum("ux,uxy->uy", m[t], pm)
        arrive = moved[space.parent[t + 1]]
    mu.append(arrive)
    return MeanField(mu, m)
