"""Regularized fixed-point iteration, annealing in lambda, and certificates.

The loop itself is generic: a *game* object supplies the map, the metric and
the residuals.  ``StoppingGame`` is the minor-stopping model; the control
variant lives in ``majorminor.control``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ShapeMismatch, ValidationError
from .flows import MajorMarginal, MeanField, OccupationFlow
from .major import (MajorPolicy, initial_value, major_model, major_reward, solve_regularized,
                    solve_unregularized)
from .meanfield import (EPS_P, conditional_flow, consistency_residual, disintegrate, flow_distance,
                        marginal_law, reconstruct)
from .minor import lp_best_response, minor_model, minor_reward, solve_dp

log = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    lam: float = 0.1
    damping: float = 0.5
    tol: float = 1e-8
    max_iters: int = 500
    tie_q: float = 0.0
    anneal: tuple | None = None  # (lambda_start, factor, lambda_min)
    seed: int | None = None
    eps_final: float = 1e-6
    eps_support: float = 1e-3
    eta: float | None = None
    progress: Callable | None = field(default=None, repr=False, compare=False)

    def validate(self) -> "SolveConfig":
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValidationError("lambda must be positive; lambda = 0 is reached by annealing")
        if not 0 < self.damping <= 1:
            raise ValidationError("damping must lie in (0, 1]")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if int(self.max_iters) < 1:
            raise ValidationError("max_iters must be at least 1")
        if not 0 <= self.tie_q <= 1:
            raise ValidationError("tie parameter must lie in [0, 1]")
        if self.anneal is not None:
            start, r, lmin = self.anneal
            if not 0 < r < 1:
                raise ValidationError("anneal factor must lie in (0, 1)")
            if not 0 < lmin <= start:
                raise ValidationError("anneal needs 0 < lambda_min <= lambda_start")
        return self

    def schedule(self) -> list:
        start, r, lmin = self.anneal
        lams = []
        lam = start
        while lam > lmin * (1 + 1e-12):
            lams.append(lam)
            lam *= r
        lams.append(lmin)
        return lams

    def to_json(self) -> dict:
        return {"lambda": self.lam, "damping": self.damping, "tol": self.tol, "max_iters": self.max_iters,
                "tie_q": self.tie_q, "anneal": list(self.anneal) if self.anneal else None, "seed": self.seed,
                "eps_final": self.eps_final, "eps_support": self.eps_support, "eta": self.eta}


@dataclass(eq=False)
class EquilibriumReport:
    variant: str
    mode: str  # "regularized" or "relaxed"
    lam: float
    mf: object
    alpha: MajorPolicy
    flow: object
    p: MajorMarginal
    major_values: list
    minor_values: list
    residuals: dict
    lambda_trace: list
    iterations: int
    converged: bool
    stalled_lambda: float | None = None
    certificate: "Certificate | None" = None
    scenario_name: str = ""
    config: dict = field(default_factory=dict)


@dataclass
class Certificate:
    """Per-condition residuals and pass flags at tolerance eps."""

    eps: float
    values: dict
    passed: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def slack(self) -> dict:
        return {k: self.eps - abs(v) if k != "support" else None for k, v in self.values.items()}

    def lines(self) -> list:
        out = []
        for k, v in self.values.items():
            out.append(f"{k:12s} {'pass' if self.passed[k] else 'FAIL'}  value={v:.3e}")
        return out


@dataclass(eq=False)
class Step:
    z_new: object
    alpha: MajorPolicy
    flow: object
    p: MajorMarginal
    major_values: list
    minor_values: list
    major_gap: float
    minor_gap: float


# --------------------------------------------------------------------------
# stopping game
# --------------------------------------------------------------------------

class StoppingGame:
    variant = "stopping"

    def __init__(self, scenario, space):
        self.scenario = scenario
        self.space = space

    def initial(self, config: SolveConfig) -> MeanField:
        if config.seed is None:
            return MeanField.uniform(self.space, self.scenario.n_minor)
        return MeanField.random(self.space, self.scenario.n_minor, np.random.default_rng(config.seed))

    def step(self, z: MeanField, lam: float, config: SolveConfig) -> Step:
        sc, sp = self.scenario, self.space
        model = major_model(sc, sp, z)
        alpha, V = solve_regularized(sc, sp, z, lam, model=model)
        mm = minor_model(sc, sp, z, alpha, model=model)
        W, flow = solve_dp(sc, sp, z, alpha, q=config.tie_q, eta=config.eta, model=mm)
        p = marginal_law(sc, sp, alpha, z, model=model)
        z_new = disintegrate(flow, p, fallback=z)
        major_gap = initial_value(sc, sp, V) - major_reward(sc, sp, alpha, z, lam, model=model)
        minor_gap = W.total - minor_reward(flow, mm)
        return Step(z_new, alpha, flow, p, V, W.values, major_gap, minor_gap)

    def distance(self, a, b) -> float:
        return flow_distance(a, b)

    def blend(self, z, z_new, theta):
        return z.blend(z_new, theta)

    def consistency(self, z, step: Step) -> float:
        return consistency_residual(z, step.flow, step.p)

    def certify(self, report: EquilibriumReport, eps: float, eps_support: float = 1e-3,
                eta: float | None = None) -> Certificate:
        return verify(report, self.scenario, self.space, eps, eps_support=eps_support, eta=eta)


def phi_lambda_step(scenario, space, mf: MeanField, config: SolveConfig):
    """One application of the regularized map.  Returns (mf', alpha, flow, p)."""
    st = StoppingGame(scenario, space).step(mf, config.lam, config)
    return st.z_new, st.alpha, st.flow, st.p


# --------------------------------------------------------------------------
# generic loop
# --------------------------------------------------------------------------

def iterate(game, z, lam: float, config: SolveConfig, label: str = ""):
    """Damped iteration at fixed lambda.  The first step is taken undamped.

    Returns (z, last Step, residuals, iterations, converged).  The returned z
    is the point at which the last Step was evaluated, so policy, flow and
    mean field in a report are mutually consistent.
    """
    res = {}
    step = None
    for k in range(1, int(config.max_iters) + 1):
        step = game.step(z, lam, config)
        delta = game.distance(step.z_new, z)
        cons = game.consistency(z, step)
        res = {"major_gap": step.major_gap, "minor_gap": step.minor_gap,
               "consistency": cons, "iteration_delta": delta}
        if config.progress is not None:
            config.progress(f"{label}lambda={lam:.6g} iter={k} delta={delta:.3e} consistency={cons:.3e} "
                            f"major_gap={step.major_gap:.3e} minor_gap={step.minor_gap:.3e}")
        if delta <= config.tol and cons <= config.tol:
            return z, step, res, k, True
        theta = 1.0 if k == 1 else config.damping
        z = game.blend(z, step.z_new, theta)
    return z, step, res, int(config.max_iters), False


def _report(game, z, step, res, iters, converged, lam, mode, trace, config):
    return EquilibriumReport(
        variant=game.variant, mode=mode, lam=lam, mf=z, alpha=step.alpha, flow=step.flow, p=step.p,
        major_values=step.major_values, minor_values=step.minor_values, residuals=dict(res),
        lambda_trace=trace, iterations=iters, converged=converged,
        stalled_lambda=None if converged else lam, scenario_name=game.scenario.name,
        config=config.to_json())


def _trace_entry(lam, res, iters, converged, values):
    return {"lambda": lam, "iterations": iters, "converged": converged,
            "max_abs_value": max(float(np.max(np.abs(v), initial=0.0)) for v in values), **res}


def run_regularized(game, config: SolveConfig, init=None) -> EquilibriumReport:
    config.validate()
    z = init if init is not None else game.initial(config)
    z, step, res, iters, ok = iterate(game, z, config.lam, config)
    if not all(abs(v) <= config.tol for v in res.values()):
        ok = False
    trace = [_trace_entry(config.lam, res, iters, ok, step.major_values)]
    return _report(game, z, step, res, iters, ok, config.lam, "regularized", trace, config)


def run_anneal(game, config: SolveConfig, init=None) -> EquilibriumReport:
    """Warm-started sequence of regularized solves, then an unregularized certificate."""
    config.validate()
    if config.anneal is None:
        raise ValidationError("annealing needs a schedule (lambda_start, factor, lambda_min)")
    z = init if init is not None else game.initial(config)
    trace = []
    total = 0
    step = res = None
    for lam in config.schedule():
        z, step, res, iters, ok = iterate(game, z, lam, config, label="anneal ")
        total += iters
        trace.append(_trace_entry(lam, res, iters, ok, step.major_values))
        if not ok:
            rep = _report(game, z, step, res, total, False, lam, "relaxed", trace, config)
            rep.stalled_lambda = lam
            return rep
    rep = _report(game, z, step, res, total, True, config.schedule()[-1], "relaxed", trace, config)
    cert = game.certify(rep, config.eps_final, eps_support=config.eps_support, eta=config.eta)
    rep.certificate = cert
    rep.residuals = dict(cert.values, iteration_delta=res["iteration_delta"])
    rep.converged = cert.ok
    return rep


def solve_regularized_equilibrium(scenario, space, config: SolveConfig, init=None) -> EquilibriumReport:
    return run_regularized(StoppingGame(scenario, space), config, init)


def anneal_to_relaxed(scenario, space, config: SolveConfig, init=None) -> EquilibriumReport:
    return run_anneal(StoppingGame(scenario, space), config, init)


# --------------------------------------------------------------------------
# certificate
# --------------------------------------------------------------------------

def _check_report_shapes(report: EquilibriumReport, scenario, space):
    T = space.horizon
    mf, flow = report.mf, report.flow
    if len(mf.mu) != T + 1 or len(mf.m) != T or len(report.alpha.density) != T:
        raise ShapeMismatch("report horizon does not match the scenario")
    if len(flow.mu_tilde) != T + 1 or len(flow.m_tilde) != T:
        raise ShapeMismatch("report flow horizon does not match the scenario")
    for t in range(T + 1):
        want = (space.size(t), scenario.n_minor)
        arrs = [mf.mu[t], flow.mu_tilde[t]] + ([mf.m[t], flow.m_tilde[t]] if t < T else [])
        for a in arrs:
            if a.shape != want:
                raise ShapeMismatch(f"slice {t} has shape {a.shape}, expected {want}")
        if t < T and report.alpha.density[t].shape != (space.size(t), scenario.n_actions):
            raise ShapeMismatch(f"policy slice {t} has shape {report.alpha.density[t].shape}")


def verify(report: EquilibriumReport, scenario, space, eps: float, eps_support: float = 1e-3,
           eta: float | None = None) -> Certificate:
    """Recompute the equilibrium residuals from the report's (mf, alpha, flow).

    major:       best value minus the policy's value (plain or regularized by mode)
    minor:       occupation-LP optimum minus the flow's reward
    consistency: joint flow against mean field times the recomputed path law
    support:     (relaxed mode) largest policy mass outside the argmax sets
                 on nodes the major player reaches
    """
    _check_report_shapes(report, scenario, space)
    mf, alpha, flow = report.mf, report.alpha, report.flow
    model = major_model(scenario, space, mf)
    values, passed = {}, {}
    if report.mode == "regularized":
        _, V = solve_regularized(scenario, space, mf, report.lam, model=model)
        values["major"] = initial_value(scenario, space, V) - major_reward(
            scenario, space, alpha, mf, report.lam, model=model)
    else:
        V, argmax = solve_unregularized(scenario, space, mf, eta=eta, model=model)
        values["major"] = initial_value(scenario, space, V) - major_reward(scenario, space, alpha, mf, 0.0,
                                                                           model=model)
    mm = minor_model(scenario, space, mf, alpha, model=model)
    _, lp_value = lp_best_response(scenario, space, mf, alpha, model=mm)
    values["minor"] = lp_value - minor_reward(flow, mm)
    p = marginal_law(scenario, space, alpha, mf, model=model)
    values["consistency"] = consistency_residual(mf, flow, p)
    for k in ("major", "minor", "consistency"):
        # a clearly negative gap means the report beats the optimum, so it fails too
        passed[k] = abs(values[k]) <= eps
    if report.mode != "regularized":
        worst = 0.0
        for t in range(scenario.horizon):
            out = argmax.outside_mass(alpha, t)
            live = p[t] > EPS_P
            if live.any():
                worst = max(worst, float(out[live].max()))
        values["support"] = worst
        passed["support"] = worst <= eps_support
    return Certificate(eps, values, passed)


# --------------------------------------------------------------------------
# the non-convexity example
# --------------------------------------------------------------------------

def example_policy(scenario, space, p: float) -> MajorPolicy:
    """Major plays (0, p, 1 - p) over exit times (0, 1, 2) in the three-path example."""
    act = scenario.major_states.index("active")
    dens = []
    for t in range(scenario.horizon):
        d = np.zeros((space.size(t), 2))
        for i, h in enumerate(space.hist[t]):
            if h[-1] != act:
                d[i, 1] = 1.0
            elif t == 1:
                d[i] = [1.0 - p, p]
            else:
                d[i, 0] = 1.0
        dens.append(d)
    return MajorPolicy(scenario.actions, dens)


def example_stop_rule(scenario, space, s: int) -> MeanField:
    """Minor flow that stops everyone at example time s on every path.

    The minor clock in the packaged example lags by one step, so example time
    s is model time s + 1.
    """
    T = scenario.horizon
    stop = [np.full((space.size(t), scenario.n_minor), 1.0 if t == s + 1 else 0.0) for t in range(T)]
    blank = MeanField.uniform(space, scenario.n_minor)
    return conditional_flow(scenario, space, blank, stop)


def example_report(scenario, space, mf: MeanField, p: float) -> EquilibriumReport:
    alpha = example_policy(scenario, space, p)
    law = marginal_law(scenario, space, alpha, mf)
    flow = reconstruct(mf, law)
    return EquilibriumReport("stopping", "relaxed", 0.0, mf, alpha, flow, law, [], [], {}, [], 0, False,
                             scenario_name=scenario.name)


def nonconvexity_regression(scenario=None) -> bool:
    """True when the midpoint of the example's two equilibrium mean fields is no equilibrium."""
    return nonconvexity_details(scenario)[0]


def nonconvexity_details(scenario=None, grid=None, threshold: float = 0.05, eps: float = 1e-9):
    """Check the midpoint against every alpha^p on a grid of p.

    Returns (reproduced, details) where details holds the minor gap per p and
    the certificates of the two pure equilibria.
    """
    from .builtins import three_path_example
    from .paths import build_path_space

    scenario = scenario or three_path_example()
    space = build_path_space(scenario)
    grid = np.round(np.linspace(0, 1, 11), 12) if grid is None else grid
    first = example_stop_rule(scenario, space, 0)
    second = example_stop_rule(scenario, space, 1)
    cert_first = verify(example_report(scenario, space, first, 0.0), scenario, space, eps)
    cert_second = verify(example_report(scenario, space, second, 1.0), scenario, space, eps)
    mid = first.blend(second, 0.5)
    gaps = {}
    for p in grid:
        cert = verify(example_report(scenario, space, mid, float(p)), scenario, space, eps)
        gaps[float(p)] = cert.values["minor"]
    reproduced = cert_first.ok and cert_second.ok and all(g > threshold for g in gaps.values())
    return reproduced, {"gaps": gaps, "first": cert_first, "second": cert_second}
