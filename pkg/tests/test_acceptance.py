"""Acceptance suite: one check per criterion, each printing a single pass/fail line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines, or execute this
file directly.
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from majorminor.builtins import builtin_scenarios, three_path_example
from majorminor.control import (ControlGame, ControlScenario, control_flow_distance, control_model, control_toy,
                                control_toy_coupled, dynamics_residual, family_oracle, solve_control_equilibrium,
                                verify_control)
from majorminor.equilibrium import (SolveConfig, StoppingGame, anneal_to_relaxed, example_policy,
                                    nonconvexity_details, run_anneal, solve_regularized_equilibrium)
from majorminor.flows import MeanField
from majorminor.instances import random_policy, random_scenario, with_stopping_tie
from majorminor.major import entropy, gibbs, initial_value, solve_unregularized
from majorminor.meanfield import disintegrate, marginal_law, reconstruct
from majorminor.minor import (assemble_constraints, flow_from_rule, lp_best_response, minor_model,
                              minor_reward, solve_dp)
from majorminor.oracle import brute_force_stopping, stopping_rule_count
from majorminor.paths import build_path_space

SEED = 20240611


def report(n, ok, detail):
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


def random_suite(n=50, seed=SEED):
    """Randomized instances: |S| <= 4, |S0| <= 2, T <= 3, random affine couplings."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        sc = random_scenario(rng, n_minor=int(rng.integers(1, 5)), n_major=int(rng.integers(1, 3)),
                             horizon=int(rng.integers(1, 4)), n_actions=int(rng.integers(2, 4)))
        space = build_path_space(sc)
        mf = MeanField.random(space, sc.n_minor, rng)
        alpha = random_policy(rng, space, sc.actions)
        out.append((sc, space, mf, alpha))
    return out


# --------------------------------------------------------------------------

def check_1():
    sc = three_path_example()
    space = build_path_space(sc)
    mf = MeanField.uniform(space, 1)
    V, _ = solve_unregularized(sc, space, mf)
    major = initial_value(sc, space, V)
    ok = abs(major - 1.0) <= 1e-12
    lines = [f"major={major!r}"]
    # the minor clock lags one step: example time s is model time s + 1
    for p, value, s in ((0.0, 0.5, 0), (1.0, 1.0, 1)):
        dp, flow = solve_dp(sc, space, mf, example_policy(sc, space, p))
        stopped = float(flow.mu_tilde[s + 1].sum())
        ok &= abs(dp.total - value) <= 1e-12 and abs(stopped - 1.0) <= 1e-12
        lines.append(f"alpha^{int(p)}: value={dp.total!r} stops at {s}")
    return report(1, ok, "; ".join(lines))


def check_2():
    ok, details = nonconvexity_details()
    worst = min(details["gaps"].values())
    return report(2, ok, f"midpoint minor gap >= {worst:.4f} over p in 0..1 (threshold 0.05)")


def check_3():
    sc = three_path_example()
    space = build_path_space(sc)
    t0 = time.perf_counter()
    rep = anneal_to_relaxed(sc, space, SolveConfig(anneal=(1.0, 0.5, 1e-3), eps_final=1e-3, eps_support=1e-3))
    dt = time.perf_counter() - t0
    cert = rep.certificate
    stop0 = float(rep.alpha.probs(0)[0, 1])
    ok = all(cert.passed[k] for k in ("major", "minor", "consistency")) and stop0 <= 1e-3 and dt <= 5.0
    vals = ", ".join(f"{k}={cert.values[k]:.1e}" for k in ("major", "minor", "consistency"))
    return report(3, ok, f"{vals}; stop@0 mass={stop0:.1e}; {dt:.2f}s")


def check_4():
    worst_lp, worst_bf, n_bf = 0.0, 0.0, 0
    for sc, space, mf, alpha in random_suite():
        mm = minor_model(sc, space, mf, alpha)
        dp, _ = solve_dp(sc, space, mf, alpha, model=mm)
        _, lp = lp_best_response(sc, space, mf, alpha, model=mm)
        worst_lp = max(worst_lp, abs(dp.total - lp))
        if stopping_rule_count(mm) <= 10 ** 5:
            bf, _, _ = brute_force_stopping(mm, budget=10 ** 5)
            worst_bf = max(worst_bf, abs(bf - dp.total), abs(bf - lp))
            n_bf += 1
    ok = worst_lp <= 1e-9 and worst_bf <= 1e-9
    return report(4, ok, f"max|DP-LP|={worst_lp:.1e}; max|oracle-DP/LP|={worst_bf:.1e} on {n_bf}/50 enumerable")


def check_5():
    worst_mass, worst_bal, n = 0.0, 0.0, 0
    suite = random_suite()
    for sc, space, mf, alpha in suite:
        system = assemble_constraints(sc, space, mf, alpha)
        flows = [solve_dp(sc, space, mf, alpha, q=q)[1] for q in (0.0, 1.0)]
        flows.append(lp_best_response(sc, space, mf, alpha)[0])
        for f in flows:
            worst_mass = max(worst_mass, abs(f.stopped_mass() - 1.0))
            worst_bal = max(worst_bal, f.balance_residual(), system.residual(f))
            n += 1
    for sc, space, _, _ in suite[:10]:
        rep = solve_regularized_equilibrium(sc, space, SolveConfig(lam=0.5))
        worst_mass = max(worst_mass, abs(rep.flow.stopped_mass() - 1.0))
        worst_bal = max(worst_bal, rep.flow.balance_residual())
        n += 1
    ok = worst_mass <= 1e-10 and worst_bal <= 1e-10
    return report(5, ok, f"{n} flows: max|stopped-1|={worst_mass:.1e}, max balance={worst_bal:.1e}")


def check_6():
    rng = np.random.default_rng(SEED)
    adv = rng.normal(size=(10_000, 4)) * 5
    shift = rng.normal(size=(10_000, 1)) * 100
    lam = 0.7
    d1, _ = gibbs(adv, lam, np.ones(4))
    d2, _ = gibbs(adv + shift, lam, np.ones(4))
    shift_err = float(np.abs(d1 - d2).max())
    du, _ = gibbs(rng.uniform(-1, 1, size=(10_000, 4)), 1e6, np.ones(4))
    unif_err = float(np.abs(du - 0.25).max())
    p = rng.random(10_000)
    h2 = float(entropy(np.stack([p, 1 - p], axis=1)).max())
    hA = 0.0
    for A in (2, 3, 5, 8):
        dens = rng.dirichlet(np.full(A, 0.5), size=10_000)
        hA = max(hA, float((entropy(dens) - np.log(A)).max()))
    ok = shift_err <= 1e-12 and unif_err <= 1e-5 and h2 <= 2 / np.e and hA <= 1e-12
    return report(6, ok, f"shift={shift_err:.1e}; uniform@1e6={unif_err:.1e}; "
                         f"binary H max={h2:.4f}<=2/e; H-ln|A| max={hA:.1e}")


def check_7():
    rng = np.random.default_rng(SEED + 7)
    worst = 0.0
    for sc, space, mf, alpha in random_suite(seed=SEED + 7):
        mm = minor_model(sc, space, mf, alpha)
        stop = [rng.random(f.shape) * (rng.random(f.shape) < 0.7) for f in mm.f]
        flow = flow_from_rule(mm, stop)
        p = marginal_law(sc, space, alpha, mf)
        back = reconstruct(disintegrate(flow, p, MeanField.uniform(space, sc.n_minor)), p)
        for t in range(sc.horizon + 1):
            ok = p[t] > 1e-12
            arrs = [(back.mu_tilde[t], flow.mu_tilde[t])]
            if t < sc.horizon:
                arrs.append((back.m_tilde[t], flow.m_tilde[t]))
            for a, b in arrs:
                worst = max(worst, float(np.abs(a[ok] - b[ok]).max(initial=0.0)))
    return report(7, worst <= 1e-10, f"max reconstruction residual={worst:.1e} over 50 flows")


def check_8():
    rng = np.random.default_rng(SEED + 8)
    worst_feas, worst_val, distinct, n = 0.0, 0.0, 0, 0
    while n < 20:
        sc = random_scenario(rng, n_minor=int(rng.integers(2, 4)), n_major=2, horizon=int(rng.integers(1, 4)))
        space = build_path_space(sc)
        mf = MeanField.random(space, sc.n_minor, rng)
        alpha = random_policy(rng, space, sc.actions)
        mm = minor_model(sc, space, mf, alpha)
        dp, _ = solve_dp(sc, space, mf, alpha, model=mm)
        x = int(rng.integers(sc.n_minor))
        cont0 = mm.continuation(0, dp.values[1])
        sc = with_stopping_tie(sc, float(cont0[0, x]), space, 0, x)
        mm = minor_model(sc, space, mf, alpha)
        system = assemble_constraints(sc, space, mf, alpha, model=mm)
        d0, f0 = solve_dp(sc, space, mf, alpha, q=0.0, model=mm)
        _, f1 = solve_dp(sc, space, mf, alpha, q=1.0, model=mm)
        _, lp = lp_best_response(sc, space, mf, alpha, model=mm)
        if not d0.tie[0][0, x]:
            continue
        distinct += np.abs(f0.mu_tilde[0] - f1.mu_tilde[0]).max() > 1e-6
        for theta in np.linspace(0, 1, 11):
            mix = f0.combine(f1, theta)
            worst_feas = max(worst_feas, system.residual(mix), -mix.min_entry())
            worst_val = max(worst_val, abs(minor_reward(mix, mm) - lp))
        n += 1
    ok = worst_feas <= 1e-10 and worst_val <= 1e-10 and distinct == 20
    return report(8, ok, f"20 tied instances ({distinct} with distinct optimizers): "
                         f"feasibility={worst_feas:.1e}, |J-J*|={worst_val:.1e}")


def check_9():
    lams = [1.0 * 0.5 ** k for k in range(14)] + [1e-4]
    cfg = SolveConfig(anneal=(1.0, 0.5, 1e-4), max_iters=2000)
    assert cfg.schedule() == lams
    ok, parts = True, []
    for name, sc in builtin_scenarios():
        space = build_path_space(sc)
        game = ControlGame(sc, space) if isinstance(sc, ControlScenario) else StoppingGame(sc, space)
        rep = run_anneal(game, cfg)
        bound = sc.reward_bound() * (sc.horizon + 1) + 1
        worst = max(e["max_abs_value"] for e in rep.lambda_trace)
        reached = len(rep.lambda_trace) == len(lams)
        ok &= worst <= bound and reached
        parts.append(f"{name} {worst:.3f}<={bound:.2f}")
    return report(9, ok, "; ".join(parts))


def check_10():
    worst = 0.0
    outputs = []
    cs = control_toy()
    space = build_path_space(cs)
    rep = solve_control_equilibrium(cs, space, SolveConfig(lam=0.1, tol=1e-10))
    outputs.append((cs, space, rep))
    iters = rep.iterations
    cc = control_toy_coupled()
    cspace = build_path_space(cc)
    lam = 0.1
    crep = solve_control_equilibrium(cc, cspace, SolveConfig(lam=lam, tol=1e-12))
    outputs.append((cc, cspace, crep))
    outputs.append((cc, cspace, solve_control_equilibrium(cc, cspace, SolveConfig(anneal=(1.0, 0.5, 1e-3)))))
    for sc, sp, r in outputs:
        cm = control_model(sc, sp, r.alpha, r.mf)
        worst = max(worst, dynamics_residual(r.flow, cm), r.flow.mass_error(),
                    -min(float(v.min()) for v in r.flow.v))
    cert = verify_control(crep, cc, cspace, 1e-6)
    fam = family_oracle(cc, cspace, lam, np.linspace(0, 1, 101))
    best = fam["best"]
    agree = control_flow_distance(fam["mean_field"][best], crep.mf)
    ok = worst <= 1e-10 and iters <= 2 and cert.ok and fam["residual"][best] <= 1e-6 and agree <= 1e-6
    return report(10, ok, f"D residual={worst:.1e}; decoupled iterations={iters}; certificate at 1e-6 "
                          f"{'passes' if cert.ok else 'fails'}; grid oracle c={fam['c'][best]} "
                          f"(residual {fam['residual'][best]:.1e}, distance to solver {agree:.1e})")


def check_11(tmp):
    tmp = Path(tmp)
    runs = [
        ["anneal", "--scenario", "builtin:bankrun-toy", "--seed", "7"],
        ["solve", "--scenario", "builtin:paper-ex-2.1", "--lambda", "0.05"],
        ["solve", "--scenario", "builtin:control-toy-coupled", "--lambda", "0.1"],
    ]
    same = True
    n_files = 0
    for i, args in enumerate(runs):
        dirs = []
        for rep in ("a", "b"):
            out = tmp / f"run{i}{rep}"
            subprocess.run([sys.executable, "-m", "majorminor", *args, "--out", str(out)], check=True,
                           capture_output=True)
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir())
        same &= names == sorted(p.name for p in dirs[1].iterdir())
        for name in names:
            same &= (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
            n_files += 1
    return report(11, same, f"{n_files} output files byte-identical across repeated invocations")


# --------------------------------------------------------------------------

@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n):
    assert globals()[f"check_{n}"]()


def test_criterion_11(tmp_path):
    assert check_11(tmp_path)


if __name__ == "__main__":
    import tempfile
    results = [globals()[f"check_{n}"]() for n in range(1, 11)]
    with tempfile.TemporaryDirectory() as d:
        results.append(check_11(d))
    sys.exit(0 if all(results) else 1)
