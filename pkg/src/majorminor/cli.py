"""Command-line front door.

Exit codes: 0 success, 1 usage or input error, 2 not converged or
certificate failed, 3 budget refusal.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .builtins import builtin_scenarios
from .control import ControlScenario, control_model, control_major_model, family_oracle
from .control import ControlMeanField, optimal_values, solve_control_equilibrium, verify_control
from .equilibrium import SolveConfig, anneal_to_relaxed, solve_regularized_equilibrium, verify
from .errors import CapacityError, MajorMinorError, NotConverged, ShapeMismatch
from .flows import MeanField
from .major import MajorPolicy, major_model, solve_regularized
from .minor import minor_model, solve_dp
from .oracle import DEFAULT_RULE_BUDGET, brute_force_control, brute_force_stopping
from .paths import build_path_space
from .report import dumps_report, load_report, report_files
from .scenario import dumps_scenario, load_scenario

EXIT_OK, EXIT_INPUT, EXIT_FAILED, EXIT_BUDGET = 0, 1, 2, 3


class InputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file or builtin:NAME")
    common.add_argument("--lambda", dest="lam", type=float, default=0.1, help="entropy weight (> 0)")
    common.add_argument("--damping", type=float, default=0.5)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--max-iters", type=int, default=500)
    common.add_argument("--tie-q", type=float, default=None,
                        help="weight on stopping (or on the last maximizer) at exact ties")
    common.add_argument("--anneal-start", type=float, default=1.0)
    common.add_argument("--anneal-factor", type=float, default=0.5)
    common.add_argument("--anneal-min", type=float, default=1e-6)
    common.add_argument("--eps", type=float, default=1e-6, help="certificate tolerance")
    common.add_argument("--eps-support", type=float, default=1e-3)
    common.add_argument("--seed", type=int, default=None, help="random initial mean field")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="csv writes the report plus per-quantity CSVs; json writes the report only")
    common.add_argument("--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="majorminor", description="major-minor mean-field game solver")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="verb", required=True)
    sub.add_parser("solve", parents=[common], help="regularized equilibrium at fixed lambda")
    sub.add_parser("anneal", parents=[common], help="anneal lambda to zero and certify")
    v = sub.add_parser("verify", parents=[common], help="recompute the certificate of a saved report")
    v.add_argument("report")
    o = sub.add_parser("oracle", parents=[common], help="brute-force minor best response")
    o.add_argument("--report", dest="report", help="take the mean field and major policy from a report")
    o.add_argument("--stop-at", type=int, default=None,
                   help="major plays its first action before time K and its last action from K on")
    o.add_argument("--budget", type=int, default=DEFAULT_RULE_BUDGET)
    o.add_argument("--grid", type=int, default=101, help="family grid size (control scenarios)")
    e = sub.add_parser("export", parents=[common], help="write the scenario, or a report's CSVs")
    e.add_argument("report", nargs="?")
    sub.add_parser("scenarios", help="list packaged scenarios")
    return ap


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def _workers():
    raw = os.environ.get("MAJORMINOR_WORKERS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"MAJORMINOR_WORKERS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"MAJORMINOR_WORKERS must be a positive integer, got {raw!r}")
    return n


def _config(args, progress=None) -> SolveConfig:
    if args.lam is not None and args.lam <= 0 and args.verb == "solve":
        raise InputError("regularized solve requires lambda > 0; use 'anneal' to approach lambda = 0")
    anneal = (args.anneal_start, args.anneal_factor, args.anneal_min) if args.verb == "anneal" else None
    tie = 0.0 if args.tie_q is None else args.tie_q
    cfg = SolveConfig(lam=args.lam if args.verb != "anneal" else args.anneal_start, damping=args.damping,
                      tol=args.tol, max_iters=args.max_iters, tie_q=tie, anneal=anneal, seed=args.seed,
                      eps_final=args.eps, eps_support=args.eps_support, progress=progress)
    try:
        cfg.validate()
    except MajorMinorError as exc:
        raise InputError(str(exc)) from None
    if not args.eps > 0:
        raise InputError("eps must be positive")
    return cfg


def _scenario(args, fallback_name=None):
    spec = args.scenario
    if spec is None and fallback_name:
        spec = f"builtin:{fallback_name}"
    if spec is None:
        raise InputError("--scenario is required")
    try:
        sc = load_scenario(spec)
        space = build_path_space(sc)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    return sc, space


def _out_dir(args, required=True):
    if args.out is None:
        if required:
            raise InputError("--out is required")
        return None
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise InputError(f"--out exists and is not a directory: {out}")
    return out


def _write(out: Path, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out / name).write_text(files[name], encoding="utf-8")


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------

def _solve(args, err) -> int:
    progress = (lambda line: print(line, file=err)) if args.verbose else None
    cfg = _config(args, progress)
    out = _out_dir(args)
    sc, space = _scenario(args)
    if isinstance(sc, ControlScenario):
        rep = solve_control_equilibrium(sc, space, cfg, tie_q=args.tie_q)
    elif args.verb == "anneal":
        rep = anneal_to_relaxed(sc, space, cfg)
    else:
        rep = solve_regularized_equilibrium(sc, space, cfg)
    files = {"report.json": dumps_report(rep)}
    if args.format == "csv":
        files.update(report_files(rep, space))
    _write(out, files)
    status = "converged" if rep.converged else "NOT converged"
    print(f"{sc.name}: {rep.mode} lambda={rep.lam:g} iterations={rep.iterations} {status}")
    for k in sorted(rep.residuals):
        print(f"  {k:16s} {rep.residuals[k]:.3e}")
    if rep.certificate is not None:
        for line in rep.certificate.lines():
            print("  " + line)
    if not rep.converged:
        where = f" (stalled at lambda={rep.stalled_lambda:g})" if rep.stalled_lambda is not None else ""
        print(f"not converged{where}", file=err)
        return EXIT_FAILED
    return EXIT_OK


def _load_report(path, sc):
    try:
        return load_report(path, sc)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None


def _report_scenario_name(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8")).get("scenario")
    except (OSError, ValueError, AttributeError):
        return None


def _verify(args, err) -> int:
    if not args.eps > 0:
        raise InputError("eps must be positive")
    sc, space = _scenario(args, _report_scenario_name(args.report))
    rep = _load_report(args.report, sc)
    if isinstance(sc, ControlScenario):
        cert = verify_control(rep, sc, space, args.eps, eps_support=args.eps_support)
    else:
        cert = verify(rep, sc, space, args.eps, eps_support=args.eps_support)
    print(f"{sc.name}: {rep.mode} certificate at eps={args.eps:g}")
    slack = cert.slack()
    for k, v in cert.values.items():
        tol = args.eps_support if k == "support" else args.eps
        s = tol - abs(v) if slack[k] is None else slack[k]
        print(f"  {k:12s} {'pass' if cert.passed[k] else 'FAIL'}  residual={v:.3e}  slack={s:.3e}")
    if not cert.ok:
        failed = ", ".join(k for k, ok in cert.passed.items() if not ok)
        print(f"certificate failed: {failed}", file=err)
        return EXIT_FAILED
    return EXIT_OK


def switch_policy(actions, space, k: int) -> MajorPolicy:
    """Deterministic major policy: first action before time k, last action from k on."""
    dens = []
    w = actions.weights
    for t in range(space.horizon):
        d = np.zeros((space.size(t), actions.size))
        a = 0 if t < k else actions.size - 1
        d[:, a] = 1.0 / w[a]
        dens.append(d)
    return MajorPolicy(actions, dens)


def _oracle(args, err) -> int:
    if args.budget < 1:
        raise InputError("--budget must be positive")
    if args.report and args.stop_at is not None:
        raise InputError("--report and --stop-at are exclusive")
    out = _out_dir(args, required=False)
    sc, space = _scenario(args, _report_scenario_name(args.report) if args.report else None)
    control = isinstance(sc, ControlScenario)
    if args.report:
        rep = _load_report(args.report, sc)
        mf, alpha = rep.mf, rep.alpha
    else:
        if control:
            mf = ControlMeanField.uniform(space, sc.n_minor, sc.n_minor_actions)
        else:
            mf = MeanField.uniform(space, sc.n_minor)
        if args.stop_at is not None:
            alpha = switch_policy(sc.actions, space, args.stop_at)
        else:
            model = control_major_model(sc, space, mf) if control else major_model(sc, space, mf)
            alpha, _ = solve_regularized(sc, space, None if control else mf, args.lam, model=model)
    doc = {"scenario": sc.name, "variant": "control" if control else "stopping"}
    if control:
        cm = control_model(sc, space, alpha, mf)
        value, policy, n = brute_force_control(cm, args.budget)
        V, _ = optimal_values(cm)
        dp = float((cm.start * V[0]).sum())
        doc.update(oracle_value=value, dp_value=dp, policies=n,
                   policy=[p.tolist() for p in policy])
        if sc.n_minor_actions == 2 and args.grid > 1:
            fam = family_oracle(sc, space, args.lam, np.linspace(0, 1, args.grid))
            i = fam["best"]
            doc.update(family_c=fam["c"][i], family_residual=fam["residual"][i])
        print(f"{sc.name}: oracle value {value!r} over {n} policies; dynamic programming {dp!r}")
        if "family_c" in doc:
            print(f"  family search: c={doc['family_c']!r} residual={doc['family_residual']:.3e}")
    else:
        mm = minor_model(sc, space, mf, alpha)
        value, stop, n = brute_force_stopping(mm, args.budget)
        dp, _ = solve_dp(sc, space, mf, alpha, model=mm)
        doc.update(oracle_value=value, dp_value=dp.total, rules=n, stop=[s.tolist() for s in stop])
        print(f"{sc.name}: oracle value {value!r} over {n} rules; dynamic programming {dp.total!r}")
        for t, s in enumerate(stop):
            cells = [f"node {u} x {x}" for u, x in zip(*np.nonzero(s))]
            if cells:
                print(f"  stop at t={t}: {', '.join(cells)}")
    if out is not None:
        _write(out, {"oracle.json": json.dumps(doc, indent=1) + "\n"})
    return EXIT_OK


def _export(args, err) -> int:
    out = _out_dir(args)
    sc, space = _scenario(args, _report_scenario_name(args.report) if args.report else None)
    if args.report:
        rep = _load_report(args.report, sc)
        files = report_files(rep, space)
    else:
        from .report import nodes_csv
        files = {"scenario.json": dumps_scenario(sc), "nodes.csv": nodes_csv(space)}
    _write(out, files)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def _scenarios(args, err) -> int:
    for name, sc in builtin_scenarios():
        kind = "control" if isinstance(sc, ControlScenario) else "stopping"
        desc = sc.description or ""
        print(f"builtin:{name:22s} {kind:8s} T={sc.horizon}  {desc}")
    return EXIT_OK


VERBS = {"solve": _solve, "anneal": _solve, "verify": _verify, "oracle": _oracle,
         "export": _export, "scenarios": _scenarios}


def main(argv=None, out=None, err=None) -> int:
    err = err or sys.stderr
    stdout = sys.stdout
    if out is not None:
        sys.stdout = out
    try:
        try:
            args = _parser().parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_INPUT
        try:
            _workers()
            return VERBS[args.verb](args, err)
        except InputError as exc:
            print(f"error: {exc}", file=err)
            return EXIT_INPUT
        except CapacityError as exc:
            print(f"budget exceeded: {exc}", file=err)
            return EXIT_BUDGET
        except NotConverged as exc:
            print(f"not converged: {exc}", file=err)
            return EXIT_FAILED
        except (ShapeMismatch, MajorMinorError, ValueError) as exc:
            print(f"error: {exc}", file=err)
            return EXIT_INPUT
    finally:
        sys.stdout = stdout


if __name__ == "__main__":
    sys.exit(main())
