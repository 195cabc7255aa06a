"""Report documents and CSV exports.

Every float is written with ``repr`` so files round-trip exactly and
identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .control import ControlMeanField, StateActionFlow
from .equilibrium import Certificate, EquilibriumReport
from .errors import ParseError, ShapeMismatch
from .flows import MajorMarginal, MeanField, OccupationFlow
from .major import MajorPolicy

REPORT_VERSION = 1


def _lists(arrs):
    return [np.asarray(a, dtype=float).tolist() for a in arrs]


def _arrays(lists, name):
    try:
        return [np.asarray(a, dtype=float) for a in lists]
    except (TypeError, ValueError):
        raise ParseError(f"report field {name!r} is not numeric") from None


def report_to_json(report: EquilibriumReport) -> dict:
    doc = {
        "format_version": REPORT_VERSION,
        "kind": "equilibrium_report",
        "variant": report.variant,
        "mode": report.mode,
        "scenario": report.scenario_name,
        "lambda": report.lam,
        "converged": report.converged,
        "iterations": report.iterations,
        "stalled_lambda": report.stalled_lambda,
        "residuals": report.residuals,
        "lambda_trace": report.lambda_trace,
        "certificate": None if report.certificate is None else {
            "eps": report.certificate.eps, "values": report.certificate.values,
            "passed": report.certificate.passed},
        "config": report.config,
        "alpha": _lists(report.alpha.density),
        "p": _lists(report.p.p),
        "major_value": _lists(report.major_values),
        "minor_value": _lists(report.minor_values),
    }
    if report.variant == "control":
        doc["mu"] = _lists(report.mf.mu)
        doc["v"] = _lists(report.flow.v)
    else:
        doc["mu"] = _lists(report.mf.mu)
        doc["m"] = _lists(report.mf.m)
        doc["mu_tilde"] = _lists(report.flow.mu_tilde)
        doc["m_tilde"] = _lists(report.flow.m_tilde)
    return doc


def dumps_report(report: EquilibriumReport) -> str:
    return json.dumps(report_to_json(report), indent=1) + "\n"


def report_from_json(doc: dict, scenario) -> EquilibriumReport:
    if not isinstance(doc, dict) or doc.get("kind") != "equilibrium_report":
        raise ParseError("not an equilibrium report")
    if doc.get("format_version") != REPORT_VERSION:
        raise ParseError(f"unsupported report format_version {doc.get('format_version')!r}")
    try:
        variant = doc["variant"]
        alpha = MajorPolicy(scenario.actions, _arrays(doc["alpha"], "alpha"))
        if variant == "control":
            mf = ControlMeanField(_arrays(doc["mu"], "mu"))
            flow = StateActionFlow(_arrays(doc["v"], "v"))
        else:
            mf = MeanField(_arrays(doc["mu"], "mu"), _arrays(doc["m"], "m"))
            flow = OccupationFlow(_arrays(doc["mu_tilde"], "mu_tilde"), _arrays(doc["m_tilde"], "m_tilde"))
        cert = doc.get("certificate")
        rep = EquilibriumReport(
            variant=variant, mode=doc["mode"], lam=float(doc["lambda"]), mf=mf, alpha=alpha, flow=flow,
            p=MajorMarginal(_arrays(doc["p"], "p")), major_values=_arrays(doc["major_value"], "major_value"),
            minor_values=_arrays(doc["minor_value"], "minor_value"), residuals=dict(doc["residuals"]),
            lambda_trace=list(doc["lambda_trace"]), iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]), stalled_lambda=doc.get("stalled_lambda"),
            certificate=None if cert is None else Certificate(cert["eps"], cert["values"], cert["passed"]),
            scenario_name=doc.get("scenario", ""), config=doc.get("config", {}))
    except KeyError as exc:
        raise ParseError(f"report is missing field {exc.args[0]!r}") from None
    for a in alpha.density:
        if a.ndim != 2:
            raise ShapeMismatch("policy slices must be 2-d")
    return rep


def load_report(path, scenario) -> EquilibriumReport:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"report not found: {path}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return report_from_json(doc, scenario)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def nodes_csv(space) -> str:
    rows = []
    for t in range(space.horizon + 1):
        for i, h in enumerate(space.hist[t]):
            parent = int(space.parent[t][i])
            rows.append((t, i, "" if parent < 0 else parent, ";".join(space.labels[s] for s in h)))
    return _csv(["t", "node_id", "parent_id", "history"], rows)


def policy_csv(alpha: MajorPolicy) -> str:
    rows = [(t, u, a, float(d[u, a])) for t, d in enumerate(alpha.density)
            for u in range(d.shape[0]) for a in range(d.shape[1])]
    return _csv(["t", "node_id", "action_index", "weight"], rows)


def values_csv(values) -> str:
    rows = [(t, u, float(v[u])) for t, v in enumerate(values) for u in range(v.shape[0])]
    return _csv(["t", "node_id", "value"], rows)


def minor_values_csv(values) -> str:
    rows = []
    for t, v in enumerate(values):
        for u in range(v.shape[0]):
            for x in range(v.shape[1]):
                rows.append((t, x, u, float(v[u, x])))
    return _csv(["t", "x_index", "node_id", "value"], rows)


def flow_csv(flow: OccupationFlow) -> str:
    rows = []
    T = len(flow.m_tilde)
    for t, mu in enumerate(flow.mu_tilde):
        for u in range(mu.shape[0]):
            for x in range(mu.shape[1]):
                rows.append((t, x, u, float(mu[u, x]), float(flow.m_tilde[t][u, x]) if t < T else None))
    return _csv(["t", "x_index", "node_id", "mu_tilde", "m_tilde"], rows)


def mean_field_csv(arrs) -> str:
    rows = [(t, u, x, float(a[u, x])) for t, a in enumerate(arrs)
            for u in range(a.shape[0]) for x in range(a.shape[1])]
    return _csv(["t", "node_id", "x_index", "mass"], rows)


def marginal_csv(p: MajorMarginal) -> str:
    rows = [(t, u, float(pt[u])) for t, pt in enumerate(p.p) for u in range(pt.shape[0])]
    return _csv(["t", "node_id", "p"], rows)


def state_action_csv(arrs) -> str:
    rows = []
    for t, v in enumerate(arrs):
        for u in range(v.shape[0]):
            for x in range(v.shape[1]):
                if v.ndim == 3:
                    rows.extend((t, x, u, a, float(v[u, x, a])) for a in range(v.shape[2]))
                else:
                    rows.append((t, x, u, None, float(v[u, x])))
    return _csv(["t", "x_index", "node_id", "action_index", "mass"], rows)


def trace_csv(trace) -> str:
    keys = sorted({k for e in trace for k in e if k not in ("lambda", "iterations", "converged")})
    rows = [[e["lambda"], e["iterations"], e["converged"]] + [e.get(k) for k in keys] for e in trace]
    return _csv(["lambda", "iterations", "converged"] + keys, rows)


def report_files(report: EquilibriumReport, space) -> dict:
    """File name -> text for the per-quantity CSV exports."""
    files = {
        "nodes.csv": nodes_csv(space),
        "policy.csv": policy_csv(report.alpha),
        "values.csv": values_csv(report.major_values),
        "minor_values.csv": minor_values_csv(report.minor_values),
        "marginal.csv": marginal_csv(report.p),
        "lambda_trace.csv": trace_csv(report.lambda_trace),
    }
    if report.variant == "control":
        files["state_action.csv"] = state_action_csv(report.flow.v)
        files["mean_field.csv"] = state_action_csv(report.mf.mu)
    else:
        files["flow.csv"] = flow_csv(report.flow)
        files["mean_field_mu.csv"] = mean_field_csv(report.mf.mu)
        files["mean_field_m.csv"] = mean_field_csv(report.mf.m)
    return files
