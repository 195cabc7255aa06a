"""Problem instances: state/action sets, affine mean-field tables, file I/O.

Every kernel and reward is tabulated as ``base + sum_k phi_k(m) * coef[k]``
where ``phi(m)`` is a short feature vector of a sub-probability vector over
the minor grid.  Affine dependence keeps files finite and lets validation
check the whole feature box exactly (an affine function attains its extrema
at the box corners, coordinate by coordinate).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import FeatureOutOfRange, NonFiniteValue, ParseError, ValidationError

FORMAT_VERSION = 1
ROW_TOL = 1e-12
BOX_TOL = 1e-9


# --------------------------------------------------------------------------
# action spaces
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionSpace:
    """Finite action list or a uniform grid over a box.

    ``weights`` are the reference measure of each action: 1 for finite sets,
    the cell volume for grids.  Policies are stored as densities against this
    measure so that ``sum(weights * density) == 1``.
    """

    kind: str
    points: np.ndarray
    weights: np.ndarray
    lo: tuple = ()
    hi: tuple = ()
    n: tuple = ()

    @classmethod
    def finite(cls, values: Sequence) -> "ActionSpace":
        pts = np.asarray(values, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValidationError("finite action list must be a non-empty 1-d list")
        return cls("finite", pts, np.ones(pts.size))

    @classmethod
    def grid(cls, lo, hi, n) -> "ActionSpace":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = np.atleast_1d(np.asarray(n, dtype=int))
        if not (lo.shape == hi.shape == n.shape):
            raise ValidationError("grid lo/hi/n must have the same dimension")
        if np.any(hi <= lo) or np.any(n < 1):
            raise ValidationError("grid needs hi > lo and n >= 1 in every dimension")
        axes = [l + (np.arange(k) + 0.5) * (h - l) / k for l, h, k in zip(lo, hi, n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        cell = float(np.prod((hi - lo) / n))
        return cls("grid", pts, np.full(pts.shape[0], cell),
                    tuple(lo.tolist()), tuple(hi.tolist()), tuple(n.tolist()))

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else int(self.points.shape[1])

    def to_json(self) -> dict:
        if self.kind == "finite":
            return {"kind": "finite", "values": self.points.tolist()}
        return {"kind": "grid", "lo": list(self.lo), "hi": list(self.hi), "n": list(self.n)}

    @classmethod
    def from_json(cls, d: Mapping) -> "ActionSpace":
        kind = d.get("kind")
        if kind == "finite":
            return cls.finite(d["values"])
        if kind == "grid":
            return cls.grid(d["lo"], d["hi"], d["n"])
        raise ParseError(f"unknown action space kind {kind!r}")


# --------------------------------------------------------------------------
# mean-field features
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureMap:
    """Feature vector of a sub-probability vector ``m`` over the minor grid.

    kinds: ``none`` (no coupling), ``mass`` (m(S)), ``cells`` (every cell
    mass), ``moment`` (first moment, one entry per grid dimension).
    """

    kind: str
    grid: np.ndarray

    def __post_init__(self):
        if self.kind not in ("none", "mass", "cells", "moment"):
            raise ValidationError(f"unknown feature kind {self.kind!r}")

    @property
    def dim(self) -> int:
        if self.kind == "none":
            return 0
        if self.kind == "mass":
            return 1
        if self.kind == "cells":
            return int(self.grid.shape[0])
        return 1 if self.grid.ndim == 1 else int(self.grid.shape[1])

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.dim
        if self.kind in ("none", "mass", "cells"):
            return np.zeros(k), np.ones(k)
        g = self.grid.reshape(self.grid.shape[0], -1)
        return np.minimum(0.0, g.min(axis=0)), np.maximum(0.0, g.max(axis=0))

    def __call__(self, m: np.ndarray) -> np.ndarray:
        """Features of one vector (shape (S,)) or a batch (shape (n, S))."""
        m = np.asarray(m, dtype=float)
        if self.kind == "none":
            return np.zeros(m.shape[:-1] + (0,))
        if self.kind == "mass":
            return m.sum(axis=-1, keepdims=True)
        if self.kind == "cells":
            return m.copy()
        g = self.grid.reshape(self.grid.shape[0], -1)
        return m @ g


# --------------------------------------------------------------------------
# affine tables
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineTable:
    base: np.ndarray
    coef: np.ndarray  # shape (K,) + base.shape

    def at(self, idx: tuple, feats: np.ndarray) -> np.ndarray:
        """Evaluate at index ``idx`` (arrays of length n) for features (n, K)."""
        out = self.base[idx]
        if self.coef.shape[0]:
            c = self.coef[(slice(None),) + idx]
            out = out + np.einsum("nk,kn...->n...", feats, c)
        return out

    def to_json(self) -> dict:
        return {"base": self.base.tolist(), "coef": self.coef.tolist()}


def _table(d, shape: tuple, k: int, name: str) -> AffineTable:
    if isinstance(d, Mapping):
        base, coef = d.get("base"), d.get("coef")
    else:
        base, coef = d, None
    try:
        base = np.asarray(base, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name}: base is not a numeric array ({exc})") from None
    if base.shape != shape:
        raise ValidationError(f"{name}: base has shape {base.shape}, expected {shape}")
    if coef is None or (k == 0 and len(coef) == 0):
        coef = np.zeros((k,) + shape)
    else:
        try:
            coef = np.asarray(coef, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{name}: coef is not a numeric array ({exc})") from None
        if coef.shape != (k,) + shape:
            raise ValidationError(f"{name}: coef has shape {coef.shape}, expected {(k,) + shape}")
    if not (np.all(np.isfinite(base)) and np.all(np.isfinite(coef))):
        raise NonFiniteValue(f"{name}: non-finite entries")
    return AffineTable(base, coef)


# --------------------------------------------------------------------------
# path windows
# --------------------------------------------------------------------------

def window_index(history: Sequence[int], k: int, n_states: int) -> int:
    """Flat index of the last ``k`` states of ``history``.

    Short histories are padded at the front with their first state.
    """
    h = list(history)
    if len(h) < k:
        h = [h[0]] * (k - len(h)) + h
    return int(np.ravel_multi_index(tuple(h[-k:]), (n_states,) * k))


# --------------------------------------------------------------------------
# scenario
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete major-minor stopping game on finite grids.

    Index conventions (``w`` is the path-window index, see ``window_index``):

    ========================== ================================
    major_kernel               [t][w][a][x0']    t = 0..T-1
    minor_kernel               [t][x][w][x']     t = 0..T-1
    major_running_reward       [t][x0][a]        features of m_t
    major_terminal_reward      [x0]              features of mu_T
    minor_continuation_reward  [t][w][x]         features of m_t
    minor_stopping_reward      [t][w][x]         t = 0..T, features of mu_t
    ========================== ================================
    """

    name: str
    horizon: int
    major_states: tuple
    minor_grid: np.ndarray
    actions: ActionSpace
    features: FeatureMap
    major_kernel: AffineTable
    minor_kernel: AffineTable
    major_running_reward: AffineTable
    major_terminal_reward: AffineTable
    minor_continuation_reward: AffineTable
    minor_stopping_reward: AffineTable
    initial_major_law: np.ndarray
    initial_minor_law: np.ndarray
    path_window: int = 1
    stopping_mode: bool = False
    absorbing: str | None = None
    description: str = ""
    callbacks: Mapping[str, Callable] = field(default_factory=dict)

    # -- sizes -----------------------------------------------------------
    @property
    def n_major(self) -> int:
        return len(self.major_states)

    @property
    def n_minor(self) -> int:
        return int(self.minor_grid.shape[0])

    @property
    def n_actions(self) -> int:
        return self.actions.size

    @property
    def n_windows(self) -> int:
        return self.n_major ** self.path_window

    @property
    def n_features(self) -> int:
        return self.features.dim

    @property
    def absorbing_index(self) -> int | None:
        if self.absorbing is None:
            return None
        return self.major_states.index(self.absorbing)

    def window(self, history: Sequence[int]) -> int:
        return window_index(history, self.path_window, self.n_major)

    def feats(self, m: np.ndarray, check: bool = True) -> np.ndarray:
        f = self.features(m)
        if check and f.size:
            lo, hi = self.features.box()
            if np.any(f < lo - BOX_TOL) or np.any(f > hi + BOX_TOL):
                raise FeatureOutOfRange(f"features {np.asarray(f).tolist()} outside box")
        return f

    # -- vectorised evaluation over one time slice -----------------------
    # ``hist`` is an (n, t+1) integer array of major histories.

    def _windows(self, hist: np.ndarray) -> np.ndarray:
        return np.array([self.window(h) for h in hist], dtype=int)

    def _callback(self, name, t, hist, m, width):
        fn = self.callbacks.get(name)
        if fn is None:
            return None
        rows = [np.asarray(fn(t, tuple(int(s) for s in h), np.asarray(mi)), dtype=float)
                for h, mi in zip(hist, m)]
        return np.stack(rows) if rows else np.zeros((0,) + width)

    def major_kernel_rows(self, t: int, hist: np.ndarray, m_t: np.ndarray) -> np.ndarray:
        """Transition rows (n, A, S0) for step t -> t+1."""
        out = self._callback("major_kernel", t, hist, m_t, (self.n_actions, self.n_major))
        if out is not None:
            _check_rows(out, f"major_kernel callback t={t}")
            return out
        w = self._windows(hist)
        return self.major_kernel.at((np.full(w.size, t), w), self.feats(m_t))

    def minor_kernel_rows(self, t: int, hist: np.ndarray, m_t: np.ndarray) -> np.ndarray:
        """Transition rows (n, S, S) for step t -> t+1, indexed [node, x, x']."""
        out = self._callback("minor_kernel", t, hist, m_t, (self.n_minor, self.n_minor))
        if out is not None:
            _check_rows(out, f"minor_kernel callback t={t}")
            return out
        w = self._windows(hist)
        n = w.size
        S = self.n_minor
        feats = self.feats(m_t)
        # table is [t][x][w][x']; gather into [node, x, x']
        tt = np.full((n, S), t)
        xx = np.broadcast_to(np.arange(S), (n, S))
        ww = np.broadcast_to(w[:, None], (n, S))
        flat = self.minor_kernel.at((tt.ravel(), xx.ravel(), ww.ravel()), np.repeat(feats, S, axis=0))
        return flat.reshape(n, S, S)

    def major_running(self, t: int, hist: np.ndarray, m_t: np.ndarray) -> np.ndarray:
        out = self._callback("major_running_reward", t, hist, m_t, (self.n_actions,))
        if out is not None:
            return out
        s = hist[:, -1]
        return self.major_running_reward.at((np.full(s.size, t), s), self.feats(m_t))

    def major_terminal(self, hist: np.ndarray, mu_T: np.ndarray) -> np.ndarray:
        out = self._callback("major_terminal_reward", self.horizon, hist, mu_T, ())
        if out is not None:
            return out
        s = hist[:, -1]
        return self.major_terminal_reward.at((s,), self.feats(mu_T))

    def minor_running(self, t: int, hist: np.ndarray, m_t: np.ndarray) -> np.ndarray:
        out = self._callback("minor_continuation_reward", t, hist, m_t, (self.n_minor,))
        if out is not None:
            return out
        w = self._windows(hist)
        return self.minor_continuation_reward.at((np.full(w.size, t), w), self.feats(m_t))

    def minor_stopping(self, t: int, hist: np.ndarray, mu_t: np.ndarray) -> np.ndarray:
        out = self._callback("minor_stopping_reward", t, hist, mu_t, (self.n_minor,))
        if out is not None:
            return out
        w = self._windows(hist)
        return self.minor_stopping_reward.at((np.full(w.size, t), w), self.feats(mu_t))

    def reward_bound(self) -> float:
        """max |reward| over tables and the feature box (affine => exact)."""
        lo, hi = self.features.box()
        best = 0.0
        for tab in (self.major_running_reward, self.major_terminal_reward,
                    self.minor_continuation_reward, self.minor_stopping_reward):
            spread = np.zeros_like(tab.base)
            for k in range(tab.coef.shape[0]):
                spread = spread + np.maximum(np.abs(lo[k] * tab.coef[k]), np.abs(hi[k] * tab.coef[k]))
            best = max(best, float(np.max(np.abs(tab.base) + spread, initial=0.0)))
        return best

    # -- validation ------------------------------------------------------
    def validate(self) -> "Scenario":
        T = self.horizon
        if T < 1:
            raise ValidationError("horizon must be >= 1")
        if len(set(self.major_states)) != len(self.major_states):
            raise ValidationError("major_states must be distinct")
        if self.path_window < 1:
            raise ValidationError("path_window must be >= 1")
        _check_law(self.initial_major_law, self.n_major, "initial_major_law")
        _check_law(self.initial_minor_law, self.n_minor, "initial_minor_law")
        lo, hi = self.features.box()
        _check_kernel(self.major_kernel, lo, hi, "major_kernel", ("t", "w", "a"))
        _check_kernel(self.minor_kernel, lo, hi, "minor_kernel", ("t", "x", "w"))
        if self.stopping_mode:
            self._validate_stopping(lo, hi)
        return self

    def _validate_stopping(self, lo, hi):
        d = self.absorbing_index
        if d is None:
            raise ValidationError("stopping_mode requires an absorbing major state")
        if self.actions.kind != "finite" or self.actions.size != 2:
            raise ValidationError("stopping_mode requires the finite action set {0 (continue), 1 (stop)}")
        k = self.n_major
        delta = np.zeros(k)
        delta[d] = 1.0
        base, coef = self.major_kernel.base, self.major_kernel.coef
        for w in range(self.n_windows):
            current = np.unravel_index(w, (k,) * self.path_window)[-1]
            acts = (0, 1) if current == d else (1,)
            for t in range(self.horizon):
                for a in acts:
                    if not np.allclose(base[t, w, a], delta, atol=ROW_TOL, rtol=0) or np.any(coef[:, t, w, a] != 0):
                        raise ValidationError(
                            f"major_kernel[{t}][{w}][{a}] must be the point mass on {self.absorbing!r} in stopping_mode")
        fb, fc = self.major_running_reward.base, self.major_running_reward.coef
        diff_b = fb[:, d, 1] - fb[:, d, 0]
        diff_c = fc[:, :, d, 1] - fc[:, :, d, 0]
        worst = diff_b + sum(np.minimum(lo[j] * diff_c[j], hi[j] * diff_c[j]) for j in range(fc.shape[0]))
        if np.any(worst < -ROW_TOL):
            t = int(np.argmin(worst))
            raise ValidationError(f"major_running_reward[{t}]: stopping at the absorbing state must not pay less than continuing")

    # -- serialisation ---------------------------------------------------
    def to_json(self) -> dict:
        if self.callbacks:
            raise ValidationError("scenarios with callbacks cannot be serialised")
        grid = self.minor_grid.tolist()
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "description": self.description,
            "horizon": self.horizon,
            "major_states": list(self.major_states),
            "absorbing": self.absorbing,
            "minor_grid": grid,
            "actions": self.actions.to_json(),
            "features": {"kind": self.features.kind},
            "path_window": self.path_window,
            "stopping_mode": self.stopping_mode,
            "major_kernel": self.major_kernel.to_json(),
            "minor_kernel": self.minor_kernel.to_json(),
            "major_running_reward": self.major_running_reward.to_json(),
            "major_terminal_reward": self.major_terminal_reward.to_json(),
            "minor_continuation_reward": self.minor_continuation_reward.to_json(),
            "minor_stopping_reward": self.minor_stopping_reward.to_json(),
            "initial_major_law": self.initial_major_law.tolist(),
            "initial_minor_law": self.initial_minor_law.tolist(),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "Scenario":
        if not isinstance(d, Mapping):
            raise ParseError("scenario document must be an object")
        if d.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported format_version {d.get('format_version')!r}")
        try:
            T = int(d["horizon"])
            states = tuple(str(s) for s in d["major_states"])
            grid = np.asarray(d["minor_grid"], dtype=float)
            actions = ActionSpace.from_json(d["actions"])
            features = FeatureMap(d.get("features", {"kind": "none"})["kind"], grid)
            kwin = int(d.get("path_window", 1))
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc)) from None
        if grid.ndim not in (1, 2) or grid.shape[0] == 0:
            raise ValidationError("minor_grid must be a non-empty list of points")
        S0, S, A, K = len(states), grid.shape[0], actions.size, features.dim
        W = S0 ** kwin
        try:
            tabs = dict(
                major_kernel=_table(d["major_kernel"], (T, W, A, S0), K, "major_kernel"),
                minor_kernel=_table(d["minor_kernel"], (T, S, W, S), K, "minor_kernel"),
                major_running_reward=_table(d["major_running_reward"], (T, S0, A), K, "major_running_reward"),
                major_terminal_reward=_table(d["major_terminal_reward"], (S0,), K, "major_terminal_reward"),
                minor_continuation_reward=_table(d["minor_continuation_reward"], (T, W, S), K,
                                                 "minor_continuation_reward"),
                minor_stopping_reward=_table(d["minor_stopping_reward"], (T + 1, W, S), K,
                                             "minor_stopping_reward"),
            )
            p0 = np.asarray(d["initial_major_law"], dtype=float)
            q0 = np.asarray(d["initial_minor_law"], dtype=float)
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}") from None
        absorbing = d.get("absorbing")
        if absorbing is not None and absorbing not in states:
            raise ValidationError(f"absorbing state {absorbing!r} not among major_states")
        return cls(
            name=str(d.get("name", "unnamed")), horizon=T, major_states=states, minor_grid=grid,
            actions=actions, features=features, initial_major_law=p0, initial_minor_law=q0,
            path_window=kwin, stopping_mode=bool(d.get("stopping_mode", False)), absorbing=absorbing,
            description=str(d.get("description", "")), **tabs,
        ).validate()


def _check_law(p, n, name):
    if p.shape != (n,):
        raise ValidationError(f"{name} has shape {p.shape}, expected {(n,)}")
    if not np.all(np.isfinite(p)):
        raise NonFiniteValue(f"{name}: non-finite entries")
    if np.any(p < 0) or abs(p.sum() - 1.0) > ROW_TOL:
        raise ValidationError(f"{name} is not a probability vector (sum={p.sum()!r})")


def _check_kernel(tab: AffineTable, lo, hi, name, labels):
    sums = tab.base.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        i = tuple(int(v) for v in bad[0])
        raise ValidationError(f"{name} row {_label(labels, i)} sums to {sums[i]!r}, not 1")
    if tab.coef.shape[0]:
        csum = tab.coef.sum(axis=-1)
        bad = np.argwhere(np.abs(csum) > ROW_TOL)
        if bad.size:
            i = tuple(int(v) for v in bad[0])
            raise ValidationError(
                f"{name} row {_label(labels, i[1:])}: feature {i[0]} coefficients do not sum to 0")
    worst = tab.base.copy()
    for k in range(tab.coef.shape[0]):
        worst = worst + np.minimum(lo[k] * tab.coef[k], hi[k] * tab.coef[k])
    bad = np.argwhere(worst < -ROW_TOL)
    if bad.size:
        i = tuple(int(v) for v in bad[0])
        raise ValidationError(
            f"{name} row {_label(labels, i[:-1])} goes negative inside the feature box (entry {i[-1]})")


def _label(labels, idx):
    return "[" + ", ".join(f"{l}={v}" for l, v in zip(labels, idx)) + "]"


def _check_rows(rows, name):
    if np.any(rows < -ROW_TOL) or np.any(np.abs(rows.sum(axis=-1) - 1.0) > 1e-9):
        raise ValidationError(f"{name}: rows are not probability vectors")


def evaluate_kernel(scenario: Scenario, t: int, state, action, features, *, minor: bool = False) -> np.ndarray:
    """One kernel row at explicit features.

    Major kernel: ``state`` is a major history (tuple of state indices) and
    ``action`` an action index.  Minor kernel: ``state`` is ``(x, history)``
    and ``action`` is ignored.
    """
    if not 0 <= t < scenario.horizon:
        raise ValueError(f"t={t} outside 0..{scenario.horizon - 1}")
    f = np.atleast_1d(np.asarray(features, dtype=float))
    if f.shape != (scenario.n_features,):
        raise FeatureOutOfRange(f"expected {scenario.n_features} features, got {f.shape}")
    lo, hi = scenario.features.box()
    if np.any(f < lo - BOX_TOL) or np.any(f > hi + BOX_TOL):
        raise FeatureOutOfRange(f"features {f.tolist()} outside box [{lo.tolist()}, {hi.tolist()}]")
    if minor:
        x, hist = state
        w = scenario.window(hist)
        return scenario.minor_kernel.at((np.array([t]), np.array([x]), np.array([w])), f[None])[0]
    w = scenario.window(state)
    return scenario.major_kernel.at((np.array([t]), np.array([w]), np.array([action])), f[None])[0]


def load_scenario(path) -> Scenario:
    """Read a scenario file, or ``builtin:<name>`` for a packaged instance."""
    spec = str(path)
    if spec.startswith("builtin:"):
        from .builtins import get_builtin
        return get_builtin(spec[len("builtin:"):])
    p = Path(spec)
    if not p.is_file():
        raise FileNotFoundError(f"scenario not found: {spec}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{spec}: {exc}") from None
    if isinstance(doc, Mapping) and doc.get("variant") == "control":
        from .control import ControlScenario
        return ControlScenario.from_json(doc)
    return Scenario.from_json(doc)


def dumps_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.to_json(), sort_keys=True, indent=1) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(scenario), encoding="utf-8")
