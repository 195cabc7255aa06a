"""Dense revised simplex for  max c.x  s.t.  A x = b, x >= 0.

Two phases.  The starting basis reuses any column that is a positive unit
vector in its row (slack-like columns); only the remaining rows get
artificial variables.  Pricing is Dantzig's largest reduced cost; after a
run of degenerate pivots it switches to Bland's smallest-index rule until a
pivot makes progress again, which rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

FEAS_TOL = 1e-9
OPT_TOL = 1e-11
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 40
DEGENERATE_RUN = 25


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    basis: np.ndarray
    iterations: int
    pivots_bland: int


class _Tableau:
    def __init__(self, A, b, c, basis, max_iter):
        self.A, self.b, self.c = A, b, c
        self.basis = np.array(basis, dtype=int)
        self.max_iter = max_iter
        self.iterations = 0
        self.bland_pivots = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalFailure("basis matrix became singular") from None
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-14] = 0.0
        self.since_refactor = 0

    def run(self, allowed: np.ndarray):
        degenerate = 0
        use_bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex did not finish within {self.max_iter} iterations")
            y = self.c[self.basis] @ self.Binv
            d = self.c - y @ self.A
            d[self.basis] = 0.0
            d[~allowed] = 0.0
            cand = np.flatnonzero(d > OPT_TOL * (1.0 + np.abs(self.c)))
            if cand.size == 0:
                return
            j = int(cand[0]) if use_bland else int(cand[np.argmax(d[cand])])
            col = self.Binv @ self.A[:, j]
            pos = np.flatnonzero(col > PIVOT_TOL)
            if pos.size == 0:
                raise NumericalFailure("linear program is unbounded")
            ratios = self.xB[pos] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12]
            if use_bland:
                r = int(ties[np.argmin(self.basis[ties])])
                self.bland_pivots += 1
            else:
                r = int(ties[np.argmax(col[ties])])
            step = self.xB[r] / col[r]
            self.pivot(r, j, col)
            if step <= 1e-14:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    use_bland = True
            else:
                degenerate = 0
                use_bland = False

    def pivot(self, r, j, col):
        piv = col[r]
        step = self.xB[r] / piv
        self.xB = self.xB - step * col
        self.xB[r] = step
        row = self.Binv[r] / piv
        self.Binv = self.Binv - np.outer(col, row)
        self.Binv[r] = row
        self.basis[r] = j
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()
        self.xB[np.abs(self.xB) < 1e-14] = 0.0


def simplex(c, A_eq, b_eq, max_iter: int = 50_000) -> LPResult:
    """Maximize c.x over {x >= 0 : A_eq x = b_eq}."""
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("inconsistent LP dimensions")
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # starting basis: positive unit columns where available, artificials elsewhere
    basis = np.full(m, -1)
    nnz = np.count_nonzero(A, axis=0)
    for j in np.flatnonzero(nnz == 1):
        i = int(np.flatnonzero(A[:, j])[0])
        if basis[i] < 0 and A[i, j] > 0:
            basis[i] = j
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    if n_art:
        art = np.zeros((m, n_art))
        art[need, np.arange(n_art)] = 1.0
        A_full = np.hstack([A, art])
        basis[need] = n + np.arange(n_art)
    else:
        A_full = A
    iters = 0
    bland = 0
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = -1.0
        tab = _Tableau(A_full, b, c1, basis, max_iter)
        tab.run(np.ones(n + n_art, dtype=bool))
        if tab.xB[tab.basis >= n].sum() > FEAS_TOL * (1.0 + np.abs(b).sum()):
            raise NumericalFailure("linear program is infeasible")
        _drive_out_artificials(tab, n)
        basis = tab.basis
        iters, bland = tab.iterations, tab.bland_pivots
        max_iter -= iters
    c2 = np.concatenate([c, np.zeros(n_art)])
    tab = _Tableau(A_full, b, c2, basis, max_iter)
    allowed = np.zeros(n + n_art, dtype=bool)
    allowed[:n] = True
    tab.run(allowed)
    tab.refactor()
    x = np.zeros(n + n_art)
    x[tab.basis] = tab.xB
    x = np.maximum(x[:n], 0.0)
    return LPResult(x, float(c @ x), tab.basis.copy(), iters + tab.iterations, bland + tab.bland_pivots)


def _drive_out_artificials(tab: _Tableau, n: int):
    """Pivot zero-valued artificials out of the basis where a real column allows it."""
    for r in np.flatnonzero(tab.basis >= n):
        row = tab.Binv[r] @ tab.A[:, :n]
        cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        cand = cand[~np.isin(cand, tab.basis)]
        if cand.size:
            j = int(cand[np.argmax(np.abs(row[cand]))])
            tab.pivot(r, j, tab.Binv @ tab.A[:, j])
        # otherwise the row is redundant; the artificial stays basic at zero
