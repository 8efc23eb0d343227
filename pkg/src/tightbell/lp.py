"""Dense two-phase primal simplex with Bland's rule.

Solves  max c.x  subject to  A x = b, x >= 0  for problems of a few hundred
variables. Redundant equality rows are detected after phase one and dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    value: float
    x: np.ndarray
    iterations: int


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    others = np.nonzero(np.abs(tab[:, col]) > 0)[0]
    for r in others:
        if r != row:
            tab[r] -= tab[r, col] * tab[row]


def _run(tab, basis, n_cols, max_iter):
    """Minimize the objective in the last row of ``tab`` over columns < n_cols."""
    it = 0
    while it < max_iter:
        cost = tab[-1, :n_cols]
        candidates = np.nonzero(cost < -PIVOT_TOL)[0]
        if candidates.size == 0:
            return "optimal", it
        col = int(candidates[0])
        column = tab[:-1, col]
        pos = np.nonzero(column > PIVOT_TOL)[0]
        if pos.size == 0:
            return "unbounded", it
        ratios = tab[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[np.abs(ratios - best) <= 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
        it += 1
    raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, a_eq, b_eq, max_iter=100000):
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = a.shape
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1
    # phase one: artificial variables n..n+m-1
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -a.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _, it1 = _run(tab, basis, n + m, max_iter)
    if -tab[-1, -1] > FEAS_TOL * max(1.0, b.sum()):
        return LPResult("infeasible", float("nan"), np.full(n, np.nan), it1)
    # drive artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cols = np.nonzero(np.abs(tab[r, :n]) > PIVOT_TOL)[0]
            if cols.size:
                _pivot(tab, r, int(cols[0]))
                basis[r] = int(cols[0])
                keep.append(r)
        else:
            keep.append(r)
    rows = keep
    tab2 = np.zeros((len(rows) + 1, n + 1))
    tab2[:-1, :n] = tab[rows, :n]
    tab2[:-1, -1] = tab[rows, -1]
    basis2 = [basis[r] for r in rows]
    # phase two objective: minimize -c, expressed in the current basis
    tab2[-1, :n] = -c
    for r, j in enumerate(basis2):
        if tab2[-1, j] != 0.0:
            tab2[-1] -= tab2[-1, j] * tab2[r]
    status, it2 = _run(tab2, basis2, n, max_iter)
    x = np.zeros(n)
    for r, j in enumerate(basis2):
        x[j] = tab2[r, -1]
    if status == "unbounded":
        return LPResult(status, float("inf"), x, it1 + it2)
    return LPResult("optimal", float(c @ x), x, it1 + it2)
