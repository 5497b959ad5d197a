"""Self-contained dense two-phase simplex for small LPs.

Solves  minimize c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Meant for the tiny per-step dispatch programs (tens of variables); dense
tableau with Dantzig pricing, lowest-index tie-breaking and a Bland fallback
for anti-cycling, so the result is deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-9


@dataclass
class LPResult:
    x: np.ndarray | None
    fun: float | None
    status: str  # optimal | infeasible | unbounded | stalled
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
             max_iter: int | None = None) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Equality form with slacks on <= rows; flip rows to make b >= 0.
    A = np.block([
        [A_ub, np.eye(m_ub)],
        [A_eq, np.zeros((m_eq, m_ub))],
    ]) if m else np.zeros((0, n + m_ub))
    b = np.concatenate([b_ub, b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)

    # Artificials where no natural +1 basis column exists.
    need_art = np.concatenate([flip[:m_ub], np.ones(m_eq, dtype=bool)]) if m else np.zeros(0, bool)
    art_rows = np.flatnonzero(need_art)
    n_art = art_rows.size
    ncols = n + m_ub + n_art
    T = np.zeros((m, ncols + 1))
    T[:, :n + m_ub] = A
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    for i in range(m_ub):
        basis[i] = n + i  # slack
    for k, i in enumerate(art_rows):
        T[i, n + m_ub + k] = 1.0
        basis[i] = n + m_ub + k

    if max_iter is None:
        max_iter = 200 + 50 * (m + ncols)
    iters = 0

    def pivot(i, j):
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        T[:] = T - np.outer(col, T[i])
        basis[i] = j

    def run(cost: np.ndarray, allowed: np.ndarray) -> str:
        nonlocal iters
        bland_after = 50 + 10 * (m + ncols)
        local = 0
        while True:
            if iters >= max_iter:
                return "stalled"
            reduced = cost - cost[basis] @ T[:, :ncols]
            reduced[~allowed] = 0.0
            if local < bland_after:
                j = int(np.argmin(reduced))
                if reduced[j] >= -_TOL:
                    return "optimal"
            else:  # Bland anti-cycling
                cand = np.flatnonzero(reduced < -_TOL)
                if cand.size == 0:
                    return "optimal"
                j = int(cand[0])
            col = T[:, j]
            pos = col > _TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = T[pos, -1] / col[pos]
            rmin = ratios.min()
            ties = np.flatnonzero(ratios <= rmin + _TOL)
            i = int(ties[np.argmin(basis[ties])])
            pivot(i, j)
            iters += 1
            local += 1

    allowed = np.ones(ncols, dtype=bool)
    if n_art:
        c1 = np.zeros(ncols)
        c1[n + m_ub:] = 1.0
        status = run(c1, allowed)
        if status != "optimal":
            return LPResult(None, None, status, iters)
        if float(c1[basis] @ T[:, -1]) > 1e-7:
            return LPResult(None, None, "infeasible", iters)
        # Drive leftover zero-level artificials out of the basis.
        drop = []
        for i in range(m):
            if basis[i] >= n + m_ub:
                row = np.abs(T[i, :n + m_ub])
                j = int(np.argmax(row))
                if row[j] > _TOL:
                    pivot(i, j)
                else:
                    drop.append(i)  # redundant constraint
        if drop:
            keep = np.setdiff1d(np.arange(m), drop)
            T = T[keep]
            basis = basis[keep]
            m = keep.size
        allowed[n + m_ub:] = False

    c2 = np.zeros(ncols)
    c2[:n] = c
    status = run(c2, allowed)
    if status != "optimal":
        return LPResult(None, None, status, iters)
    x = np.zeros(ncols)
    x[basis] = T[:, -1]
    x = x[:n]
    return LPResult(x, float(c @ x), "optimal", iters)
