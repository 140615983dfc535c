"""Small dense linear-program solver (two-phase tableau simplex).

Kept in-repo on purpose: the transport routines need exact, deterministic,
dependency-free LP solves on problems with at most a few hundred variables.
Bland's smallest-index rule is used for both the entering and the leaving
choice, which rules out cycling.

Solves
    min c.x   s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Pivot / reduced-cost tolerances; generous for the well-scaled problems here.
_RTOL = 1e-10
_PTOL = 1e-11


@dataclass
class LPResult:
    x: np.ndarray
    fun: float
    status: str  # "optimal" | "infeasible" | "unbounded" | "maxiter"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    piv = T[:, col].copy()
    piv[row] = 0.0
    T -= np.outer(piv, T[row])
    basis[row] = col


def _run_simplex(T, basis, ncols, maxiter):
    """Iterate on tableau T (last row = reduced costs, last col = rhs).

    Returns "optimal" or "unbounded" or "maxiter".  Bland's rule throughout.
    """
    m = T.shape[0] - 1
    for _ in range(maxiter):
        r = T[-1, :ncols]
        candidates = np.nonzero(r < -_RTOL)[0]
        if candidates.size == 0:
            return "optimal"
        col = int(candidates[0])  # smallest index: Bland
        colvals = T[:m, col]
        pos = colvals > _PTOL
        if not np.any(pos):
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / colvals[pos]
        best = np.min(ratios)
        ties = np.nonzero(ratios <= best + _PTOL)[0]
        # tie-break on smallest basis index: Bland
        row = int(ties[np.argmin([basis[i] for i in ties])])
        _pivot(T, basis, row, col)
    return "maxiter"


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
             maxiter: int | None = None) -> LPResult:
    """Minimize c.x subject to equality/inequality constraints and x >= 0."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.shape[0]

    rows = []
    rhs = []
    n_slack = 0
    if A_ub is not None:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        n_slack = A_ub.shape[0]
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        for i in range(A_eq.shape[0]):
            rows.append(np.concatenate([A_eq[i], np.zeros(n_slack)]))
            rhs.append(b_eq[i])
    if A_ub is not None:
        for i in range(A_ub.shape[0]):
            slack = np.zeros(n_slack)
            slack[i] = 1.0
            rows.append(np.concatenate([A_ub[i], slack]))
            rhs.append(b_ub[i])

    if not rows:
        if np.all(c >= -_RTOL):
            return LPResult(np.zeros(n), 0.0, "optimal")
        return LPResult(np.zeros(n), -np.inf, "unbounded",
                        "no constraints and a negative cost entry")

    A = np.asarray(rows)
    b = np.asarray(rhs, dtype=float)
    m = A.shape[0]
    ntot = n + n_slack
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    if maxiter is None:
        maxiter = 10000 + 50 * (m + ntot)

    # ---- phase 1: feasibility via artificial variables ----
    T = np.zeros((m + 1, ntot + m + 1))
    T[:m, :ntot] = A
    T[:m, ntot:ntot + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(ntot, ntot + m))
    # reduced costs for min(sum of artificials) with artificial basis
    T[-1, :ntot] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()

    status = _run_simplex(T, basis, ntot, maxiter)
    if status == "maxiter":
        return LPResult(np.zeros(n), np.nan, "maxiter", "phase 1 stalled")
    phase1 = -T[-1, -1]
    if phase1 > 1e-8:
        return LPResult(np.zeros(n), np.nan, "infeasible",
                        f"phase-1 objective {phase1:.3e}")

    # drive remaining artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= ntot:
            j = next((jj for jj in range(ntot) if abs(T[i, jj]) > 1e-9), None)
            if j is None:
                continue  # redundant constraint row
            _pivot(T, basis, i, j)
        keep.append(i)
    if len(keep) < m:
        rows_idx = keep + [m]
        T = T[rows_idx][:, list(range(ntot)) + [ntot + m]]
        basis = [basis[i] for i in keep]
        m = len(keep)
    else:
        T = T[:, list(range(ntot)) + [ntot + m]]

    # ---- phase 2: original objective ----
    cfull = np.concatenate([c, np.zeros(T.shape[1] - 1 - n)])
    T[-1, :] = 0.0
    T[-1, :cfull.shape[0]] = cfull
    for i in range(m):
        T[-1] -= T[-1, basis[i]] * T[i]

    status = _run_simplex(T, basis, T.shape[1] - 1, maxiter)
    if status == "unbounded":
        return LPResult(np.zeros(n), -np.inf, "unbounded")
    if status == "maxiter":
        return LPResult(np.zeros(n), np.nan, "maxiter", "phase 2 stalled")

    x = np.zeros(T.shape[1] - 1)
    for i in range(m):
        x[basis[i]] = T[i, -1]
    xfull = x[:n]
    return LPResult(xfull, float(c @ xfull), "optimal")
