"""Dense two-phase simplex for the tiny margin-maximization LPs.

Problems solved here have at most a handful of constraints (active facets
at one vertex plus input-box bounds) and m+1 unknowns, so a plain tableau
with Bland's anti-cycling rule is both fast enough and deterministic.
"""

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-11
_FEAS_TOL = 1e-9


class LPFailure(Exception):
    """Simplex failed to converge or returned an inconsistent tableau."""


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and abs(T[i, col]) > 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _pivot_loop(T, basis, cols):
    """Bland-rule simplex on tableau T, minimizing the objective row.

    `cols` lists the columns allowed to enter the basis. Returns
    "optimal" or "unbounded".
    """
    m = T.shape[0] - 1
    for _ in range(200 * (T.shape[1] + m)):
        enter = -1
        for j in cols:
            if T[-1, j] < -_PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave, best = -1, np.inf
        for i in range(m):
            a = T[i, enter]
            if a > _PIVOT_TOL:
                ratio = T[i, -1] / a
                if ratio < best - _PIVOT_TOL or (
                    ratio < best + _PIVOT_TOL and (leave < 0 or basis[i] < basis[leave])
                ):
                    leave, best = i, ratio
        if leave < 0:
            return "unbounded"
        _pivot(T, basis, leave, enter)
    raise LPFailure("simplex did not terminate")


def _solve_min_eq(A, b, c):
    """minimize c.y  s.t.  A y = b, y >= 0  with b >= 0 elementwise."""
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))

    # phase 1: minimize the artificial sum; price the artificials out
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    if _pivot_loop(T, basis, range(n)) != "optimal":
        raise LPFailure("phase-1 unbounded")
    if -T[-1, -1] > _FEAS_TOL * (1.0 + abs(b).max(initial=0.0)):
        return "infeasible", None
    # drive leftover artificials out of the basis
    for i in range(m):
        if basis[i] >= n:
            piv = next((j for j in range(n) if abs(T[i, j]) > _PIVOT_TOL), None)
            if piv is not None:
                _pivot(T, basis, i, piv)
            else:
                T[i, :] = 0.0  # redundant row

    # phase 2: original objective
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i in range(m):
        if basis[i] < n and abs(c[basis[i]]) > 0.0:
            T[-1] -= c[basis[i]] * T[i]
    status = _pivot_loop(T, basis, range(n))
    if status == "unbounded":
        return "unbounded", None
    y = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            y[basis[i]] = T[i, -1]
    return "optimal", y


def solve_lp_max(c, G, h):
    """maximize c.x  s.t.  G x <= h  with x free.

    Returns an LPResult; x is the maximizer when status is "optimal".
    """
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float).copy()
    m, k = G.shape
    # free variables as x+ - x-, one slack per row; flip rows so rhs >= 0
    A = np.hstack([G, -G, np.eye(m)])
    neg = h < 0.0
    A[neg] *= -1.0
    h[neg] *= -1.0
    cmin = np.concatenate([-c, c, np.zeros(m)])
    status, y = _solve_min_eq(A, h, cmin)
    if status != "optimal":
        return LPResult(status=status)
    x = y[:k] - y[k : 2 * k]
    return LPResult(status="optimal", x=x, value=float(c @ x))
