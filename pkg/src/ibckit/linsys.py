"""Linear-algebraic analysis of affine systems.

Covers the coordinate shift that removes the constant drift term, the
Kalman controllability test, the subspace of possible equilibria
O = {x : A x in Im(B)}, and the basis decomposition R^n = span(B-columns)
+ span(selected equilibrium directions) that drives region construction.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .tolerances import LIN_TOL


class SystemError_(Exception):
    pass


class NoShiftExists(SystemError_):
    """The affine offset cannot be absorbed: a not in Im(A) + Im(B)."""


class DecompositionFails(SystemError_):
    """O + Im(B) is a proper subspace of R^n; construction inapplicable."""


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > LIN_TOL * s[0])) if s[0] > 0 else 0


def _orth(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the column span, sign-fixed for determinism."""
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > LIN_TOL * s[0])) if s.size and s[0] > 0 else 0
    Q = u[:, :r]
    for k in range(r):
        j = int(np.argmax(np.abs(Q[:, k])))
        if Q[j, k] < 0:
            Q[:, k] *= -1.0
    return Q


@dataclass(frozen=True)
class LinearSystem:
    """x' = A x + B u with rank(B) = m."""

    A: np.ndarray
    B: np.ndarray
    shift: tuple[np.ndarray, np.ndarray] | None = None  # (x_bar, w) of the removed offset

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if _rank(B) != self.m:
            raise SystemError_("B must have full column rank")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @cached_property
    def b_span(self) -> np.ndarray:
        """Orthonormal basis of Im(B)."""
        return _orth(self.B)

    @cached_property
    def b_sigma_min(self) -> float:
        return float(np.linalg.svd(self.B, compute_uv=False)[-1])

    @cached_property
    def eq_basis(self) -> np.ndarray:
        """Orthonormal basis of {x : A x in Im(B)}, sign-fixed."""
        Qb = self.b_span
        R = self.A - Qb @ (Qb.T @ self.A)
        u, s, vt = np.linalg.svd(R)
        smax = s[0] if s.size and s[0] > 0 else 1.0
        null_mask = np.concatenate(
            [s <= LIN_TOL * smax, np.ones(self.n - len(s), bool)]
        )
        basis = vt[null_mask].T
        for k in range(basis.shape[1]):
            j = int(np.argmax(np.abs(basis[:, k])))
            if basis[j, k] < 0:
                basis[:, k] *= -1.0
        return basis

    @cached_property
    def controllable(self) -> bool:
        blocks = [self.B]
        for _ in range(self.n - 1):
            blocks.append(self.A @ blocks[-1])
        return _rank(np.hstack(blocks)) == self.n

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "a": [0.0] * self.n}


@dataclass(frozen=True)
class AffineSystem:
    """x' = A x + B u + a."""

    A: np.ndarray
    B: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))

    @staticmethod
    def from_dict(d: dict) -> "AffineSystem":
        A = np.asarray(d["A"], dtype=float)
        B = np.asarray(d["B"], dtype=float)
        a = np.asarray(d.get("a", np.zeros(A.shape[0])), dtype=float)
        return AffineSystem(A, B, a)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "a": self.a.tolist()}


@dataclass(frozen=True)
class Decomposition:
    """Basis split T = [b_1 .. b_m o_{m+1} .. o_n] with o_k equilibria."""

    b_basis: np.ndarray  # (n, m)
    o_complement: np.ndarray  # (n, n-m)
    T: np.ndarray
    T_inv: np.ndarray
    T_O: np.ndarray

    def project_to_equilibria(self, x: np.ndarray) -> np.ndarray:
        """Project along Im(B) onto the selected equilibrium directions."""
        return self.T_O @ (self.T_inv @ np.asarray(x, dtype=float))


def shift_to_linear(sys: AffineSystem) -> LinearSystem:
    """Absorb the constant drift: find (x_bar, w) with A x_bar + a = B w.

    The shifted coordinates x - x_bar with input u = u_tilde - w evolve as
    a linear system. The joint minimum-norm solution is used. Raises
    NoShiftExists when a is outside Im(A) + Im(B).
    """
    n, m = sys.A.shape[0], sys.B.shape[1]
    M = np.hstack([sys.A, -sys.B])
    sol, *_ = np.linalg.lstsq(M, -sys.a, rcond=None)
    resid = np.linalg.norm(M @ sol + sys.a)
    if resid > LIN_TOL * (1.0 + np.linalg.norm(sys.a)):
        raise NoShiftExists("offset not in Im(A) + Im(B)")
    x_bar, w = sol[:n], sol[n:]
    return LinearSystem(sys.A, sys.B, shift=(x_bar, w))


def is_controllable(sys: LinearSystem) -> bool:
    """Kalman rank test on [B AB ... A^(n-1)B]."""
    return sys.controllable


def input_span(sys: LinearSystem) -> np.ndarray:
    """Orthonormal basis of Im(B)."""
    return sys.b_span


def equilibrium_set(sys: LinearSystem) -> np.ndarray:
    """Orthonormal basis of O = {x : A x in Im(B)} as columns.

    O is the set of states where the vector field can be cancelled by
    some input; its dimension is between m and n.
    """
    return sys.eq_basis


def equilibrium_distance(sys: LinearSystem, x: np.ndarray) -> float:
    """Euclidean distance from x to the equilibrium subspace."""
    O = sys.eq_basis
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - O @ (O.T @ x)))


def spans_state_space(sys: LinearSystem) -> bool:
    """True iff O + Im(B) = R^n."""
    return _rank(np.hstack([sys.eq_basis, sys.b_span])) == sys.n


def decompose(sys: LinearSystem) -> Decomposition:
    """Pick equilibrium directions completing Im(B) to a basis of R^n.

    The n-m directions are chosen greedily from the equilibrium basis by
    largest residual after orthogonalization against Im(B) and the
    previously chosen directions, which keeps T well conditioned.
    Raises DecompositionFails when O + Im(B) != R^n.
    """
    n, m = sys.n, sys.m
    Qb = sys.b_span
    O = sys.eq_basis
    if _rank(np.hstack([O, Qb])) < n:
        raise DecompositionFails("O + Im(B) is not the whole state space")
    chosen: list[int] = []
    resid = O - Qb @ (Qb.T @ O)
    work = resid.copy()
    for _ in range(n - m):
        norms = np.linalg.norm(work, axis=0)
        norms[chosen] = -1.0
        k = int(np.argmax(norms))
        chosen.append(k)
        d = work[:, k] / norms[k]
        work = work - np.outer(d, d @ work)
    o_cols = O[:, sorted(chosen)]
    T = np.hstack([Qb, o_cols])
    T_inv = np.linalg.inv(T)
    T_O = np.hstack([np.zeros((n, m)), o_cols])
    return Decomposition(b_basis=Qb, o_complement=o_cols, T=T, T_inv=T_inv, T_O=T_O)
