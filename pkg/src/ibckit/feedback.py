"""Piecewise-linear safety feedback and the open-loop steering baseline.

The feedback interpolates per-vertex inputs over an origin-anchored
triangulation: vertices on the equilibrium subspace get the input that
cancels the field, all others the margin-maximizing witness of the
strict invariance LP, and the origin gets zero. The interpolant is
linear on each simplex (the affine term vanishes because 0 is a vertex
of every simplex), continuous across shared faces, and positively
homogeneous along rays from the origin.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from . import geometry as geo
from .geometry import Polytope, Triangulation
from .ibc import UNBOUNDED, InputSet, equilibrium_input, invariance_lp, vertex_in_equilibria
from .linsys import LinearSystem, equilibrium_set, is_controllable
from .tolerances import ACT_TOL, GEO_TOL, LIN_TOL


class FeedbackError(Exception):
    pass


class AssignmentFails(FeedbackError):
    """Some vertex admits neither an equilibrium input nor a strict witness."""


class DegenerateSimplex(FeedbackError):
    pass


class OutsideDomain(FeedbackError):
    pass


def assign_vertex_controls(
    sys: LinearSystem, X: Polytope, U: InputSet = UNBOUNDED
) -> np.ndarray:
    """Input assignment at the vertices of X, one row per vertex.

    Equilibrium vertices get the least-squares u with A v + B u = 0 (it
    must lie in U when U is bounded); the rest get the strict invariance
    LP witness, clipped into U as a numerical guard.
    """
    O = equilibrium_set(sys)
    rows = []
    for v in X.vertices:
        if vertex_in_equilibria(sys, v, O):
            u = equilibrium_input(sys, v)
            if not U.contains(u):
                raise AssignmentFails(
                    f"equilibrium input at {v} violates the input bounds"
                )
        else:
            rec = invariance_lp(sys, X, v, U, strict=True)
            if not rec.strict:
                raise AssignmentFails(f"no strict invariance witness at vertex {v}")
            u = U.clip(rec.u)
        rows.append(u)
    return np.asarray(rows)


@dataclass(frozen=True)
class PWLController:
    domain: Polytope
    triangulation: Triangulation
    gains: np.ndarray  # (L, m, n)
    vertex_controls: np.ndarray  # (p, m), indexed like domain.vertices

    @property
    def m(self) -> int:
        return self.gains.shape[1]

    @cached_property
    def _bary_inv(self) -> np.ndarray:
        pts = self.triangulation.points
        n = pts.shape[1]
        L = len(self.triangulation.simplices)
        inv = np.empty((L, n + 1, n + 1))
        for i, idx in enumerate(self.triangulation.simplices):
            M = np.vstack([pts[idx].T, np.ones(n + 1)])
            inv[i] = np.linalg.inv(M)
        return inv

    @cached_property
    def _bary_flat(self) -> np.ndarray:
        L, k, _ = self._bary_inv.shape
        return self._bary_inv.reshape(L * k, k)

    def locate(self, x: np.ndarray, tol: float) -> int:
        """Lowest-index simplex whose barycentric coordinates of x are
        all >= -tol, or -1."""
        xh = np.append(x, 1.0)
        k = self._bary_inv.shape[1]
        bary = (self._bary_flat @ xh).reshape(-1, k)
        hits = np.flatnonzero(bary.min(axis=1) >= -tol)
        return int(hits[0]) if hits.size else -1

    def to_dict(self) -> dict:
        return {
            "points": self.triangulation.points.tolist(),
            "simplices": self.triangulation.simplices.tolist(),
            "gains": self.gains.tolist(),
            "vertex_controls": self.vertex_controls.tolist(),
            "domain": self.domain.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PWLController":
        return PWLController(
            domain=Polytope.from_dict(d["domain"]),
            triangulation=Triangulation(
                points=np.asarray(d["points"], dtype=float),
                simplices=np.asarray(d["simplices"], dtype=int),
            ),
            gains=np.asarray(d["gains"], dtype=float),
            vertex_controls=np.asarray(d["vertex_controls"], dtype=float),
        )


def build_pwl(sys: LinearSystem, X: Polytope, U: InputSet = UNBOUNDED) -> PWLController:
    """Assemble the continuous piecewise-linear feedback on X.

    Per simplex the affine interpolant of the vertex inputs is computed
    by solving the (n+1)x(n+1) vertex system; the constant part must
    vanish since the origin carries input 0.
    """
    tri = geo.triangulate_with_origin(X)
    controls = assign_vertex_controls(sys, X, U)
    table = np.vstack([controls, np.zeros((1, sys.m))])
    uscale = 1.0 + np.abs(table).max()
    gains = np.empty((len(tri.simplices), sys.m, X.dim))
    for i, idx in enumerate(tri.simplices):
        V = tri.points[idx]
        M = np.hstack([V, np.ones((len(idx), 1))])
        try:
            coef = np.linalg.solve(M, table[idx])
        except np.linalg.LinAlgError as e:
            raise DegenerateSimplex(f"simplex {idx} is affinely dependent") from e
        g = coef[-1]
        if np.linalg.norm(g) > 1e3 * LIN_TOL * uscale:
            raise DegenerateSimplex(f"affine term {g} did not vanish on simplex {idx}")
        gains[i] = coef[:-1].T
    ctrl = PWLController(
        domain=X, triangulation=tri, gains=gains, vertex_controls=controls
    )
    ctrl._bary_flat  # build the locator tables up front
    return ctrl


def eval_pwl(ctrl: PWLController, x) -> np.ndarray:
    """Feedback value K_i x on the simplex containing x.

    Location is tolerance-inflated; points beyond it raise OutsideDomain.
    """
    x = np.asarray(x, dtype=float)
    tol = GEO_TOL * ctrl.domain.scale
    i = ctrl.locate(x, tol)
    if i < 0:
        i = ctrl.locate(x, 1e3 * tol)  # forgive integration roundoff
    if i < 0:
        raise OutsideDomain(f"{x} is outside the feedback domain")
    return ctrl.gains[i] @ x


def eval_pwl_cone(ctrl: PWLController, x) -> np.ndarray:
    """Positively homogeneous extension of the feedback to all of R^n.

    The gain of the boundary simplex hit by the ray through x is applied
    to x itself; inside the domain this agrees with eval_pwl.
    """
    x = np.asarray(x, dtype=float)
    level = lyapunov_V(ctrl.domain, x)
    if level <= GEO_TOL:
        return np.zeros(ctrl.m)
    s = max(level, 1.0)
    tol = GEO_TOL * ctrl.domain.scale
    i = ctrl.locate(x / s, tol)
    if i < 0:
        i = ctrl.locate(x / s, 1e3 * tol)
    if i < 0:
        raise OutsideDomain(f"ray location failed for {x}")
    return ctrl.gains[i] @ x


def lyapunov_V(X: Polytope, x) -> float:
    """V(x) = max_i n_i . x over the offset-normalized facet functionals.

    Level sets are scaled copies of X: V = 1 on the boundary, V = lam on
    the boundary of lam X.
    """
    return float(np.max(X.normalized_normals @ np.asarray(x, dtype=float)))


def dini_derivative(sys: LinearSystem, ctrl: PWLController, X: Polytope, x) -> float:
    """Upper Dini derivative of V along the closed-loop field at x."""
    x = np.asarray(x, dtype=float)
    f = sys.A @ x + sys.B @ eval_pwl(ctrl, x)
    N = X.normalized_normals
    vals = N @ x
    V = float(vals.max())
    active = vals >= V - ACT_TOL
    return float(np.max(N[active] @ f))


class SingularGramian(Exception):
    pass


@dataclass(frozen=True)
class GramianPlan:
    """Sampled open-loop input transferring x0 to xf at time t_f."""

    t: np.ndarray
    u: np.ndarray  # (q, m)
    t_f: float

    def __call__(self, t: float) -> np.ndarray:
        if t >= self.t_f:
            return np.zeros(self.u.shape[1])
        return np.array(
            [np.interp(t, self.t, self.u[:, j]) for j in range(self.u.shape[1])]
        )

    def as_policy(self, dt: float, t0: float = 0.0):
        """Zero-order-hold policy sampling the schedule at step midpoints;
        t0 is the absolute time at which the plan starts."""

        def policy(t, x):
            return self(min(t - t0 + 0.5 * dt, self.t_f - 1e-12))

        return policy

    def to_csv(self, path) -> None:
        header = "t," + ",".join(f"u{j+1}" for j in range(self.u.shape[1]))
        data = np.column_stack([self.t, self.u])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def gramian_steering(
    sys: LinearSystem, x0, xf, t_f: float, panels: int = 2000
) -> GramianPlan:
    """Minimum-energy open-loop transfer via the controllability Gramian.

    W(t_f) is integrated with composite Simpson on a fixed grid and
    u(t) = B^T exp(A^T (t_f - t)) W^{-1} (x_f - exp(A t_f) x0). There is
    no state-constraint guarantee along the way.
    """
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    if not is_controllable(sys):
        raise SingularGramian("uncontrollable pair has a singular Gramian")
    x0 = np.asarray(x0, dtype=float)
    xf = np.asarray(xf, dtype=float)
    q = 2 * panels + 1
    h = t_f / (2 * panels)
    E_step = expm(sys.A * h)
    E = np.empty((q, sys.n, sys.n))
    E[0] = np.eye(sys.n)
    for k in range(1, q):
        E[k] = E_step @ E[k - 1]
    BBt = sys.B @ sys.B.T
    M = E @ BBt @ np.transpose(E, (0, 2, 1))
    w = np.ones(q)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    W = (h / 3.0) * np.einsum("k,kij->ij", w, M)
    if np.linalg.cond(W) > 1e12:
        raise SingularGramian("Gramian is numerically singular")
    eta = np.linalg.solve(W, xf - E[-1] @ x0)
    ts = np.linspace(0.0, t_f, q)
    u = np.einsum("kji,j->ki", E[::-1] @ sys.B, eta)  # B^T exp(A^T (t_f - t)) eta
    return GramianPlan(t=ts, u=u, t_f=float(t_f))
