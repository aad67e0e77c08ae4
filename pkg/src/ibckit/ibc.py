"""Verification and construction of in-block controllable (IBC) regions.

Verification solves one small margin-maximization LP per vertex: the
invariance conditions ask for an input u with A v + B u inside the
tangent cone at v, the backward conditions the same for the reversed
field. Construction pushes the projections of a seed polytope's vertices
along the equilibrium subspace outward and takes the hull, which places
every vertex of the result either on the equilibrium subspace or with
the input span dipping into its tangent cone.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import geometry as geo
from .geometry import Membership, Polytope
from .linsys import (
    LinearSystem,
    decompose,
    equilibrium_set,
    is_controllable,
)
from .lp import LPFailure, solve_lp_max
from .tolerances import LIN_TOL, LP_TOL


class ConstructionError(Exception):
    pass


class AlphaTooSmall(ConstructionError):
    pass


class NotControllable(ConstructionError):
    pass


class NoFeasibleScale(ConstructionError):
    pass


@dataclass(frozen=True)
class InputSet:
    """Input constraint u in U, stored as G u <= g; None means unbounded.

    When bounded, 0 must be interior (all g > 0).
    """

    G: np.ndarray | None = None
    g: np.ndarray | None = None
    lo: np.ndarray | None = None  # set when constructed as a box
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.G is not None and np.any(np.asarray(self.g) <= 0):
            raise ValueError("bounded input set must contain 0 in its interior")

    @property
    def bounded(self) -> bool:
        return self.G is not None

    @staticmethod
    def unbounded() -> "InputSet":
        return InputSet()

    @staticmethod
    def box(lo, hi) -> "InputSet":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        m = len(lo)
        G = np.vstack([np.eye(m), -np.eye(m)])
        g = np.concatenate([hi, -lo])
        return InputSet(G=G, g=g, lo=lo, hi=hi)

    def clip(self, u: np.ndarray) -> np.ndarray:
        if self.lo is not None:
            return np.clip(u, self.lo, self.hi)
        return u

    def contains(self, u: np.ndarray, tol: float = LP_TOL) -> bool:
        if not self.bounded:
            return True
        return bool(np.all(self.G @ u <= self.g + tol))


UNBOUNDED = InputSet.unbounded()


@dataclass(frozen=True)
class LPRecord:
    feasible: bool
    strict: bool
    margin: float
    u: np.ndarray | None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "strict": self.strict,
            "margin": self.margin,
            "u": None if self.u is None else self.u.tolist(),
        }


@dataclass(frozen=True)
class ConeDipRecord:
    feasible: bool
    margin: float
    b: np.ndarray | None

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "margin": self.margin,
            "b": None if self.b is None else self.b.tolist(),
        }


@dataclass(frozen=True)
class VertexRecord:
    vertex: np.ndarray
    in_O: bool
    invariance: LPRecord
    backward: LPRecord
    cone_dip: ConeDipRecord

    @property
    def geometric_ok(self) -> bool:
        return self.in_O or self.cone_dip.feasible

    def to_dict(self) -> dict:
        return {
            "vertex": self.vertex.tolist(),
            "in_O": self.in_O,
            "invariance": self.invariance.to_dict(),
            "backward": self.backward.to_dict(),
            "cone_dip": self.cone_dip.to_dict(),
        }


class Verdict(Enum):
    IBC = "IBC"
    NOT_IBC = "NOT_IBC"
    NECESSARY_ONLY = "NECESSARY_ONLY"


@dataclass(frozen=True)
class IBCCertificate:
    verdict: Verdict
    route: str | None  # "equilibrium-cone" | "vertex-lp" | None
    controllable: bool
    simplicial: bool
    records: list[VertexRecord]
    failing: list[int]  # indices of vertices breaking a necessary condition

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "route": self.route,
            "controllable": self.controllable,
            "simplicial": self.simplicial,
            "vertices": [r.to_dict() for r in self.records],
            "failing": self.failing,
        }


def _default_cap(sys: LinearSystem, v: np.ndarray) -> float:
    return 10.0 * (1.0 + np.linalg.norm(sys.A @ v) / max(sys.b_sigma_min, 1e-12))


def _margin_interval_1d(HB, rhs, lo: float, hi: float):
    """Closed form of the scalar-input margin problem.

    maximize over u in [lo, hi] of phi(u) = min_j (rhs_j - HB_j u); the
    concave piecewise-linear objective peaks at an interval end or a
    crossing of two constraint lines. Equivalent to the simplex path and
    much cheaper inside the replanning loop.
    """
    cands = [lo, hi]
    J = len(HB)
    for i in range(J):
        for j in range(i + 1, J):
            da = HB[i] - HB[j]
            if abs(da) > 1e-14:
                u = (rhs[i] - rhs[j]) / da
                if lo < u < hi:
                    cands.append(u)
    cu = np.asarray(cands)
    vals = (rhs[None, :] - np.outer(cu, HB)).min(axis=1)
    k = int(np.argmax(vals))
    return float(vals[k]), np.array([cu[k]])


def _margin_lp(HB, rhs, U: InputSet, m: int, cap: float):
    """maximize eps s.t. HB u + eps <= rhs and u in U (box cap if unbounded).

    Returns (margin, u). The cap keeps witnesses finite when U is
    unbounded; it is grown automatically if it binds while the problem
    is still infeasible-looking.
    """
    c = np.zeros(m + 1)
    c[m] = 1.0
    for _ in range(4):
        if m == 1:
            if U.bounded:
                g1 = np.ravel(U.G)
                lo = max(
                    (U.g[i] / g1[i] for i in range(len(g1)) if g1[i] < 0), default=-cap
                )
                hi = min(
                    (U.g[i] / g1[i] for i in range(len(g1)) if g1[i] > 0), default=cap
                )
            else:
                lo, hi = -cap, cap
            margin, u = _margin_interval_1d(np.ravel(HB), rhs, lo, hi)
        else:
            rows = [np.hstack([HB, np.ones((HB.shape[0], 1))])]
            h = [rhs]
            if U.bounded:
                rows.append(np.hstack([U.G, np.zeros((U.G.shape[0], 1))]))
                h.append(U.g)
            else:
                eye = np.eye(m)
                rows.append(np.hstack([np.vstack([eye, -eye]), np.zeros((2 * m, 1))]))
                h.append(np.full(2 * m, cap))
            res = solve_lp_max(c, np.vstack(rows), np.concatenate(h))
            if res.status != "optimal":
                raise LPFailure(f"margin LP returned {res.status}")
            u, margin = res.x[:m], float(res.value)
        if U.bounded or margin > LP_TOL or np.abs(u).max() < cap * (1 - 1e-6):
            return margin, u
        cap *= 100.0
    return margin, u


def invariance_lp(
    sys: LinearSystem, X: Polytope, v, U: InputSet = UNBOUNDED, strict: bool = False
) -> LPRecord:
    """Margin-maximizing input keeping A v + B u in the tangent cone at v."""
    cone = geo.tangent_cone(X, v)
    rhs = -(cone.normals @ (sys.A @ cone.vertex))
    margin, u = _margin_lp(cone.normals @ sys.B, rhs, U, sys.m, _default_cap(sys, cone.vertex))
    rec = LPRecord(
        feasible=(margin > LP_TOL) if strict else (margin >= -LP_TOL),
        strict=margin > LP_TOL,
        margin=margin,
        u=u,
    )
    return rec


def backward_invariance_lp(
    sys: LinearSystem, X: Polytope, v, U: InputSet = UNBOUNDED, strict: bool = False
) -> LPRecord:
    """Same as invariance_lp for the reversed field -A v - B u."""
    cone = geo.tangent_cone(X, v)
    rhs = cone.normals @ (sys.A @ cone.vertex)
    margin, u = _margin_lp(-(cone.normals @ sys.B), rhs, U, sys.m, _default_cap(sys, cone.vertex))
    return LPRecord(
        feasible=(margin > LP_TOL) if strict else (margin >= -LP_TOL),
        strict=margin > LP_TOL,
        margin=margin,
        u=u,
    )


def cone_dip_lp(sys: LinearSystem, X: Polytope, v) -> ConeDipRecord:
    """Does Im(B) dip into the open tangent cone at v?

    Solves max eps s.t. h_j . (B xi) <= -eps with |xi|_inf <= 1; feasible
    means a strictly interior cone direction exists in the input span.
    """
    cone = geo.tangent_cone(X, v)
    m = sys.m
    HB = cone.normals @ sys.B
    if m == 1:
        margin, xi = _margin_interval_1d(np.ravel(HB), np.zeros(HB.shape[0]), -1.0, 1.0)
    else:
        c = np.zeros(m + 1)
        c[m] = 1.0
        eye = np.eye(m)
        G = np.vstack(
            [
                np.hstack([HB, np.ones((HB.shape[0], 1))]),
                np.hstack([np.vstack([eye, -eye]), np.zeros((2 * m, 1))]),
            ]
        )
        h = np.concatenate([np.zeros(HB.shape[0]), np.ones(2 * m)])
        res = solve_lp_max(c, G, h)
        if res.status != "optimal":
            raise LPFailure(f"cone dip LP returned {res.status}")
        margin, xi = float(res.value), res.x[:m]
    feasible = margin > LP_TOL
    return ConeDipRecord(
        feasible=feasible, margin=margin, b=sys.B @ xi if feasible else None
    )


def vertex_in_equilibria(sys: LinearSystem, v, O: np.ndarray | None = None) -> bool:
    v = np.asarray(v, dtype=float)
    if O is None:
        O = equilibrium_set(sys)
    d = np.linalg.norm(v - O @ (O.T @ v))
    return d <= LIN_TOL * (1.0 + np.linalg.norm(v))


def equilibrium_input(sys: LinearSystem, v) -> np.ndarray:
    """Least-squares u cancelling the field at v: B u = -A v."""
    u, *_ = np.linalg.lstsq(sys.B, -(sys.A @ np.asarray(v, dtype=float)), rcond=None)
    return u


def check_ibc(
    sys: LinearSystem,
    X: Polytope,
    U: InputSet = UNBOUNDED,
    assume_input_mild: bool = False,
) -> IBCCertificate:
    """Full per-vertex IBC certificate for the polytope X.

    Route "equilibrium-cone": every vertex lies on the equilibrium
    subspace or the input span dips into its tangent cone, which
    certifies IBC for a controllable system regardless of facet shape.
    Route "vertex-lp": the invariance and backward-invariance LPs are
    solvable at every vertex of a simplicial polytope.

    With a bounded input set the LP conditions remain necessary; they
    certify IBC only on the equilibrium-cone route with strict margins
    (with equilibrium inputs inside U), or when the caller asserts the
    mild interior-input assumption on the vertex-lp route.
    """
    controllable = is_controllable(sys)
    O = equilibrium_set(sys)
    records = []
    for v in X.vertices:
        records.append(
            VertexRecord(
                vertex=v,
                in_O=vertex_in_equilibria(sys, v, O),
                invariance=invariance_lp(sys, X, v, U),
                backward=backward_invariance_lp(sys, X, v, U),
                cone_dip=cone_dip_lp(sys, X, v),
            )
        )
    simplicial = geo.is_simplicial(X)
    failing = [
        i
        for i, r in enumerate(records)
        if not (r.invariance.feasible and r.backward.feasible)
    ]
    geometric_ok = all(r.geometric_ok for r in records)
    lp_ok = not failing

    if not controllable or not lp_ok:
        return IBCCertificate(
            Verdict.NOT_IBC, None, controllable, simplicial, records, failing
        )

    if not U.bounded:
        if geometric_ok:
            verdict, route = Verdict.IBC, "equilibrium-cone"
        elif simplicial:
            verdict, route = Verdict.IBC, "vertex-lp"
        else:
            verdict, route = Verdict.NECESSARY_ONLY, None
        return IBCCertificate(verdict, route, controllable, simplicial, records, [])

    # bounded inputs: strict margins at off-equilibrium vertices plus
    # admissible equilibrium inputs upgrade the geometric route to IBC
    if geometric_ok:
        strict_ok = all(
            r.invariance.strict and r.backward.strict
            for r in records
            if not r.in_O
        )
        eq_ok = all(
            U.contains(equilibrium_input(sys, r.vertex)) for r in records if r.in_O
        )
        if strict_ok and eq_ok:
            return IBCCertificate(
                Verdict.IBC, "equilibrium-cone", controllable, simplicial, records, []
            )
    if simplicial and assume_input_mild:
        return IBCCertificate(
            Verdict.IBC, "vertex-lp", controllable, simplicial, records, []
        )
    return IBCCertificate(
        Verdict.NECESSARY_ONLY, None, controllable, simplicial, records, []
    )


def construct_ibc_polytope(sys: LinearSystem, P: Polytope, alpha: float) -> Polytope:
    """Grow a seed polytope P into an IBC region.

    Each vertex v_i of P is projected along Im(B) onto the selected
    equilibrium directions, pushed outward by alpha, and the hull of the
    original vertices and the pushed points is returned. Every vertex of
    the result then lies on the equilibrium subspace or has the input
    span dipping into its tangent cone (verified internally).
    """
    if alpha <= 1.0:
        raise AlphaTooSmall("alpha must exceed 1")
    if not is_controllable(sys):
        raise NotControllable("construction requires a controllable pair")
    if geo.contains(P, np.zeros(P.dim)) is not Membership.INTERIOR:
        raise ConstructionError("seed polytope must contain 0 in its interior")
    dec = decompose(sys)
    pushed = np.array([alpha * dec.project_to_equilibria(v) for v in P.vertices])
    X = geo.hull_from_points(np.vstack([P.vertices, pushed]))
    O = equilibrium_set(sys)
    for v in X.vertices:
        if not (vertex_in_equilibria(sys, v, O) or cone_dip_lp(sys, X, v).feasible):
            raise ConstructionError(f"vertex {v} fails the construction guarantee")
    return X


DEFAULT_LAMBDA_GRID = tuple(np.round(np.arange(20, 0, -1) * 0.05, 10))


def _strict_worst_speed_ok(sys, X, v, U, v_ext, vel_axis) -> tuple[bool, float]:
    """Strict invariance and backward margins at v with the drift taken at
    the worst admissible speed.

    For a double-integrator axis the drift at (p, w) is (w, 0); bounding
    |w| by the unscaled speed extent certifies the vertex against any
    speed the system may carry at that position, not just the trimmed
    one. This implies the plain strict conditions at the vertex itself.
    """
    cone = geo.tangent_cone(X, v)
    pos_axis = 1 - vel_axis
    worst = np.abs(cone.normals[:, pos_axis]) * v_ext
    HB = cone.normals @ sys.B
    m_fwd, _ = _margin_lp(HB, -worst, U, sys.m, _default_cap(sys, cone.vertex))
    m_bwd, _ = _margin_lp(-HB, -worst, U, sys.m, _default_cap(sys, cone.vertex))
    margin = min(m_fwd, m_bwd)
    return margin > LP_TOL, margin


def rescale_velocity_axes(
    sys: LinearSystem,
    X: Polytope,
    U: InputSet,
    axes=(1,),
    grid=DEFAULT_LAMBDA_GRID,
):
    """Shrink the speed extent of a position-speed region until the strict
    vertex conditions hold under the bounded input set.

    Scales the listed velocity components of the vertices by each grid
    value in turn (largest first) and returns the first region whose
    off-equilibrium vertices pass the strict worst-case-speed invariance
    and backward LPs under U, together with the factor used.
    """
    if not U.bounded:
        raise ValueError("rescaling targets a bounded input set")
    if X.dim != 2 or tuple(axes) != (1,):
        raise NotImplementedError("rescaling expects 2-D (position, speed) regions")
    vel_axis = 1
    v_ext = float(np.abs(X.vertices[:, vel_axis]).max())
    O = equilibrium_set(sys)
    for lam in grid:
        if lam == 1.0:
            Xs = X
        else:
            verts = X.vertices.copy()
            verts[:, vel_axis] *= lam
            Xs = geo.hull_from_points(verts)
        ok = True
        for v in Xs.vertices:
            if vertex_in_equilibria(sys, v, O):
                continue
            good, _ = _strict_worst_speed_ok(sys, Xs, v, U, v_ext, vel_axis)
            if not good:
                ok = False
                break
        if ok:
            return Xs, float(lam)
    raise NoFeasibleScale("no grid factor passes the strict vertex conditions")
