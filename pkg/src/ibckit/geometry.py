"""Convex geometry for low-dimensional polytopes.

A Polytope carries both representations: its extreme points and an
irredundant list of supporting half-spaces h_i . x <= c_i with unit
outward normals. Dimensions up to 4 are supported; hulls in the plane
use a monotone chain, higher dimensions use brute-force facet
enumeration, which is plenty at desk scale.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from itertools import combinations

import numpy as np

from .tolerances import GEO_TOL


class GeometryError(Exception):
    pass


class DegenerateInput(GeometryError):
    """Input point set does not span the ambient space affinely."""


class NotAVertex(GeometryError):
    pass


class OriginNotInterior(GeometryError):
    pass


class Membership(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Polytope:
    vertices: np.ndarray  # (p, n)
    normals: np.ndarray  # (r, n), unit outward
    offsets: np.ndarray  # (r,)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def scale(self) -> float:
        return 1.0 + float(np.abs(self.vertices).max())

    @cached_property
    def normalized_normals(self) -> np.ndarray:
        """Half-spaces rescaled to n_i . x <= 1; requires 0 interior."""
        if np.any(self.offsets <= GEO_TOL * self.scale):
            raise OriginNotInterior("normalized form needs 0 in the interior")
        return self.normals / self.offsets[:, None]

    def facet_vertex_ids(self, j: int) -> np.ndarray:
        g = self.vertices @ self.normals[j] - self.offsets[j]
        return np.flatnonzero(np.abs(g) <= GEO_TOL * self.scale)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "halfspaces": [
                {"n": n.tolist(), "c": float(c)}
                for n, c in zip(self.normals, self.offsets)
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "Polytope":
        verts = d.get("vertices")
        if verts:
            return hull_from_points(np.asarray(verts, dtype=float))
        hs = d.get("halfspaces")
        if not hs:
            raise DegenerateInput("need vertices or halfspaces")
        G = np.asarray([h["n"] for h in hs], dtype=float)
        g = np.asarray([h["c"] for h in hs], dtype=float)
        return polytope_from_halfspaces(G, g)


@dataclass(frozen=True)
class TangentCone:
    vertex: np.ndarray
    normals: np.ndarray  # unit outward normals of the facets meeting at the vertex
    facet_ids: np.ndarray


@dataclass(frozen=True)
class Triangulation:
    points: np.ndarray  # (q, n)
    simplices: np.ndarray  # (L, n+1) indices into points


def _affine_rank(pts: np.ndarray) -> int:
    M = pts - pts[0]
    if M.shape[0] == 1:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > GEO_TOL * max(1.0, s[0])))


def _dedupe_points(pts: np.ndarray, tol: float) -> np.ndarray:
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    keep = [i for i in range(len(pts)) if not np.any(d[i, :i] <= tol)]
    return pts[keep]


def _hull_2d(pts: np.ndarray, tol: float):
    """Andrew's monotone chain; returns CCW vertices with collinear
    mid-edge points pruned."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    P = pts[order]

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                a, b = out[-2], out[-1]
                turn = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
                if turn <= tol:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(P)
    upper = build(P[::-1])
    ring = np.array(lower[:-1] + upper[:-1])
    # canonical start: lexicographic minimum
    start = np.lexsort((ring[:, 1], ring[:, 0]))[0]
    ring = np.roll(ring, -start, axis=0)
    edges = np.roll(ring, -1, axis=0) - ring
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.einsum("ij,ij->i", normals, ring)
    return ring, normals, offsets


def _brute_facets(pts: np.ndarray, tol: float):
    """Supporting hyperplanes through n affinely independent points with
    every point on one side. Returns unit normals and offsets."""
    p, n = pts.shape
    normals, offsets = [], []
    for idx in combinations(range(p), n):
        sub = pts[list(idx)]
        M = sub[1:] - sub[0]
        if n == 1:
            h = np.array([1.0])
        else:
            u, s, vt = np.linalg.svd(M)
            if s[-1] <= tol * max(1.0, s[0]):
                continue  # subset not affinely independent
            h = vt[-1]
        c = float(h @ sub[0])
        g = pts @ h - c
        if g.max() > tol and g.min() < -tol:
            continue  # cuts through the point set
        if g.max() > tol:
            h, c, g = -h, -c, -g
        if g.min() > -tol:
            continue  # all points coplanar with it; not a proper facet
        dup = False
        for k in range(len(normals)):
            if (
                np.linalg.norm(normals[k] - h) <= 1e2 * tol
                and abs(offsets[k] - c) <= 1e2 * tol
            ):
                dup = True
                break
        if not dup:
            normals.append(h)
            offsets.append(c)
    if not normals:
        raise DegenerateInput("no supporting facets found")
    order = np.lexsort(np.asarray(normals).T[::-1])
    return np.asarray(normals)[order], np.asarray(offsets)[order]


def hull_from_points(points: np.ndarray) -> Polytope:
    """Convex hull with interior points pruned and irredundant facets.

    Raises DegenerateInput when the points do not affinely span the
    ambient space.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    if n > 4:
        raise GeometryError("exact hulls are supported up to dimension 4")
    tol = GEO_TOL * (1.0 + np.abs(pts).max())
    pts = _dedupe_points(pts, tol)
    if pts.shape[0] <= n or _affine_rank(pts) < n:
        raise DegenerateInput(f"points do not span R^{n}")
    if n == 2:
        verts, normals, offsets = _hull_2d(pts, tol)
        return Polytope(verts, normals, offsets)
    normals, offsets = _brute_facets(pts, tol)
    # a hull vertex lies on facets whose normals span the whole space
    keep = []
    for i, x in enumerate(pts):
        act = np.abs(normals @ x - offsets) <= tol
        if np.count_nonzero(act) >= n and _matrix_rank(normals[act], tol) == n:
            keep.append(i)
    verts = pts[keep]
    verts = verts[np.lexsort(verts.T[::-1])]
    return Polytope(verts, normals, offsets)


def _matrix_rank(M: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def polytope_from_halfspaces(G: np.ndarray, g: np.ndarray) -> Polytope:
    """Vertex enumeration for a bounded half-space intersection."""
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    r, n = G.shape
    tol = GEO_TOL * (1.0 + max(np.abs(g).max(), 1.0))
    cands = []
    for idx in combinations(range(r), n):
        A = G[list(idx)]
        if abs(np.linalg.det(A)) <= 1e3 * tol:
            continue
        x = np.linalg.solve(A, g[list(idx)])
        if np.all(G @ x <= g + 1e3 * tol * (1.0 + np.abs(x).max())):
            cands.append(x)
    if not cands:
        raise DegenerateInput("half-spaces bound no full-dimensional region")
    return hull_from_points(np.asarray(cands))


def box(lo, hi) -> Polytope:
    """Axis-aligned box from per-axis bounds, built without a hull pass."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = len(lo)
    if np.any(hi <= lo):
        raise DegenerateInput("box bounds must have positive width")
    corners = np.array(
        [[lo[i] if (k >> i) & 1 == 0 else hi[i] for i in range(n)] for k in range(2**n)]
    )
    corners = corners[np.lexsort(corners.T[::-1])]
    normals = np.vstack([np.eye(n), -np.eye(n)])
    offsets = np.concatenate([hi, -lo])
    return Polytope(corners, normals, offsets)


def contains(X: Polytope, x: np.ndarray, tol: float | None = None) -> Membership:
    """Classify a point against the polytope's half-spaces."""
    if tol is None:
        tol = GEO_TOL * X.scale
    worst = float(np.max(X.normals @ np.asarray(x, dtype=float) - X.offsets))
    if worst > tol:
        return Membership.OUTSIDE
    if worst > -tol:
        return Membership.BOUNDARY
    return Membership.INTERIOR


def vertex_index(X: Polytope, v: np.ndarray, tol: float | None = None) -> int:
    if tol is None:
        tol = GEO_TOL * X.scale
    d = np.linalg.norm(X.vertices - np.asarray(v, dtype=float), axis=1)
    i = int(np.argmin(d))
    if d[i] > tol:
        raise NotAVertex(f"{v} is not a vertex")
    return i


def tangent_cone(X: Polytope, v: np.ndarray) -> TangentCone:
    """Active outward normals at a vertex: C(v) = {y : h_j . y <= 0}."""
    i = vertex_index(X, v)
    vv = X.vertices[i]
    act = np.flatnonzero(np.abs(X.normals @ vv - X.offsets) <= GEO_TOL * X.scale)
    return TangentCone(vertex=vv, normals=X.normals[act], facet_ids=act)


def is_simplicial(X: Polytope) -> bool:
    """True iff every facet has exactly n vertices."""
    n = X.dim
    return all(len(X.facet_vertex_ids(j)) == n for j in range(len(X.offsets)))


def _order_ring(pts: np.ndarray, ids: list[int]) -> list[int]:
    """Order the vertex ids of a planar (2-D) face around its centroid."""
    P = pts[ids]
    center = P.mean(axis=0)
    M = P - center
    _, _, vt = np.linalg.svd(M)
    uv = M @ vt[:2].T
    ang = np.arctan2(uv[:, 1], uv[:, 0])
    return [ids[k] for k in np.argsort(ang, kind="stable")]


def _lex_min(pts: np.ndarray, ids: list[int]) -> int:
    sub = pts[ids]
    return ids[int(np.lexsort(sub.T[::-1])[0])]


def _triangulate_face(pts: np.ndarray, ids: list[int], d: int) -> list[tuple]:
    """Fan triangulation of a d-dimensional face given its vertex ids."""
    ids = sorted(ids)
    if len(ids) == d + 1:
        return [tuple(ids)]
    if d == 1:
        raise GeometryError("edge with more than two vertices")
    v0 = _lex_min(pts, ids)
    rest = [i for i in ids if i != v0]
    if d == 2:
        ring = _order_ring(pts, ids)
        k0 = ring.index(v0)
        ring = ring[k0:] + ring[:k0]
        return [(v0, ring[s], ring[s + 1]) for s in range(1, len(ring) - 1)]
    # d == 3: find the 2-faces of this cell and cone from v0
    P = pts[ids]
    center = P.mean(axis=0)
    M = P - center
    _, _, vt = np.linalg.svd(M)
    local = M @ vt[:d].T
    tol = GEO_TOL * (1.0 + np.abs(local).max())
    normals, offsets = _brute_facets(local, tol)
    out = []
    for h, c in zip(normals, offsets):
        on = np.flatnonzero(np.abs(local @ h - c) <= tol)
        sub = [ids[k] for k in on]
        if v0 in sub:
            continue
        for tri in _triangulate_face(pts, sub, d - 1):
            out.append((v0,) + tri)
    return out


def triangulate_with_origin(X: Polytope) -> Triangulation:
    """Triangulation whose every simplex has the origin as a vertex.

    Each facet is fanned from its lexicographically smallest vertex and
    coned with 0; requires 0 in the interior.
    """
    n = X.dim
    if contains(X, np.zeros(n)) is not Membership.INTERIOR:
        raise OriginNotInterior("triangulation is anchored at 0")
    points = np.vstack([X.vertices, np.zeros((1, n))])
    oid = len(X.vertices)
    simplices = []
    for j in range(len(X.offsets)):
        ids = list(X.facet_vertex_ids(j))
        for cell in _triangulate_face(X.vertices, ids, n - 1):
            simplices.append(cell + (oid,))
    return Triangulation(points=points, simplices=np.asarray(simplices, dtype=int))


def simplex_volume(pts: np.ndarray) -> float:
    """Volume of the simplex spanned by n+1 points in R^n."""
    M = np.asarray(pts[1:], dtype=float) - pts[0]
    n = M.shape[1]
    return abs(float(np.linalg.det(M))) / math.factorial(n)


def scale(X: Polytope, lam: float) -> Polytope:
    """The polytope lam * X; normals are unchanged, offsets scale."""
    if lam <= 0:
        raise GeometryError("scale factor must be positive")
    return Polytope(X.vertices * lam, X.normals, X.offsets * lam)


def max_inscribed_scale(X: Polytope, Xc: Polytope) -> float:
    """Largest lam with lam * X inside Xc; both need 0 interior."""
    ratios = (Xc.normals @ X.vertices.T) / Xc.offsets[:, None]
    worst = float(ratios.max())
    if worst <= 0:
        raise GeometryError("containing polytope is unbounded around X")
    return 1.0 / worst
