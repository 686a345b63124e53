"""Best approximation of a canonical coordinate inside a circuit polytope.

On each convex body the infidelity minimizer is a critical point of the
Euclidean distance restricted to some face.  So the candidates are the target
itself (if it is a member), its orthogonal projections onto the affine hulls
of every facet and every edge that land back inside the union, and the
vertices.  The best candidate under canonical infidelity wins.

Targets with a1 > pi/4 are first reflected through a1 -> pi/2 - a1; the
polytopes are closed under that reflection and the infidelity is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .circuit_polytope import circuit_polytope, components_contain
from .polytope import PolytopeUnion, vertices
from .weyl import HALF_PI, QUARTER_PI, canonical_infidelities

APPROX_MEMBER_TOL = 1e-9


class EmptyPolytopeError(ValueError):
    """The polytope union has no points to approximate with."""


@dataclass(frozen=True)
class ApproximationResult:
    point: np.ndarray
    infidelity: float
    facet_tag: str


@dataclass(frozen=True)
class CandidateFaces:
    """Affine maps x -> x @ M.T + c for each face projection, plus vertices."""

    bodies: tuple
    maps: np.ndarray  # (F, 3, 3)
    offsets: np.ndarray  # (F, 3)
    tags: tuple[str, ...]
    verts: np.ndarray  # (V, 3)
    vert_tags: tuple[str, ...]


def _projector(normals: np.ndarray, rhs: np.ndarray):
    gram_inv = np.linalg.inv(normals @ normals.T)
    m = np.eye(3) - normals.T @ gram_inv @ normals
    c = normals.T @ gram_inv @ rhs
    return m, c


def candidate_faces(union: PolytopeUnion) -> CandidateFaces:
    maps, offsets, tags, verts, vtags = [], [], [], [], []
    for k, body in enumerate(union.components):
        a, b = body.A, body.b
        for i in range(len(a)):
            m, c = _projector(a[i : i + 1], b[i : i + 1])
            maps.append(m)
            offsets.append(c)
            tags.append(f"body{k}:facet{i}")
        for i, j in combinations(range(len(a)), 2):
            n = a[[i, j]]
            if np.linalg.matrix_rank(n, tol=1e-10) < 2:
                continue
            m, c = _projector(n, b[[i, j]])
            maps.append(m)
            offsets.append(c)
            tags.append(f"body{k}:edge{i},{j}")
        for v in vertices(body, check_bounded=False):
            verts.append(v)
            vtags.append(f"body{k}:vertex")
    if not verts:
        raise EmptyPolytopeError("polytope union is empty")
    return CandidateFaces(
        tuple(union.components),
        np.array(maps).reshape(-1, 3, 3),
        np.array(offsets).reshape(-1, 3),
        tuple(tags),
        np.array(verts).reshape(-1, 3),
        tuple(vtags),
    )


@lru_cache(maxsize=4096)
def _faces_for_word(word: tuple[float, ...]) -> CandidateFaces:
    return candidate_faces(circuit_polytope(word))


def faces_for_word(word) -> CandidateFaces:
    return _faces_for_word(tuple(float(x) for x in word))


def _reflect(points: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = points.copy()
    out[mask, 0] = HALF_PI - out[mask, 0]
    return out


def nearest_points(targets: np.ndarray, faces: CandidateFaces, chunk: int = 4096):
    """Vectorized nearest-point search: returns (points (N,3), infidelities (N,))."""
    targets = np.atleast_2d(np.asarray(targets, float))
    n = len(targets)
    best_pts = np.empty((n, 3))
    best_inf = np.empty(n)
    for lo in range(0, n, chunk):
        t = targets[lo : lo + chunk]
        flip = t[:, 0] > QUARTER_PI
        tr = _reflect(t, flip)
        proj = np.einsum("fij,nj->fni", faces.maps, tr) + faces.offsets[:, None, :]
        cands = np.concatenate(
            [tr[None], proj, np.broadcast_to(faces.verts[:, None, :], (len(faces.verts), len(tr), 3))],
            axis=0,
        )
        ok = components_contain(faces.bodies, cands, APPROX_MEMBER_TOL)
        # vertices are always members; keep them regardless of rounding
        ok[1 + len(faces.maps) :] = True
        inf = canonical_infidelities(tr[None], cands)
        inf = np.where(ok, inf, np.inf)
        idx = np.argmin(inf, axis=0)
        cols = np.arange(len(tr))
        pts = cands[idx, cols]
        best_inf[lo : lo + chunk] = inf[idx, cols]
        best_pts[lo : lo + chunk] = _reflect(pts, flip)
    return best_pts, best_inf


def nearest_point(target, union: PolytopeUnion | CandidateFaces) -> ApproximationResult:
    """Infidelity-nearest point of the union to ``target`` (a canonical coordinate)."""
    faces = union if isinstance(union, CandidateFaces) else candidate_faces(union)
    t = np.asarray(target, float)
    flip = bool(t[0] > QUARTER_PI)
    tr = _reflect(t[None], np.array([flip]))[0]
    proj = tr @ faces.maps.transpose(0, 2, 1) + faces.offsets
    cands = np.vstack([tr[None], proj, faces.verts])
    tags = ("target",) + faces.tags + faces.vert_tags
    ok = components_contain(faces.bodies, cands, APPROX_MEMBER_TOL)
    ok[1 + len(faces.maps) :] = True
    inf = np.where(ok, canonical_infidelities(tr[None], cands), np.inf)
    best = inf.min()
    ties = np.flatnonzero(inf <= best + 1e-15)
    # deterministic tie-break: lexicographically smallest coordinate
    pick = ties[np.lexsort(cands[ties].T[::-1])[0]]
    point = cands[pick] + 0.0  # also clears negative zeros
    if flip:
        point[0] = HALF_PI - point[0]
    return ApproximationResult(point, float(inf[pick]), tags[pick])


__all__ = [
    "ApproximationResult",
    "CandidateFaces",
    "EmptyPolytopeError",
    "candidate_faces",
    "faces_for_word",
    "nearest_point",
    "nearest_points",
]
