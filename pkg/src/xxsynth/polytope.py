"""H-representation polytopes in three dimensions.

A :class:`ConvexPolytope` is the solution set of ``A x <= b``.  Everything here
is small (a few dozen rows at most), so vertex enumeration is done by brute
force over plane triples and volumes are computed by triangulating the vertex
hull and integrating with a collapsed Gauss-Jacobi rule on each tetrahedron.

:func:`union_volume` computes the volume of a union of convex bodies by
inclusion-exclusion, pruning terms with two kinds of records:

* vanishing records: an intersection with zero volume, so every superset has
  zero volume as well;
* cancellation records ``(mask, j)``: ``vol(P_mask) == vol(P_mask ∩ P_j)``, so
  ``P_mask`` sits inside ``P_j`` and for every superset ``I`` of ``mask``
  the terms ``I`` and ``I ∪ {j}`` cancel.

Terms matched by cancellation records are paired off through the first
matching record.  Pairing fails only for a term ``I`` whose first record is
``t`` but whose partner ``I ∪ {j_t}`` first matches an earlier record ``s``
(which forces ``j_t ∈ mask_s``); those terms are reintroduced explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import roots_jacobi

MEMBER_TOL = 1e-10
VERTEX_TOL = 1e-9
DEFAULT_ORDER = 14

Density = Callable[[np.ndarray], np.ndarray]


class UnboundedPolytopeError(ValueError):
    """The inequality system is feasible but does not describe a bounded set."""


class DegenerateSystemError(ValueError):
    """An affine-hull equality system is rank deficient."""


class QuadratureError(RuntimeError):
    """Refinement check disagreed with the requested quadrature order."""


@dataclass(frozen=True)
class LinearInequality:
    """``coeffs · x <= rhs``."""

    coeffs: tuple[float, float, float]
    rhs: float

    def slack(self, x) -> float:
        return self.rhs - float(np.dot(self.coeffs, x))


@dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """The set ``{x : A x <= b}``."""

    A: np.ndarray
    b: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float).reshape(-1, 3)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if a.shape[0] != b.shape[0]:
            raise ValueError("row count of A and b differ")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_inequalities(
        cls, ineqs: Iterable[LinearInequality], label: str = ""
    ) -> "ConvexPolytope":
        ineqs = list(ineqs)
        a = np.array([q.coeffs for q in ineqs], dtype=float).reshape(-1, 3)
        b = np.array([q.rhs for q in ineqs], dtype=float)
        return cls(a, b, label)

    @property
    def inequalities(self) -> list[LinearInequality]:
        return [
            LinearInequality(tuple(float(c) for c in row), float(r))
            for row, r in zip(self.A, self.b)
        ]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "ineqs": [
                {"coeffs": [float(c) for c in row], "rhs": float(r)}
                for row, r in zip(self.A, self.b)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConvexPolytope":
        rows = obj["ineqs"]
        a = np.array([r["coeffs"] for r in rows], dtype=float).reshape(-1, 3)
        b = np.array([r["rhs"] for r in rows], dtype=float)
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("non-finite inequality data")
        return cls(a, b, str(obj.get("label", "")))


@dataclass(frozen=True)
class PolytopeUnion:
    components: tuple[ConvexPolytope, ...]

    def contains(self, x, tol: float = MEMBER_TOL) -> bool:
        return any(contains(p, x, tol) for p in self.components)


def box(lo, hi, label: str = "box") -> ConvexPolytope:
    """Axis-aligned box ``lo <= x <= hi``."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    eye = np.eye(3)
    return ConvexPolytope(np.vstack([eye, -eye]), np.concatenate([hi, -lo]), label)


def contains(p: ConvexPolytope, x, tol: float = MEMBER_TOL) -> bool:
    """True iff every inequality slack of ``p`` at ``x`` is at least ``-tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return bool(np.all(p.A @ np.asarray(x, float) <= p.b + tol))


def contains_points(p: ConvexPolytope, xs: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
    """Vectorized membership over points of shape (..., 3)."""
    return np.all(np.asarray(xs) @ p.A.T <= p.b + tol, axis=-1)


def _normalized_rows(a: np.ndarray, b: np.ndarray):
    norms = np.linalg.norm(a, axis=1)
    keep = norms > 1e-15
    # rows 0 <= rhs are vacuous or infeasible; keep the infeasible ones
    # as an explicit contradiction 0 <= -1
    zero_rows = ~keep
    contradiction = bool(np.any(b[zero_rows] < -MEMBER_TOL))
    a, b, norms = a[keep], b[keep], norms[keep]
    return a / norms[:, None], b / norms, contradiction


def intersect(*polys: ConvexPolytope, label: str | None = None) -> ConvexPolytope:
    """Intersection of convex polytopes with duplicate rows removed."""
    a = np.vstack([p.A for p in polys])
    b = np.concatenate([p.b for p in polys])
    a, b, contradiction = _normalized_rows(a, b)
    if contradiction:
        a = np.vstack([a, [[1.0, 0, 0], [-1.0, 0, 0]]])
        b = np.concatenate([b, [-1.0, 0.0]])
    key = np.round(np.hstack([a, b[:, None]]), 12)
    _, idx = np.unique(key, axis=0, return_index=True)
    idx = np.sort(idx)
    if label is None:
        label = " & ".join(p.label for p in polys if p.label)
    return ConvexPolytope(a[idx], b[idx], label)


_TRIPLE_CACHE: dict[int, np.ndarray] = {}


def _triples(k: int) -> np.ndarray:
    if k not in _TRIPLE_CACHE:
        _TRIPLE_CACHE[k] = np.array(list(combinations(range(k), 3)), dtype=int).reshape(-1, 3)
    return _TRIPLE_CACHE[k]


def _dedupe(pts: np.ndarray, tol: float) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in pts[np.lexsort(pts.T[::-1])]:
        if not any(np.abs(p - q).max() <= tol for q in out):
            out.append(p)
    return np.array(out).reshape(-1, 3)


def _plane_triple_points(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    tri = _triples(len(a))
    if len(tri) == 0:
        return np.empty((0, 3))
    m = a[tri]
    det = np.linalg.det(m)
    ok = np.abs(det) > 1e-12
    if not ok.any():
        return np.empty((0, 3))
    pts = np.linalg.solve(m[ok], b[tri[ok]][..., None])[..., 0]
    feas = np.all(pts @ a.T <= b + tol, axis=1)
    return pts[feas]


def is_bounded_direction_free(p: ConvexPolytope) -> bool:
    """True iff the recession cone ``{d : A d <= 0}`` is trivial."""
    eye = np.eye(3)
    a = np.vstack([p.A, eye, -eye])
    b = np.concatenate([np.zeros(len(p.A)), np.ones(6)])
    pts = _plane_triple_points(a, b, 1e-12)
    return not np.any(np.abs(pts).max(axis=1, initial=0) > 1e-9) if len(pts) else True


def is_feasible(p: ConvexPolytope) -> bool:
    if len(p.A) == 0:
        return True
    res = linprog(np.zeros(3), A_ub=p.A, b_ub=p.b, bounds=[(None, None)] * 3, method="highs")
    return res.status == 0


def vertices(p: ConvexPolytope, tol: float = VERTEX_TOL, check_bounded: bool = True) -> np.ndarray:
    """All vertices of ``p`` as an (n, 3) array, deduplicated at ``tol``.

    An infeasible system yields an empty array; a feasible unbounded one raises
    :class:`UnboundedPolytopeError`.
    """
    pts = _plane_triple_points(p.A, p.b, tol)
    verts = _dedupe(pts, tol) if len(pts) else np.empty((0, 3))
    if check_bounded and not is_bounded_direction_free(p):
        if len(verts) or is_feasible(p):
            raise UnboundedPolytopeError(f"polytope {p.label!r} is unbounded")
    return verts


def project_to_affine_hull(x, normals, offsets) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``{y : normals @ y = offsets}``."""
    n = np.atleast_2d(np.asarray(normals, float))
    o = np.atleast_1d(np.asarray(offsets, float))
    if np.linalg.matrix_rank(n, tol=1e-10) < n.shape[0]:
        raise DegenerateSystemError("equality rows are linearly dependent")
    x = np.asarray(x, float)
    gram = n @ n.T
    lam = np.linalg.solve(gram, (x @ n.T - o).T).T
    return x - lam @ n


@lru_cache(maxsize=None)
def _simplex_rule(order: int):
    """Collapsed Gauss-Jacobi rule on the unit simplex; weights sum to 1/6."""
    xu, wu = roots_jacobi(order, 2, 0)
    xv, wv = roots_jacobi(order, 1, 0)
    xw, ww = roots_jacobi(order, 0, 0)
    u, v, w = (xu + 1) / 2, (xv + 1) / 2, (xw + 1) / 2
    wu, wv, ww = wu / 8, wv / 4, ww / 2
    uu, vv, ww_ = np.meshgrid(u, v, w, indexing="ij")
    weight = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    uu, vv, ww_ = uu.ravel(), vv.ravel(), ww_.ravel()
    pts = np.stack([uu, (1 - uu) * vv, (1 - uu) * (1 - vv) * ww_], axis=1)
    return pts, weight


def tetrahedra(p: ConvexPolytope, verts: np.ndarray | None = None, tol: float = VERTEX_TOL) -> np.ndarray:
    """Triangulate ``p`` into tetrahedra (T, 4, 3) fanned from the vertex centroid.

    Returns an empty array when ``p`` is empty or lower dimensional.
    """
    if verts is None:
        verts = vertices(p, tol)
    if len(verts) < 4:
        return np.empty((0, 4, 3))
    centered = verts - verts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9) < 3:
        return np.empty((0, 4, 3))
    center = verts.mean(axis=0)
    a, b, _ = _normalized_rows(p.A, p.b)
    key = np.round(np.hstack([a, b[:, None]]), 9)
    _, idx = np.unique(key, axis=0, return_index=True)
    tets = []
    for i in np.sort(idx):
        on = np.abs(verts @ a[i] - b[i]) <= 10 * tol
        face = verts[on]
        if len(face) < 3:
            continue
        fc = face.mean(axis=0)
        normal = a[i]
        e1 = face[0] - fc
        if np.linalg.norm(e1) < 1e-14:
            e1 = face[1] - fc
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(normal, e1)
        rel = face - fc
        ang = np.arctan2(rel @ e2, rel @ e1)
        ring = face[np.argsort(ang)]
        for k in range(1, len(ring) - 1):
            tets.append([center, ring[0], ring[k], ring[k + 1]])
    return np.array(tets).reshape(-1, 4, 3)


def _tet_volumes(tets: np.ndarray) -> np.ndarray:
    e = tets[:, 1:] - tets[:, :1]
    return np.abs(np.linalg.det(e)) / 6


def integrate_tetrahedra(tets: np.ndarray, density: Density | None, order: int = DEFAULT_ORDER) -> float:
    if len(tets) == 0:
        return 0.0
    vols = _tet_volumes(tets)
    if density is None:
        return float(np.sum(vols))
    ref, w = _simplex_rule(order)
    e = tets[:, 1:] - tets[:, :1]  # (T, 3, 3)
    pts = tets[:, None, 0, :] + np.einsum("qk,tkd->tqd", ref, e)
    vals = density(pts)  # (T, Q)
    per_tet = 6 * vols * (vals @ w)
    return float(np.sum(per_tet))


def convex_volume_weighted(
    p: ConvexPolytope,
    density: Density | None = None,
    order: int = DEFAULT_ORDER,
    refine_check: bool = False,
    tol: float = VERTEX_TOL,
) -> float:
    """Integral of ``density`` over ``p`` (plain volume when ``density`` is None).

    With ``refine_check`` the integral is recomputed at a higher order and a
    :class:`QuadratureError` is raised if the two disagree beyond 1e-9.
    """
    tets = tetrahedra(p, tol=tol)
    val = integrate_tetrahedra(tets, density, order)
    if refine_check and density is not None:
        fine = integrate_tetrahedra(tets, density, order + 8)
        if abs(fine - val) > 1e-9 * max(1.0, abs(fine)):
            raise QuadratureError(f"order {order} gives {val}, order {order + 8} gives {fine}")
    return val


# --------------------------------------------------------------------------
# Union volume by inclusion-exclusion with skip lists


@dataclass
class UnionVolumeReport:
    volume: float
    evaluations: int
    total_terms: int
    vanishing: list[int] = field(default_factory=list)
    cancelling: list[tuple[int, int]] = field(default_factory=list)
    reintroduced: int = 0


def _bits(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def _sign(mask: int) -> int:
    return 1 if bin(mask).count("1") % 2 == 1 else -1


class _IntersectionVolumes:
    """Memoized volumes of intersections indexed by component bitmasks."""

    def __init__(self, components, density, order, cache=None, key=None):
        self.components = list(components)
        self.density = density
        self.order = order
        self.cache = {} if cache is None else cache
        self.key = key or (lambda mask: mask)
        self.evaluations = 0

    def __call__(self, mask: int) -> float:
        k = self.key(mask)
        if k in self.cache:
            return self.cache[k]
        polys = [self.components[i] for i in _bits(mask)]
        body = polys[0] if len(polys) == 1 else intersect(*polys)
        verts = vertices(body, check_bounded=False)
        tets = tetrahedra(body, verts)
        vol = integrate_tetrahedra(tets, self.density, self.order)
        self.cache[k] = vol
        self.evaluations += 1
        return vol


def union_volume_report(
    components: Sequence[ConvexPolytope],
    density: Density | None = None,
    order: int = DEFAULT_ORDER,
    zero_tol: float = 1e-13,
    equal_rtol: float = 1e-10,
    cache: dict | None = None,
    cache_key: Callable[[int], object] | None = None,
) -> UnionVolumeReport:
    """Union volume plus bookkeeping about how many terms were evaluated.

    ``cache`` / ``cache_key`` let callers share intersection volumes across
    several unions drawn from a common pool of bodies.
    """
    n = len(components)
    total_terms = 2 ** n - 1
    if n == 0:
        return UnionVolumeReport(0.0, 0, 0)
    for p in components:
        if not is_bounded_direction_free(p) and is_feasible(p):
            raise UnboundedPolytopeError(f"component {p.label!r} is unbounded")
    vol = _IntersectionVolumes(components, density, order, cache, cache_key)
    vanishing: list[int] = []
    cancelling: list[tuple[int, int]] = []
    computed: dict[int, float] = {}

    def is_equal(v, w):
        return abs(v - w) <= equal_rtol * max(abs(v), abs(w), 1e-300) + zero_tol

    def matched(mask: int) -> bool:
        return any(m & mask == m for m in vanishing) or any(
            m & mask == m for m, _ in cancelling
        )

    active: list[int] = []
    for i in range(n):
        mask = 1 << i
        v = vol(mask)
        computed[mask] = v
        if v <= zero_tol:
            vanishing.append(mask)
        else:
            active.append(mask)

    while active:
        active_set = set(active)
        candidates = set()
        # join step: extend each active term by a higher index, keep the
        # extension only if all of its one-smaller subsets are active
        for mask in active:
            top = mask.bit_length()
            for j in range(top, n):
                cand = mask | (1 << j)
                if all((cand & ~(1 << k)) in active_set for k in _bits(cand)):
                    candidates.add(cand)
        new_vanishing, new_cancelling = [], []
        for mask in sorted(candidates):
            v = vol(mask)
            computed[mask] = v
            if v <= zero_tol:
                new_vanishing.append(mask)
                continue
            for j in _bits(mask):
                parent = mask & ~(1 << j)
                if is_equal(v, computed[parent]):
                    new_cancelling.append((parent, j))
                    break
        vanishing.extend(new_vanishing)
        cancelling.extend(new_cancelling)
        active = [m for m in sorted(candidates) if not matched(m)]

    total = sum(_sign(m) * v for m, v in computed.items() if not matched(m))

    # Reintroduction pass: terms I whose first cancellation record is t while
    # I ∪ {j_t} first matches an earlier record s.
    reintroduced = 0
    full = (1 << n) - 1
    for t, (mask_t, j_t) in enumerate(cancelling):
        bit_t = 1 << j_t
        for s in range(t):
            mask_s, _ = cancelling[s]
            if not mask_s & bit_t:
                continue
            base = (mask_t | mask_s) & ~bit_t
            free = _bits(full & ~base & ~bit_t)

            def admissible(mask: int) -> bool:
                # first record matching mask is t
                if any(m & mask == m for m, _ in cancelling[:t]):
                    return False
                # first record matching mask ∪ {j_t} is s
                up = mask | bit_t
                if any(m & up == m for m, _ in cancelling[:s]):
                    return False
                # vanishing terms contribute nothing
                return not any(m & mask == m for m in vanishing)

            stack = [(base, 0)] if admissible(base) else []
            while stack:
                mask, start = stack.pop()
                total += _sign(mask) * vol(mask)
                reintroduced += 1
                for k in range(start, len(free)):
                    ext = mask | (1 << free[k])
                    if admissible(ext):
                        stack.append((ext, k + 1))

    return UnionVolumeReport(
        float(total), vol.evaluations, total_terms, vanishing, cancelling, reintroduced
    )


def union_volume(
    components: Sequence[ConvexPolytope],
    density: Density | None = None,
    order: int = DEFAULT_ORDER,
) -> float:
    """Volume (density-weighted if given) of the union of convex bodies."""
    return union_volume_report(components, density, order).volume
