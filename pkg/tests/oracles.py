"""Independent reference computations used to cross-check the library."""

from itertools import combinations, combinations_with_replacement

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from xxsynth.circuit_polytope import components_contain
from xxsynth.polytope import convex_volume_weighted, intersect, vertices
from xxsynth.weyl import XX, YY, ZZ

HALF_PI = np.pi / 2


def can_by_expm(a) -> np.ndarray:
    return expm(-1j * (a[0] * XX + a[1] * YY + a[2] * ZZ))


def trace_infidelity(u: np.ndarray, v: np.ndarray) -> float:
    """1 - (d + |tr(U^dag V)|^2) / (d (d + 1)) with d = 4."""
    t = np.trace(u.conj().T @ v)
    return 1 - (4 + abs(t) ** 2) / 20


def naive_union_volume(bodies, density=None) -> float:
    """Plain inclusion-exclusion over all 2^n - 1 intersections."""
    total = 0.0
    for k in range(1, len(bodies) + 1):
        for idx in combinations(range(len(bodies)), k):
            body = bodies[idx[0]] if k == 1 else intersect(*[bodies[i] for i in idx])
            total += (-1) ** (k + 1) * convex_volume_weighted(body, density)
    return total


def monte_carlo_union_volume(bodies, lo, hi, n, rng):
    """Uniform-sampling estimate of the union volume inside the box [lo, hi]."""
    pts = rng.uniform(lo, hi, (n, 3))
    inside = components_contain(bodies, pts, 0.0)
    scale = float(np.prod(np.asarray(hi) - np.asarray(lo)))
    p = inside.mean()
    return scale * p, scale * np.sqrt(p * (1 - p) / n)


def _alcove_grid(n=60) -> np.ndarray:
    g1 = np.linspace(0, HALF_PI, n)
    g2 = np.linspace(0, HALF_PI / 2, n)
    grid = np.stack(np.meshgrid(g1, g2, g2, indexing="ij"), -1).reshape(-1, 3)
    keep = (grid[:, 0] >= grid[:, 1]) & (grid[:, 1] >= grid[:, 2]) & (grid[:, 0] + grid[:, 1] <= HALF_PI + 1e-12)
    return grid[keep]


_GRID = _alcove_grid()


def _infidelity(a, b):
    d = np.asarray(a) - np.asarray(b)
    c = np.prod(np.cos(d) ** 2, axis=-1)
    s = np.prod(np.sin(d) ** 2, axis=-1)
    return (16 - 16 * (c + s)) / 20


def brute_force_nearest(target, union, rng, refine=12) -> float:
    """Minimum infidelity over the union: 60^3 alcove grid, then SLSQP polish.

    Random convex combinations of vertices seed the search too, so thin
    (lower-dimensional) bodies that miss every grid point are still covered.
    """
    target = np.asarray(target, float)
    pts = [_GRID[components_contain(union.components, _GRID, 1e-12)]]
    for body in union.components:
        v = vertices(body, check_bounded=False)
        if len(v):
            pts.append(v)
            pts.append(rng.dirichlet(np.ones(len(v)), 200) @ v)
    pts = np.vstack(pts)
    inf = _infidelity(target[None], pts)
    best = float(inf.min())
    for i in np.argsort(inf)[:refine]:
        for body in union.components:
            if not np.all(body.A @ pts[i] <= body.b + 1e-12):
                continue
            res = minimize(
                lambda x: _infidelity(target, x),
                pts[i],
                method="SLSQP",
                constraints=[{"type": "ineq", "fun": lambda x, A=body.A, b=body.b: b - A @ x, "jac": lambda x, A=body.A: -A}],
                options={"ftol": 1e-15, "maxiter": 200},
            )
            if np.all(body.A @ res.x <= body.b + 1e-9):
                best = min(best, float(res.fun))
    return best


def cheapest_member_word(coords, strengths, em, depth=6, tol=1e-9):
    """Exhaustive search over all multisets of up to ``depth`` strengths."""
    from xxsynth.circuit_polytope import circuit_polytope

    coords = np.atleast_2d(coords)
    best = np.full(len(coords), np.inf)
    for k in range(depth + 1):
        for word in combinations_with_replacement(strengths, k):
            cost = sum(em.m * w + em.b for w in word)
            ok = components_contain(circuit_polytope(word).components, coords, tol)
            best = np.where(ok, np.minimum(best, cost), best)
    return best
