"""Circuit polytopes of XX-type interaction sequences.

For strengths ``alphas`` (each in [0, pi/4]) let ``alpha_plus`` be their sum,
``alpha_max`` the largest and ``alpha_second`` the second largest, with the
list padded by zeros.  The canonical coordinates reachable by interleaving the
XX interactions with arbitrary local gates form the union of two convex bodies
inside the alcove:

    unreflected                           reflected
    a1 + a2 + a3 <= alpha_plus            -a1 + a2 + a3 <= alpha_plus - pi/2
    -a1 + a2 + a3 <= alpha_plus - 2 max   a1 + a2 + a3 <= alpha_plus - 2 max + pi/2
    a3 <= alpha_plus - max - second       a3 <= alpha_plus - max - second

(strength, slant and frustrum bounds).  The reflected body is the image of the
unreflected one under a1 -> pi/2 - a1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .polytope import MEMBER_TOL, ConvexPolytope, PolytopeUnion, contains, intersect
from .weyl import HALF_PI, QUARTER_PI, canonicalize

#: the closed alcove: a1 >= a2 >= a3 >= 0, a1 + a2 <= pi/2
ALCOVE = ConvexPolytope(
    np.array([[-1.0, 1, 0], [0, -1, 1], [0, 0, -1], [1, 1, 0]]),
    np.array([0.0, 0.0, 0.0, HALF_PI]),
    "alcove",
)

_STRENGTH_TOL = 1e-12


@dataclass(frozen=True)
class StrengthSequence:
    """Ordered XX strengths in radians, each in [0, pi/4]."""

    alphas: tuple[float, ...]

    def __init__(self, alphas: Iterable[float] = ()):
        vals = tuple(float(a) for a in alphas)
        for a in vals:
            if not np.isfinite(a) or a < -_STRENGTH_TOL or a > QUARTER_PI + _STRENGTH_TOL:
                raise ValueError(f"strength {a!r} outside [0, pi/4]")
        vals = tuple(min(max(a, 0.0), QUARTER_PI) for a in vals)
        object.__setattr__(self, "alphas", vals)

    @classmethod
    def from_fractions(cls, fractions: Iterable[float]) -> "StrengthSequence":
        """Strengths given as fractions of a CX (1.0 means pi/4)."""
        return cls(float(f) * QUARTER_PI for f in fractions)

    def __len__(self) -> int:
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)

    @property
    def total(self) -> float:
        return float(sum(self.alphas))

    @property
    def largest(self) -> float:
        return self._top(0)

    @property
    def second(self) -> float:
        return self._top(1)

    def _top(self, k: int) -> float:
        nonzero = sorted((a for a in self.alphas if a > 0), reverse=True)
        return nonzero[k] if len(nonzero) > k else 0.0

    def extended(self, beta: float) -> "StrengthSequence":
        return StrengthSequence(self.alphas + (beta,))


def _as_sequence(alphas) -> StrengthSequence:
    return alphas if isinstance(alphas, StrengthSequence) else StrengthSequence(alphas)


def sequence_bounds(alphas) -> tuple[float, float, float]:
    """(strength, slant, frustrum) right-hand sides for the unreflected body."""
    seq = _as_sequence(alphas)
    plus, top, second = seq.total, seq.largest, seq.second
    return plus, plus - 2 * top, plus - top - second


def circuit_polytope(alphas) -> PolytopeUnion:
    """The two convex bodies whose union is the circuit polytope of ``alphas``."""
    seq = _as_sequence(alphas)
    strength, slant, frustrum = sequence_bounds(seq)
    tag = ",".join(f"{a:.6g}" for a in seq.alphas) or "empty"
    unreflected = ConvexPolytope(
        np.array([[1.0, 1, 1], [-1, 1, 1], [0, 0, 1]]),
        np.array([strength, slant, frustrum]),
        f"unreflected[{tag}]",
    )
    reflected = ConvexPolytope(
        np.array([[-1.0, 1, 1], [1, 1, 1], [0, 0, 1]]),
        np.array([strength - HALF_PI, slant + HALF_PI, frustrum]),
        f"reflected[{tag}]",
    )
    return PolytopeUnion(
        (
            intersect(ALCOVE, unreflected, label=unreflected.label),
            intersect(ALCOVE, reflected, label=reflected.label),
        )
    )


def member(alphas, a, tol: float = MEMBER_TOL) -> bool:
    """Is the canonical coordinate ``a`` reachable with strengths ``alphas``?"""
    return circuit_polytope(alphas).contains(np.asarray(a, float), tol)


def disordered_member(alphas, a, tol: float = MEMBER_TOL) -> bool:
    """Membership for an unsorted coordinate (sorted and folded first)."""
    return member(alphas, canonicalize(np.asarray(a, float)), tol)


def components_contain(bodies: Sequence[ConvexPolytope], pts: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
    """Vectorized union membership for points (..., 3)."""
    pts = np.asarray(pts, float)
    out = np.zeros(pts.shape[:-1], dtype=bool)
    for p in bodies:
        out |= np.all(pts @ p.A.T <= p.b + tol, axis=-1)
    return out


__all__ = [
    "ALCOVE",
    "StrengthSequence",
    "circuit_polytope",
    "components_contain",
    "contains",
    "disordered_member",
    "member",
    "sequence_bounds",
]
