"""Exact synthesis of canonical gates from a sequence of XX interactions.

One extension step takes a canonical gate CAN(a_h, a_l, a_f) to
CAN(b_h, b_l, a_f) by appending XX_beta with Z rotations in between:

    CAN(b_h, b_l, a_f) ≅ (Z_r ⊗ Z_s) · CAN(a_h, a_l, a_f) · (Z_d ⊗ Z_e) · XX_beta · (Z_t ⊗ Z_u)

The ZZ slot is untouched because CAN(0, 0, x) commutes with Z ⊗ Z rotations,
so only a two-parameter "interference" problem remains: the pair (a_h, a_l)
can move to (b_h, b_l) exactly when

    a_h + a_l - beta <= b_h + b_l <= pi/2 - |pi/2 - (a_h + a_l + beta)|
    |a_h - a_l - beta| <= b_h - b_l <= a_h - a_l + beta.

Synthesis peels one strength off at a time, choosing at each stage a
predecessor inside the circuit polytope of the remaining strengths, then stacks
the per-step circuits with Weyl quarter-turns to move coordinates between the
XX/YY/ZZ slots.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .circuit_polytope import StrengthSequence, disordered_member, member, sequence_bounds
from .weyl import (
    HALF_PI,
    I2,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    QUARTER_PI,
    LocalGatePair,
    average_infidelity,
    can_matrix,
    phase_normalize,
    xx_matrix,
    z_rotation,
)

FEASIBILITY_TOL = 1e-9
RECONSTRUCTION_TOL = 1e-10
ENTRY_TOL = 1e-8


class InfeasibleStepError(ValueError):
    """The requested coordinates violate the interference inequalities."""


class PhaseSolveError(RuntimeError):
    """No consistent Z-rotation dressing relates the two operators."""


class SynthesisError(RuntimeError):
    """Raised when a synthesis invariant fails (indicates a bug)."""


class NotInPolytopeError(ValueError):
    """The target coordinate is not reachable with the requested strengths."""


# ---------------------------------------------------------------------------
# circuits


@dataclass(frozen=True)
class CircuitStep:
    """Either a local gate (``kind == "local"``) or an XX interaction."""

    kind: str
    local: LocalGatePair | None = None
    beta: float = 0.0

    def matrix(self) -> np.ndarray:
        if self.kind == "local":
            return self.local.matrix()
        return xx_matrix(self.beta)

    @staticmethod
    def xx(beta: float) -> "CircuitStep":
        return CircuitStep("xx", beta=float(beta))

    @staticmethod
    def of_local(pair: LocalGatePair) -> "CircuitStep":
        return CircuitStep("local", local=pair)


@dataclass(frozen=True)
class TwoQubitCircuit:
    """Steps in time order; local and XX steps alternate, locals at both ends."""

    steps: tuple[CircuitStep, ...]

    @property
    def xx_strengths(self) -> list[float]:
        return [s.beta for s in self.steps if s.kind == "xx"]

    def to_json(self) -> dict:
        out = []
        for s in self.steps:
            if s.kind == "local":
                out.append(
                    {
                        "kind": "local",
                        "q0": _su2_json(s.local.left),
                        "q1": _su2_json(s.local.right),
                    }
                )
            else:
                out.append({"kind": "xx", "beta": s.beta})
        return {"format": 1, "steps": out}

    @classmethod
    def from_json(cls, obj: dict) -> "TwoQubitCircuit":
        steps = []
        for s in obj["steps"]:
            if s["kind"] == "local":
                left = np.asarray(s["q0"]["re"]) + 1j * np.asarray(s["q0"]["im"])
                right = np.asarray(s["q1"]["re"]) + 1j * np.asarray(s["q1"]["im"])
                steps.append(CircuitStep.of_local(LocalGatePair(left, right)))
            elif s["kind"] == "xx":
                steps.append(CircuitStep.xx(float(s["beta"])))
            else:
                raise ValueError(f"unknown step kind {s['kind']!r}")
        return cls(tuple(steps))

    def to_text(self) -> str:
        lines = []
        for s in self.steps:
            if s.kind == "xx":
                lines.append(f"xx {s.beta!r}")
            else:
                lines.append(
                    "local "
                    + " ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in s.local.left.ravel())
                    + " | "
                    + " ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in s.local.right.ravel())
                )
        return "\n".join(lines)


def _su2_json(m: np.ndarray) -> dict:
    m = phase_normalize(m)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def reconstruct(circuit: TwoQubitCircuit) -> np.ndarray:
    """Matrix of the circuit: the product of its steps, first step rightmost."""
    u = np.eye(4, dtype=complex)
    for step in circuit.steps:
        u = step.matrix() @ u
    return u


def _assemble(matrix_order: Sequence) -> TwoQubitCircuit:
    """Build a circuit from a matrix-order product of pairs and XX strengths."""
    steps: list[CircuitStep] = []
    pending = LocalGatePair.identity()
    for item in reversed(list(matrix_order)):
        if isinstance(item, LocalGatePair):
            pending = item @ pending
        else:
            steps.append(CircuitStep.of_local(pending))
            steps.append(CircuitStep.xx(item))
            pending = LocalGatePair.identity()
    steps.append(CircuitStep.of_local(pending))
    return TwoQubitCircuit(tuple(steps))


# ---------------------------------------------------------------------------
# interference step


@dataclass(frozen=True)
class InterferenceRegion:
    """Feasible (b1, b2) for extending (a1, a2) by XX_beta."""

    sum_lo: float
    sum_hi: float
    diff_lo: float
    diff_hi: float

    def violations(self, b_pair, tol: float = FEASIBILITY_TOL) -> list[str]:
        s, d = b_pair[0] + b_pair[1], b_pair[0] - b_pair[1]
        out = []
        if s < self.sum_lo - tol:
            out.append(f"b1+b2 >= a1+a2-beta ({s:.6g} < {self.sum_lo:.6g})")
        if s > self.sum_hi + tol:
            out.append(f"b1+b2 <= pi/2-|pi/2-(a1+a2+beta)| ({s:.6g} > {self.sum_hi:.6g})")
        if d < self.diff_lo - tol:
            out.append(f"b1-b2 >= |a1-a2-beta| ({d:.6g} < {self.diff_lo:.6g})")
        if d > self.diff_hi + tol:
            out.append(f"b1-b2 <= a1-a2+beta ({d:.6g} > {self.diff_hi:.6g})")
        return out

    def contains(self, b_pair, tol: float = FEASIBILITY_TOL) -> bool:
        return not self.violations(b_pair, tol)


def interference_bounds(a_pair, beta: float) -> InterferenceRegion:
    a1, a2 = float(a_pair[0]), float(a_pair[1])
    return InterferenceRegion(
        sum_lo=a1 + a2 - beta,
        sum_hi=HALF_PI - abs(HALF_PI - (a1 + a2 + beta)),
        diff_lo=abs(a1 - a2 - beta),
        diff_hi=a1 - a2 + beta,
    )


@dataclass(frozen=True)
class InterferenceAngles:
    d: float
    e: float
    r: float
    s: float
    t: float
    u: float


def z_pair(x: float, y: float) -> LocalGatePair:
    return LocalGatePair(z_rotation(x), z_rotation(y))


def interference_inner(a_pair, d: float, e: float, beta: float) -> np.ndarray:
    """CAN(a1, a2, 0) · (Z_d ⊗ Z_e) · XX_beta."""
    return can_matrix((a_pair[0], a_pair[1], 0.0)) @ z_pair(d, e).matrix() @ xx_matrix(beta)


def _quotient(x: float, beta: float, y: float) -> tuple[float, float]:
    """Numerator and denominator of the cosine expression for one combination."""
    cx, sx, cb, sb = np.cos(x), np.sin(x), np.cos(beta), np.sin(beta)
    num = cx**2 * cb**2 + sx**2 * sb**2 - np.cos(y) ** 2
    den = 2 * cx * cb * sx * sb
    return num, den


def _half_arccos(num: float, den: float, which: str) -> float:
    if abs(den) < FEASIBILITY_TOL:
        if abs(num) > FEASIBILITY_TOL:
            raise InfeasibleStepError(f"degenerate {which} equation has residual {num:.3g}")
        return 0.0
    q = num / den
    if abs(q) > 1 + FEASIBILITY_TOL:
        raise InfeasibleStepError(f"cos 2({which}) = {q:.12g} lies outside [-1, 1]")
    # arccos is ill-conditioned at the ends; snap rounding noise onto them
    if abs(q) > 1 - 1e-14:
        q = float(np.sign(q))
    return float(np.arccos(np.clip(q, -1.0, 1.0)) / 2)


# Rows of the phase system: entry (j, k) of (Z_r ⊗ Z_s) M (Z_t ⊗ Z_u) picks up
# phase -(z0_j r + z1_j s) - (z0_k t + z1_k u); z = +1 on |0>, -1 on |1>.
_ZSIGN = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
_TOP_HALF = [(0, 0), (0, 3), (1, 1), (1, 2)]
_OTHER = [(2, 1), (2, 2), (3, 0), (3, 3)]


def solve_outer_phases(target: np.ndarray, inner: np.ndarray) -> tuple[float, float, float, float]:
    """Find (r, s, t, u) with (Z_r ⊗ Z_s) · inner · (Z_t ⊗ Z_u) ≅ target.

    The phases of the top-half nonzero entries determine (r, s, t, u); one more
    entry pins the global phase.  Entries that are (nearly) zero in either
    matrix are skipped in favour of the remaining ones.
    """
    target = np.asarray(target, complex)
    inner = np.asarray(inner, complex)
    rows, rhs = [], []
    rank = 0
    for j, k in _TOP_HALF + _OTHER:
        if abs(inner[j, k]) < ENTRY_TOL or abs(target[j, k]) < ENTRY_TOL:
            continue
        row = np.concatenate([-_ZSIGN[j], -_ZSIGN[k], [1.0]])
        trial = np.array(rows + [row])
        if np.linalg.matrix_rank(trial, tol=1e-9) > rank:
            rows.append(row)
            rhs.append(np.angle(target[j, k] / inner[j, k]))
            rank += 1
        if rank == 5:
            break
    if not rows:
        raise PhaseSolveError("no nondegenerate entries to read phases from")
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    r, s, t, u, _ = (float(x) for x in sol)
    got = z_pair(r, s).matrix() @ inner @ z_pair(t, u).matrix()
    if average_infidelity(got, target) > RECONSTRUCTION_TOL:
        raise PhaseSolveError("Z-rotation dressing does not reproduce the target")
    return r, s, t, u


def solve_interference(a_pair, b_pair, beta: float) -> InterferenceAngles:
    """Inner and outer Z angles realizing the step (a1, a2) -> (b1, b2)."""
    region = interference_bounds(a_pair, beta)
    bad = region.violations(b_pair)
    if bad:
        raise InfeasibleStepError("infeasible step: " + "; ".join(bad))
    a1, a2 = float(a_pair[0]), float(a_pair[1])
    b1, b2 = float(b_pair[0]), float(b_pair[1])
    plus = _half_arccos(*_quotient(a1 - a2, beta, b1 - b2), which="d+e")
    minus = _half_arccos(*_quotient(a1 + a2, beta, b1 + b2), which="d-e")
    target = can_matrix((b1, b2, 0.0))
    for sp in (1, -1):
        for sm in (1, -1):
            d = (sp * plus + sm * minus) / 2
            e = (sp * plus - sm * minus) / 2
            inner = interference_inner((a1, a2), d, e, beta)
            try:
                r, s, t, u = solve_outer_phases(target, inner)
            except PhaseSolveError:
                continue
            return InterferenceAngles(d, e, r, s, t, u)
    raise PhaseSolveError(
        f"no sign pattern reconstructs the step {(a1, a2)} -> {(b1, b2)} at beta={beta}"
    )


def solve_interference_angles(a_pair, b_pair, beta: float) -> tuple[float, float]:
    """The inner angles (d, e) of the step (a1, a2) -> (b1, b2)."""
    ang = solve_interference(a_pair, b_pair, beta)
    return ang.d, ang.e


# ---------------------------------------------------------------------------
# Weyl quarter-turns

_S = np.diag([1, 1j])
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_V = (I2 - 1j * PAULI_X) / np.sqrt(2)  # quarter turn about X
_GENERATORS = {"H": _H, "S": _S, "V": _V}


def _induced_permutation(g: np.ndarray) -> tuple[int, ...]:
    """perm with (G ⊗ G) CAN(a) (G ⊗ G)^† = CAN(a[perm])."""
    rng = np.random.default_rng(7)
    a = rng.uniform(0.05, 0.7, 3)
    w = np.kron(g, g)
    conj = w @ can_matrix(a) @ w.conj().T
    for perm in _PERMS:
        if average_infidelity(conj, can_matrix(a[list(perm)])) < 1e-12:
            return perm
    raise AssertionError("generator does not act by a permutation")


_PERMS = [(0, 1, 2), (1, 0, 2), (2, 1, 0), (0, 2, 1), (1, 2, 0), (2, 0, 1)]
_SIGN_GATES = {
    (1, 1, 1): I2,
    (-1, -1, 1): PAULI_Z,
    (1, -1, -1): PAULI_X,
    (-1, 1, -1): PAULI_Y,
}


@lru_cache(maxsize=None)
def _permutation_gates() -> dict[tuple[int, ...], np.ndarray]:
    # breadth-first over words in H, S, V so each permutation gets a shortest word
    table = {(0, 1, 2): I2}
    frontier = [I2]
    while len(table) < 6:
        nxt = []
        for g in frontier:
            for gen in _GENERATORS.values():
                h = gen @ g
                table.setdefault(_induced_permutation(h), h)
                nxt.append(h)
        frontier = nxt
    return table


def weyl_conjugation_gates(permutation=(0, 1, 2), signs=(1, 1, 1)) -> LocalGatePair:
    """Local W with W · CAN(a) · W^† = CAN(w·a), where (w·a)_i = signs_i a_{perm_i}.

    Only sign patterns with an even number of flips are realizable.
    """
    perm = tuple(int(p) for p in permutation)
    sg = tuple(int(np.sign(s)) for s in signs)
    if sorted(perm) != [0, 1, 2]:
        raise ValueError(f"{permutation!r} is not a permutation of the three axes")
    if sg not in _SIGN_GATES:
        raise ValueError(f"sign pattern {signs!r} is not realizable by local conjugation")
    g = _permutation_gates()[perm]
    return LocalGatePair(_SIGN_GATES[sg] @ g, g)


# ---------------------------------------------------------------------------
# predecessor selection

REGIONS = (
    ("unreflected", 2),
    ("unreflected", 0),
    ("reflected", 2),
    ("reflected", 0),
)


@dataclass(frozen=True)
class Predecessor:
    """Result of :func:`choose_predecessor`.

    ``a`` is (a_h, a_l, a_f); ``fixed_index`` says which coordinate of b is
    carried through unchanged as a_f (2 for b3, 0 for b1) and ``pair`` lists
    the indices of b forming (b_h, b_l).
    """

    a: np.ndarray
    region: str
    fixed_index: int

    @property
    def pair(self) -> tuple[int, int]:
        return (0, 1) if self.fixed_index == 2 else (1, 2)

    @property
    def tag(self) -> str:
        return f"{self.region}/a_f=b{self.fixed_index + 1}"


def region_constraints(b, prefix, beta: float, region: str, fixed_index: int) -> np.ndarray:
    """Rows (c_h, c_l, rhs) meaning c_h a_h + c_l a_l <= rhs for one region."""
    plus, slant, frustrum = sequence_bounds(prefix)
    top = (plus - slant) / 2
    b = np.asarray(b, float)
    bf = b[fixed_index]
    p, q = (b[0], b[1]) if fixed_index == 2 else (b[1], b[2])
    rows = []
    if fixed_index == 2:
        if region == "unreflected":
            rows += [(1, 1, plus - bf), (-1, 1, plus - 2 * top - bf)]
        else:
            rows += [(1, 1, HALF_PI - bf + plus - 2 * top), (-1, 1, -HALF_PI - bf + plus)]
    else:
        if region == "unreflected":
            rows += [(1, 1, plus - bf), (1, 1, bf + plus - 2 * top)]
        else:
            rows += [(1, 1, HALF_PI - bf + plus - 2 * top), (1, 1, -HALF_PI + bf + plus)]
    rows.append((0, 1, frustrum))
    rows += [
        (1, 1, p + q + beta),
        (1, 1, np.pi - p - q - beta),
        (-1, -1, -p - q + beta),
        (1, -1, p - q + beta),
        (-1, 1, -p + q + beta),
        (-1, 1, p - q - beta),
    ]
    # (a_h, a_l, a_f) must be an unsorted coordinate with a_h >= a_l
    rows += [(-1, 1, 0.0), (0, -1, 0.0), (1, 1, HALF_PI), (1, 0, HALF_PI - bf)]
    return np.array(rows, dtype=float)


def _best_vertex(rows: np.ndarray, tol: float = FEASIBILITY_TOL):
    best = None
    for i, j in combinations(range(len(rows)), 2):
        m = rows[[i, j], :2]
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-12:
            continue
        x = np.linalg.solve(m, rows[[i, j], 2])
        if np.all(rows[:, :2] @ x <= rows[:, 2] + tol):
            key = (round(x[0] + x[1], 12), round(x[0], 12), round(x[1], 12))
            if best is None or key < best[0]:
                best = (key, x)
    return None if best is None else best[1]


def choose_predecessor(b, prefix, beta: float) -> Predecessor:
    """Pick a predecessor coordinate for ``b`` when XX_beta is appended to ``prefix``."""
    prefix = prefix if isinstance(prefix, StrengthSequence) else StrengthSequence(prefix)
    b = np.asarray(b, float)
    for region, fixed in REGIONS:
        rows = region_constraints(b, prefix, beta, region, fixed)
        x = _best_vertex(rows)
        if x is None:
            continue
        a = np.array([max(x[0], 0.0), max(x[1], 0.0), b[fixed]])
        if disordered_member(prefix, a, tol=1e-8):
            return Predecessor(a, region, fixed)
    raise SynthesisError(
        f"no predecessor for b={b.tolist()} with prefix {list(prefix)} and beta={beta}"
        " (all four regions empty)"
    )


# ---------------------------------------------------------------------------
# recursive synthesis


def _sort_permutation(a: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Sorted (descending) copy of ``a`` and perm with a = sorted[perm]."""
    order = np.argsort(-a, kind="stable")
    perm = np.empty(3, dtype=int)
    perm[order] = np.arange(3)
    return a[order], tuple(int(p) for p in perm)


def _base_case(b: np.ndarray) -> list:
    if np.abs(b).max() <= 1e-8:
        return []
    if np.abs(b - np.array([HALF_PI, 0.0, 0.0])).max() <= 1e-8:
        return [LocalGatePair(PAULI_X.copy(), PAULI_X.copy())]  # CAN(pi/2,0,0) = -i XX
    raise SynthesisError(f"strengths exhausted at nonlocal coordinate {b.tolist()}")


def _synthesize(b: np.ndarray, seq: tuple[float, ...], path: list) -> list:
    """Matrix-order factors (LocalGatePair or float strength) for CAN(b)."""
    if not member(seq, b, tol=1e-8):
        raise SynthesisError(f"intermediate point {b.tolist()} left the polytope of {list(seq)}")
    path.append((seq, b.copy()))
    if not seq:
        return _base_case(b)
    beta, prefix = seq[-1], seq[:-1]
    pred = choose_predecessor(b, prefix, beta)
    a = pred.a
    p_idx = pred.pair
    ang = solve_interference(a[:2], b[list(p_idx)], beta)
    sorted_a, perm_a = _sort_permutation(a)
    w_a = weyl_conjugation_gates(perm_a)
    # CAN(b) = W_b CAN(b_h, b_l, a_f) W_b^†
    w_b = weyl_conjugation_gates((2, 0, 1)) if pred.fixed_index == 0 else LocalGatePair.identity()
    inner = _synthesize(sorted_a, prefix, path)
    return (
        [w_b, z_pair(ang.r, ang.s), w_a]
        + inner
        + [w_a.dagger(), z_pair(ang.d, ang.e), beta, z_pair(ang.t, ang.u), w_b.dagger()]
    )


def synthesize_canonical(a, alphas, return_path: bool = False):
    """Circuit with one XX step per strength in ``alphas`` realizing CAN(a).

    With ``return_path`` the intermediate coordinates (one per prefix) are
    returned alongside the circuit.
    """
    a = np.asarray(a, float)
    seq = tuple(sorted(StrengthSequence(alphas).alphas, reverse=True))
    if not member(seq, a, tol=1e-9):
        raise NotInPolytopeError(f"{a.tolist()} is not in the circuit polytope of {list(seq)}")
    path: list = []
    factors = _synthesize(a, seq, path)
    circuit = _assemble(factors)
    if return_path:
        return circuit, path[::-1]
    return circuit


__all__ = [
    "CircuitStep",
    "InfeasibleStepError",
    "InterferenceAngles",
    "InterferenceRegion",
    "NotInPolytopeError",
    "PhaseSolveError",
    "Predecessor",
    "SynthesisError",
    "TwoQubitCircuit",
    "choose_predecessor",
    "interference_bounds",
    "interference_inner",
    "reconstruct",
    "region_constraints",
    "solve_interference",
    "solve_interference_angles",
    "solve_outer_phases",
    "synthesize_canonical",
    "weyl_conjugation_gates",
    "z_pair",
]
