"""Cost models, optimal synthesis over a gate set, and expected-cost evaluation.

A *word* is a multiset of XX strengths, stored as a descending tuple.  Circuit
polytopes do not depend on the order of the strengths, so words are searched
best-first by template cost, each multiset once.  Because template cost only
grows as strengths are appended, the search may stop as soon as no later word
can beat the best total found so far.
"""

from __future__ import annotations

import heapq
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .approximator import faces_for_word, nearest_points
from .circuit_polytope import ALCOVE, circuit_polytope, components_contain
from .decomposer import CircuitStep, TwoQubitCircuit, reconstruct, synthesize_canonical
from .polytope import (
    DEFAULT_ORDER,
    ConvexPolytope,
    contains_points,
    convex_volume_weighted,
    intersect,
    union_volume_report,
    vertices,
)
from .weyl import (
    HALF_PI,
    QUARTER_PI,
    SWAP,
    LocalGatePair,
    average_infidelity,
    canonical_infidelities,
    check_unitary,
    haar_density,
    haar_random_unitaries,
    kak_decompose,
    mirror_coordinates,
    monodromy_coordinates,
)

#: membership tolerance used to accept a word in exact mode
EXACT_MEMBER_TOL = 1e-9
#: hard cap on the number of words any single search may visit
MAX_WORDS = 200_000
_COST_DIGITS = 14
_MC_CHUNK = 2048


class EmptyGateSetError(ValueError):
    """The gate set has no usable strengths."""


class SearchExhaustedError(RuntimeError):
    """The word search hit its cap without terminating."""


@dataclass(frozen=True)
class ErrorModel:
    """Affine per-gate infidelity ``m * beta + b``."""

    m: float
    b: float

    def __post_init__(self):
        for name in ("m", "b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"error model parameter {name}={v!r} must be finite and >= 0")

    @classmethod
    def from_cx_cost(cls, cx_slope: float, b: float) -> "ErrorModel":
        """Build from the slope cost of a full CX (``m * pi/4``) and the offset."""
        return cls(cx_slope / QUARTER_PI, b)

    def gate_cost(self, beta: float) -> float:
        return self.m * beta + self.b


#: slope m * pi/4 = 5.76e-3 and offset b = 1.909e-3
REFERENCE_ERROR_MODEL = ErrorModel.from_cx_cost(5.76e-3, 1.909e-3)


@dataclass(frozen=True)
class GateSet:
    """Distinct XX strengths in (0, pi/4], stored in descending order."""

    strengths: tuple[float, ...]

    def __init__(self, strengths: Iterable[float]):
        vals = []
        for s in strengths:
            s = float(s)
            if not np.isfinite(s) or s <= 0 or s > QUARTER_PI + 1e-12:
                raise ValueError(f"gate strength {s!r} outside (0, pi/4]")
            s = min(s, QUARTER_PI)
            if not any(abs(s - v) <= 1e-12 for v in vals):
                vals.append(s)
        if not vals:
            raise EmptyGateSetError("gate set is empty")
        object.__setattr__(self, "strengths", tuple(sorted(vals, reverse=True)))

    @classmethod
    def from_fractions(cls, fractions: Iterable[float]) -> "GateSet":
        """Strengths as fractions of a CX (1.0 means pi/4)."""
        return cls(float(f) * QUARTER_PI for f in fractions)

    def __len__(self) -> int:
        return len(self.strengths)


class SynthesisMode(str, Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class SynthesisOptions:
    mode: SynthesisMode = SynthesisMode.EXACT
    mirror: bool = False
    member_tol: float = EXACT_MEMBER_TOL
    max_words: int = MAX_WORDS

    def __post_init__(self):
        object.__setattr__(self, "mode", SynthesisMode(self.mode))
        if not self.member_tol >= 0:
            raise ValueError("member_tol must be >= 0")
        if self.max_words < 1:
            raise ValueError("max_words must be >= 1")


@dataclass(frozen=True)
class SynthesisResult:
    circuit: TwoQubitCircuit
    approximant: np.ndarray
    total_cost: float
    mirrored: bool
    word: tuple[float, ...]
    target: np.ndarray
    infidelity: float
    template_cost: float

    def residual(self, u: np.ndarray) -> float:
        """Average infidelity between the circuit and ``u`` (or ``u @ SWAP`` if mirrored)."""
        goal = u @ SWAP if self.mirrored else u
        return average_infidelity(reconstruct(self.circuit), goal)


def template_cost(word: Sequence[float], em: ErrorModel) -> float:
    return float(sum(em.gate_cost(a) for a in word))


def iter_words(gs: GateSet, em: ErrorModel, max_words: int = MAX_WORDS) -> Iterator[tuple[float, tuple[float, ...]]]:
    """Yield ``(cost, word)`` in ascending cost order, ties by length then lexicographically."""
    heap = [(0.0, 0, (), 0.0)]
    seen = 0
    while heap:
        _, length, word, cost = heapq.heappop(heap)
        yield cost, word
        seen += 1
        if seen >= max_words:
            raise SearchExhaustedError(f"word search exceeded {max_words} templates")
        for s in gs.strengths:
            if word and s > word[-1]:
                continue
            child = word + (s,)
            c = cost + em.gate_cost(s)
            heapq.heappush(heap, (round(c, _COST_DIGITS), length + 1, child, c))


# ---------------------------------------------------------------------------
# vectorized planner


@dataclass
class Plan:
    """Best word per target (index into ``words``), its approximant and costs."""

    words: list[tuple[float, ...]]
    word_index: np.ndarray
    points: np.ndarray
    infidelity: np.ndarray
    total: np.ndarray


def _plan(targets: np.ndarray, gs: GateSet, em: ErrorModel, opts: SynthesisOptions) -> Plan:
    n = len(targets)
    best_total = np.full(n, np.inf)
    best_word = np.full(n, -1)
    best_pts = np.zeros((n, 3))
    best_inf = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    words: list[tuple[float, ...]] = []
    approximate = opts.mode is SynthesisMode.APPROXIMATE
    for cost, word in iter_words(gs, em, opts.max_words):
        # no later word can improve a target whose best total is at most this cost
        done |= best_total <= cost
        if done.all():
            break
        active = np.flatnonzero(~done)
        t = targets[active]
        if approximate:
            pts, inf = nearest_points(t, faces_for_word(word))
            inf = np.where(inf <= 1e-15, 0.0, inf)
        else:
            ok = components_contain(circuit_polytope(word).components, t, opts.member_tol)
            pts = t
            inf = np.where(ok, 0.0, np.inf)
        total = inf + cost
        better = total < best_total[active]
        if better.any():
            words.append(word)
            idx = active[better]
            best_total[idx] = total[better]
            best_word[idx] = len(words) - 1
            best_pts[idx] = pts[better]
            best_inf[idx] = inf[better]
        # a member needs no later word: every later total is at least its cost
        done[active[inf == 0.0]] = True
    return Plan(words, best_word, best_pts, best_inf, best_total)


def _combine_mirror(plain: Plan, mirror: Plan):
    """Per-target choice between the plain and mirrored plans (plain wins ties)."""
    use_mirror = mirror.total < plain.total
    return use_mirror


def plan_targets(coords: np.ndarray, gs: GateSet, em: ErrorModel, opts: SynthesisOptions):
    """Optimal (word, approximant, costs) for many canonical coordinates at once.

    Returns a list of dicts with keys ``word``, ``point``, ``infidelity``,
    ``total``, ``mirrored`` and ``target``.
    """
    coords = np.atleast_2d(np.asarray(coords, float))
    plain = _plan(coords, gs, em, opts)
    if opts.mirror:
        mcoords = mirror_coordinates(coords)
        mplan = _plan(mcoords, gs, em, opts)
        use_mirror = _combine_mirror(plain, mplan)
    else:
        mcoords, mplan, use_mirror = coords, plain, np.zeros(len(coords), bool)
    out = []
    for i in range(len(coords)):
        p, tgt = (mplan, mcoords) if use_mirror[i] else (plain, coords)
        out.append(
            {
                "word": p.words[p.word_index[i]],
                "point": p.points[i],
                "infidelity": float(p.infidelity[i]),
                "total": float(p.total[i]),
                "mirrored": bool(use_mirror[i]),
                "target": tgt[i],
            }
        )
    return out


def _plan_totals(coords: np.ndarray, gs: GateSet, em: ErrorModel, opts: SynthesisOptions):
    """Totals, word keys and mirror flags for a batch (no per-sample dicts)."""
    plain = _plan(coords, gs, em, opts)
    if not opts.mirror:
        words = [plain.words[k] for k in plain.word_index]
        return plain.total, words, np.zeros(len(coords), bool)
    mplan = _plan(mirror_coordinates(coords), gs, em, opts)
    use_mirror = _combine_mirror(plain, mplan)
    total = np.where(use_mirror, mplan.total, plain.total)
    words = [
        (mplan.words[mplan.word_index[i]] if use_mirror[i] else plain.words[plain.word_index[i]])
        for i in range(len(coords))
    ]
    return total, words, use_mirror


# ---------------------------------------------------------------------------
# single-target synthesis


def _dress(circuit: TwoQubitCircuit, left: LocalGatePair, right: LocalGatePair) -> TwoQubitCircuit:
    """The circuit for ``left @ C @ right``, merging into the end locals."""
    steps = list(circuit.steps)
    steps[0] = CircuitStep.of_local(steps[0].local @ right)
    steps[-1] = CircuitStep.of_local(left @ steps[-1].local)
    return TwoQubitCircuit(tuple(steps))


def optimal_synthesize(
    u,
    gs: GateSet,
    em: ErrorModel = REFERENCE_ERROR_MODEL,
    opts: SynthesisOptions = SynthesisOptions(),
) -> SynthesisResult:
    """Cheapest circuit over ``gs`` for ``u`` (or for ``u @ SWAP`` when mirroring wins).

    The cost of a circuit is its template cost plus, in approximate mode, the
    canonical infidelity of its approximant.
    """
    u = check_unitary(u)
    if not isinstance(gs, GateSet):
        gs = GateSet(gs)
    goals = [u, u @ SWAP] if opts.mirror else [u]
    kaks = [kak_decompose(g) for g in goals]
    coords = np.array([k[1] for k in kaks])
    plain = _plan(coords[:1], gs, em, opts)
    choice, plan = 0, plain
    if opts.mirror:
        mplan = _plan(coords[1:], gs, em, opts)
        if mplan.total[0] < plain.total[0]:
            choice, plan = 1, mplan
    word = plan.words[plan.word_index[0]]
    point = plan.points[0] + 0.0
    left, _, right = kaks[choice]
    core = synthesize_canonical(point, word)
    circuit = _dress(core, left, right)
    tc = template_cost(word, em)
    inf = float(canonical_infidelities(coords[choice], point))
    if opts.mode is SynthesisMode.EXACT:
        inf = 0.0
    return SynthesisResult(
        circuit=circuit,
        approximant=point,
        total_cost=inf + tc,
        mirrored=bool(choice),
        word=word,
        target=coords[choice],
        infidelity=inf,
        template_cost=tc,
    )


# ---------------------------------------------------------------------------
# expected costs


def _thread_count() -> int:
    raw = os.environ.get("XXSYNTH_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"XXSYNTH_THREADS={raw!r} is not an integer") from None
    if n < 1:
        raise ValueError(f"XXSYNTH_THREADS={raw!r} must be >= 1")
    return n


@dataclass
class MonteCarloEstimate:
    mean: float
    stderr: float
    n: int
    histogram: Counter = field(default_factory=Counter)


def _map_chunks(fn, chunks: list):
    threads = _thread_count()
    if threads == 1 or len(chunks) == 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _sample_coordinates(n: int, seed: int) -> np.ndarray:
    """Canonical coordinates of ``n`` Haar samples; sample i depends only on (seed, i)."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    us = haar_random_unitaries(n, seed)
    bounds = list(range(0, n, _MC_CHUNK))
    parts = _map_chunks(lambda lo: monodromy_coordinates(us[lo : lo + _MC_CHUNK]), bounds)
    return np.concatenate(parts)


def _summarize(values: np.ndarray, histogram: Counter) -> MonteCarloEstimate:
    n = len(values)
    stderr = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MonteCarloEstimate(float(np.mean(values)), stderr, n, histogram)


def expected_cost_monte_carlo(
    gs: GateSet,
    em: ErrorModel = REFERENCE_ERROR_MODEL,
    opts: SynthesisOptions = SynthesisOptions(),
    n: int = 10_000,
    seed: int = 0,
) -> MonteCarloEstimate:
    """Mean optimal total cost over ``n`` Haar samples, with a template histogram.

    Histogram keys are ``(word, mirrored)``.
    """
    if not isinstance(gs, GateSet):
        gs = GateSet(gs)
    coords = _sample_coordinates(n, seed)
    bounds = list(range(0, n, _MC_CHUNK))
    parts = _map_chunks(lambda lo: _plan_totals(coords[lo : lo + _MC_CHUNK], gs, em, opts), bounds)
    totals = np.concatenate([p[0] for p in parts])
    hist: Counter = Counter()
    for _, words, flags in parts:
        hist.update(zip(words, (bool(f) for f in flags)))
    return _summarize(totals, hist)


def _folded(coords: np.ndarray) -> np.ndarray:
    """Replace a1 by min(a1, pi/2 - a1): CAN(a) ~ CAN(pi/2 - a1, a2, -a3)."""
    out = np.array(coords, dtype=float)
    out[..., 0] = np.minimum(out[..., 0], HALF_PI - out[..., 0])
    return out


def continuous_limit_cost(em: ErrorModel, target) -> float:
    """Cost of CAN(a) built from one XX-type factor per nonzero coordinate.

    A first coordinate above pi/4 is realized by its complement, since
    XX_beta and XX_(pi/2 - beta) differ by local gates.
    """
    a = _folded(np.asarray(target, float))
    return float(sum(em.gate_cost(x) for x in a if x > 0))


def continuous_limit_monte_carlo(em: ErrorModel = REFERENCE_ERROR_MODEL, n: int = 10_000, seed: int = 0) -> MonteCarloEstimate:
    coords = _folded(_sample_coordinates(n, seed))
    values = np.where(coords > 0, em.m * coords + em.b, 0.0).sum(axis=1)
    return _summarize(values, Counter())


def continuous_limit_expected(em: ErrorModel = REFERENCE_ERROR_MODEL) -> float:
    """Haar average of :func:`continuous_limit_cost` by quadrature (coordinates are a.s. nonzero)."""

    def weighted_sum(p):
        return haar_density(p) * _folded(p).sum(axis=-1)

    # split at a1 = pi/4 so the integrand is smooth on each piece
    halves = [
        intersect(ALCOVE, ConvexPolytope(np.array([[1.0, 0, 0]]), np.array([QUARTER_PI]))),
        intersect(ALCOVE, ConvexPolytope(np.array([[-1.0, 0, 0]]), np.array([-QUARTER_PI]))),
    ]
    mean = sum(convex_volume_weighted(h, weighted_sum) for h in halves)
    return em.m * float(mean) + 3 * em.b


def _contained(inner: ConvexPolytope, outer: ConvexPolytope, inner_verts: np.ndarray) -> bool:
    return bool(np.all(contains_points(outer, inner_verts, 1e-9)))


@dataclass
class ExpectedCostReport:
    expected_cost: float
    covered: float
    contributions: list[tuple[tuple[float, ...], float, float]]  # (word, cost, haar mass)


def expected_cost_exact_report(
    gs: GateSet,
    em: ErrorModel = REFERENCE_ERROR_MODEL,
    coverage_tol: float = 1e-9,
    max_words: int = 5_000,
    order: int = DEFAULT_ORDER,
) -> ExpectedCostReport:
    """Haar-expected template cost under exact synthesis.

    Words are taken in ascending cost.  Each word contributes its cost times
    the Haar mass of its polytope minus everything cheaper words already
    cover.  The covered union is tracked as a family of maximal convex
    bodies, so its volume is an inclusion-exclusion over few terms.
    """
    if not isinstance(gs, GateSet):
        gs = GateSet(gs)
    family: list[tuple[int, ConvexPolytope, np.ndarray]] = []
    cache: dict = {}
    pool: list[ConvexPolytope] = []
    covered = 0.0
    expected = 0.0
    max_contributing = 0.0
    contributions = []
    for cost, word in iter_words(gs, em, max_words):
        if covered >= 1 - coverage_tol and cost > max_contributing:
            break
        changed = False
        for body in circuit_polytope(word).components:
            verts = vertices(body, check_bounded=False)
            if len(verts) < 4 or convex_volume_weighted(body) <= 1e-13:
                continue
            if any(_contained(body, other, verts) for _, other, _ in family):
                continue
            family = [f for f in family if not _contained(f[1], body, f[2])]
            pool.append(body)
            family.append((len(pool) - 1, body, verts))
            changed = True
        if not changed:
            continue
        ids = [f[0] for f in family]
        report = union_volume_report(
            [f[1] for f in family],
            haar_density,
            order=order,
            cache=cache,
            cache_key=lambda mask, ids=ids: frozenset(ids[i] for i in range(len(ids)) if mask >> i & 1),
        )
        mass = report.volume - covered
        if mass > 1e-13:
            expected += cost * mass
            max_contributing = max(max_contributing, cost)
            contributions.append((word, cost, mass))
        covered = max(covered, report.volume)
    else:
        raise SearchExhaustedError("word enumeration ended before covering the alcove")
    return ExpectedCostReport(expected, covered, contributions)


def expected_cost_exact(gs: GateSet, em: ErrorModel = REFERENCE_ERROR_MODEL) -> float:
    return expected_cost_exact_report(gs, em).expected_cost


# ---------------------------------------------------------------------------
# gate-set landscapes


def scan_1d(xs: Sequence[float], em: ErrorModel = REFERENCE_ERROR_MODEL, fixed=(QUARTER_PI,)) -> np.ndarray:
    """Exact expected cost of ``fixed + {x}`` for each x."""
    return np.array([expected_cost_exact(GateSet(tuple(fixed) + (x,)), em) for x in xs])


def scan_2d(
    xs: Sequence[float], ys: Sequence[float], em: ErrorModel = REFERENCE_ERROR_MODEL, fixed=(QUARTER_PI,)
) -> np.ndarray:
    """Exact expected cost of ``fixed + {x, y}`` on the grid (rows x, columns y)."""
    return np.array([[expected_cost_exact(GateSet(tuple(fixed) + (x, y)), em) for y in ys] for x in xs])


__all__ = [
    "EXACT_MEMBER_TOL",
    "EmptyGateSetError",
    "ErrorModel",
    "ExpectedCostReport",
    "GateSet",
    "MonteCarloEstimate",
    "Plan",
    "REFERENCE_ERROR_MODEL",
    "SearchExhaustedError",
    "SynthesisMode",
    "SynthesisOptions",
    "SynthesisResult",
    "continuous_limit_cost",
    "continuous_limit_expected",
    "continuous_limit_monte_carlo",
    "expected_cost_exact",
    "expected_cost_exact_report",
    "expected_cost_monte_carlo",
    "iter_words",
    "optimal_synthesize",
    "plan_targets",
    "scan_1d",
    "scan_2d",
    "template_cost",
]
