import numpy as np
import pytest

from oracles import trace_infidelity
from xxsynth.circuit_polytope import member
from xxsynth.optimizer import (
    REFERENCE_ERROR_MODEL,
    EmptyGateSetError,
    ErrorModel,
    GateSet,
    SearchExhaustedError,
    SynthesisMode,
    SynthesisOptions,
    continuous_limit_cost,
    continuous_limit_expected,
    continuous_limit_monte_carlo,
    expected_cost_exact,
    expected_cost_exact_report,
    expected_cost_monte_carlo,
    iter_words,
    optimal_synthesize,
    scan_1d,
    template_cost,
)
from xxsynth.weyl import CX, can_matrix, haar_random_unitary

P = np.pi
EM = REFERENCE_ERROR_MODEL
NICE = (P / 4, P / 8, P / 12)
FIG1 = (0.968, 0.273, 0.038)
APPROX = SynthesisOptions(mode=SynthesisMode.APPROXIMATE)


def dressed(a, seed=0):
    rng = np.random.default_rng(seed)

    def su2():
        return np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]

    return np.kron(su2(), su2()) @ can_matrix(a) @ np.kron(su2(), su2())


def test_error_model():
    assert template_cost([P / 4], EM) == pytest.approx(7.669e-3, abs=1e-15)
    assert template_cost([P / 8, P / 12, P / 12], EM) == pytest.approx(5.76e-3 * 7 / 6 + 3 * 1.909e-3, abs=1e-15)
    assert template_cost([], EM) == 0
    for bad in [(-1, 0), (0, float("nan")), (float("inf"), 0)]:
        with pytest.raises(ValueError):
            ErrorModel(*bad)


def test_gate_set_validation():
    gs = GateSet([P / 12, P / 4, P / 4 + 1e-13, P / 8])
    assert gs.strengths == (P / 4, P / 8, P / 12)
    assert GateSet.from_fractions([1, 0.5]).strengths == (P / 4, P / 8)
    with pytest.raises(EmptyGateSetError):
        GateSet([])
    for bad in [0, -0.1, 0.8, float("nan")]:
        with pytest.raises(ValueError):
            GateSet([bad])


def test_word_search_order():
    words = []
    it = iter_words(GateSet(NICE), EM)
    for _ in range(80):
        words.append(next(it))
    costs = [round(c, 14) for c, _ in words]
    assert costs == sorted(costs)
    assert len({w for _, w in words}) == len(words)
    assert all(list(w) == sorted(w, reverse=True) for _, w in words)
    assert words[0] == (0.0, ()) and words[1][1] == (P / 12,)
    with pytest.raises(SearchExhaustedError):
        list(iter_words(GateSet(NICE), EM, max_words=10))


def test_cx_needs_one_gate():
    res = optimal_synthesize(CX, GateSet([P / 4]))
    assert res.word == (P / 4,) and res.infidelity == 0
    assert res.residual(CX) < 1e-12


def test_haar_unitary_with_cx_needs_three():
    u = haar_random_unitary(3)
    res = optimal_synthesize(u, GateSet([P / 4]))
    assert res.word == (P / 4,) * 3
    assert res.total_cost == pytest.approx(3 * 7.669e-3, abs=1e-15)
    assert res.residual(u) < 1e-10


def test_fig1_template():
    u = dressed(FIG1)
    res = optimal_synthesize(u, GateSet(NICE))
    assert res.word == (P / 8, P / 12, P / 12)
    assert res.residual(u) < 1e-10
    assert trace_infidelity(can_matrix(res.approximant), can_matrix(FIG1)) < 1e-12


def test_approximation_never_costs_more():
    gs = GateSet([P / 4, P / 8])
    for seed in range(20):
        u = haar_random_unitary(100 + seed)
        exact = optimal_synthesize(u, gs)
        approx = optimal_synthesize(u, gs, EM, APPROX)
        mirrored = optimal_synthesize(u, gs, EM, SynthesisOptions(mode="approximate", mirror=True))
        assert approx.total_cost <= exact.total_cost + 1e-15
        assert mirrored.total_cost <= approx.total_cost + 1e-15
        assert member(approx.word, approx.approximant, 1e-8)
        assert approx.total_cost == pytest.approx(approx.template_cost + approx.infidelity, abs=1e-15)
        # the circuit realizes the approximant, so its residual is the approximation error
        assert mirrored.residual(u) == pytest.approx(mirrored.infidelity, abs=1e-10)


def test_cx_only_exact_mean_is_three_gates():
    est = expected_cost_monte_carlo(GateSet([P / 4]), EM, n=3000, seed=1)
    assert est.mean == pytest.approx(3 * 7.669e-3, abs=1e-15)
    assert est.histogram == {((P / 4,) * 3, False): 3000}


@pytest.mark.parametrize("strengths", [(P / 4, P / 8), NICE])
def test_exact_expectation_agrees_with_monte_carlo(strengths):
    gs = GateSet(strengths)
    est = expected_cost_monte_carlo(gs, EM, n=20_000, seed=7)
    assert abs(est.mean - expected_cost_exact(gs, EM)) <= 3 * est.stderr


def test_exact_expectation_is_stable_under_quadrature_order():
    gs = GateSet(NICE)
    base = expected_cost_exact_report(gs, EM)
    fine = expected_cost_exact_report(gs, EM, order=25)
    assert base.expected_cost == pytest.approx(fine.expected_cost, abs=1e-14)
    assert base.covered == pytest.approx(1, abs=1e-9)


def test_monte_carlo_is_deterministic_and_thread_independent(monkeypatch):
    gs = GateSet(NICE)
    opts = SynthesisOptions(mode="approximate", mirror=True)
    one = expected_cost_monte_carlo(gs, EM, opts, n=5000, seed=3)
    monkeypatch.setenv("XXSYNTH_THREADS", "3")
    three = expected_cost_monte_carlo(gs, EM, opts, n=5000, seed=3)
    assert one.mean == three.mean and one.histogram == three.histogram
    assert expected_cost_monte_carlo(gs, EM, opts, n=5000, seed=4).mean != one.mean
    monkeypatch.setenv("XXSYNTH_THREADS", "zero")
    with pytest.raises(ValueError):
        expected_cost_monte_carlo(gs, EM, n=10)


def test_continuous_limit():
    assert continuous_limit_cost(EM, (0, 0, 0)) == 0
    assert continuous_limit_cost(EM, (P / 4, 0, 0)) == pytest.approx(7.669e-3, abs=1e-15)
    # a1 above pi/4 is realized by its complement
    assert continuous_limit_cost(EM, (1.2, 0.2, 0.1)) == pytest.approx(continuous_limit_cost(EM, (P / 2 - 1.2, 0.2, 0.1)))
    limit = continuous_limit_expected(EM)
    # Haar mean of the folded coordinate sum is 3 pi / 8
    assert limit == pytest.approx(5.76e-3 / (P / 4) * 3 * P / 8 + 3 * 1.909e-3, rel=1e-5)
    est = continuous_limit_monte_carlo(EM, n=20_000, seed=9)
    assert abs(est.mean - limit) <= 3 * est.stderr


def test_degenerate_scan_point():
    cx_only = expected_cost_exact(GateSet([P / 4]), EM)
    assert scan_1d([P / 4], EM)[0] == pytest.approx(cx_only, abs=1e-15)
    assert cx_only == pytest.approx(3 * 7.669e-3, abs=1e-12)
