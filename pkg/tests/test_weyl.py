import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from oracles import can_by_expm, trace_infidelity
from xxsynth.weyl import (
    CX,
    SWAP,
    NotUnitaryError,
    average_infidelity,
    can_matrix,
    canonical_infidelity,
    canonicalize,
    check_unitary,
    haar_density,
    haar_random_unitaries,
    haar_random_unitary,
    kak_decompose,
    mirror_coordinate,
    mirror_coordinates,
    monodromy_coordinate,
    monodromy_coordinates,
    unitary_from_json,
    unitary_to_json,
)

P = np.pi


def random_su2(rng):
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def random_local(rng):
    return np.kron(random_su2(rng), random_su2(rng))


def alcove_grid():
    pts = []
    for a1 in np.linspace(0, P / 2, 21):
        for a2 in np.linspace(0, P / 4, 11):
            for a3 in np.linspace(0, P / 4, 11):
                if a1 >= a2 >= a3 and a1 + a2 <= P / 2 + 1e-12:
                    pts.append((a1, a2, a3))
    return np.array(pts)


coords3 = st.tuples(*[st.floats(-3.0, 3.0, allow_nan=False)] * 3)


def test_can_matrix_matches_matrix_exponential():
    rng = np.random.default_rng(0)
    for a in rng.uniform(-2, 2, (20, 3)):
        assert np.allclose(can_matrix(a), can_by_expm(a), atol=1e-14)


@pytest.mark.parametrize(
    "u, expected",
    [
        (np.eye(4), (0, 0, 0)),
        (CX, (P / 4, 0, 0)),
        (SWAP, (P / 4, P / 4, P / 4)),
    ],
    ids=["identity", "cx", "swap"],
)
def test_known_coordinates(u, expected):
    assert np.allclose(monodromy_coordinate(u), expected, atol=1e-12)


def test_coordinates_of_canonical_gates_on_alcove_grid():
    grid = alcove_grid()
    got = monodromy_coordinates(np.array([can_matrix(a) for a in grid]))
    assert np.allclose(got, canonicalize(grid), atol=1e-9)
    # off the a1 > pi/4 seam the alcove points are their own canonical form
    interior = (grid[:, 2] > 1e-6) | (grid[:, 0] <= P / 4)
    assert np.allclose(got[interior], grid[interior], atol=1e-9)


def test_seam_identification():
    a = np.array([0.9, 0.3, 0.0])
    assert np.allclose(monodromy_coordinate(can_matrix(a)), [P / 2 - 0.9, 0.3, 0.0], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(coords3)
def test_canonicalize_lands_in_alcove_and_preserves_class(a):
    c = canonicalize(np.array(a))
    assert c[0] >= c[1] - 1e-12 and c[1] >= c[2] - 1e-12 and c[2] >= -1e-12
    assert c[0] + c[1] <= P / 2 + 1e-12
    assert c[2] > 0 or c[0] <= P / 4 + 1e-12
    assert np.allclose(monodromy_coordinate(can_matrix(a)), c, atol=1e-8)


def test_local_invariance_and_kak_reconstruction():
    rng = np.random.default_rng(1)
    for i in range(100):
        u = haar_random_unitary(i)
        left, c, right = kak_decompose(u)
        assert trace_infidelity(u, left.matrix() @ can_matrix(c) @ right.matrix()) < 1e-12
        dressed = random_local(rng) @ u @ random_local(rng)
        assert np.allclose(monodromy_coordinate(dressed), c, atol=1e-9)


@pytest.mark.parametrize(
    "a",
    [(0, 0, 0), (P / 4, 0, 0), (P / 4, P / 4, P / 4), (0.3, 0.3, 0.3), (0.3, 0.3, 0), (0.3, 0.2, 0.2), (0.5, 0.2, 1e-8)],
)
def test_kak_on_degenerate_spectra(a):
    rng = np.random.default_rng(2)
    u = random_local(rng) @ can_matrix(a) @ random_local(rng)
    left, c, right = kak_decompose(u)
    assert np.allclose(c, canonicalize(np.array(a)), atol=1e-8)
    assert trace_infidelity(u, left.matrix() @ can_matrix(c) @ right.matrix()) < 1e-12


def test_canonical_infidelity_equals_trace_formula():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        ref = trace_infidelity(can_matrix(a), can_matrix(b))
        assert canonical_infidelity(a, b) == pytest.approx(ref, abs=1e-12)
        assert average_infidelity(can_matrix(a), can_matrix(b)) == pytest.approx(ref, abs=1e-12)


def test_cx_versus_identity_infidelity():
    # |tr CAN(pi/4, 0, 0)|^2 = 8, so the average infidelity is 1 - (4 + 8) / 20
    assert canonical_infidelity((P / 4, 0, 0), (0, 0, 0)) == pytest.approx(0.4, abs=1e-15)


def test_average_infidelity_ignores_global_phase():
    u = haar_random_unitary(5)
    assert average_infidelity(u, np.exp(0.7j) * u) == pytest.approx(0, abs=1e-14)


def test_mirror_matches_swap_product():
    for i in range(100):
        u = haar_random_unitary(1000 + i)
        c = monodromy_coordinate(u)
        assert np.allclose(monodromy_coordinate(u @ SWAP), mirror_coordinate(c), atol=1e-9)
        assert np.allclose(mirror_coordinates(c[None])[0], mirror_coordinate(c), atol=1e-9)


def test_mirror_swaps_extremes():
    assert np.allclose(mirror_coordinate((0, 0, 0)), (P / 4, P / 4, P / 4))
    assert np.allclose(mirror_coordinate((P / 4, P / 4, P / 4)), (0, 0, 0), atol=1e-15)


def test_haar_density_normalization_by_adaptive_quadrature():
    def f(a3, a2, a1):
        return float(haar_density(np.array([a1, a2, a3])))

    total, _ = integrate.tplquad(
        f, 0, P / 2, lambda a1: 0, lambda a1: min(a1, P / 2 - a1), lambda a1, a2: 0, lambda a1, a2: a2, epsabs=1e-10
    )
    assert total == pytest.approx(1.0, abs=1e-8)


def test_haar_density_peak():
    assert haar_density(np.array([P / 4, P / 8, 0.0])) > haar_density(np.array([P / 4, P / 8 + 0.05, 0.0]))
    assert haar_density(np.array([0.0, 0.0, 0.0])) == 0


def test_haar_sampling_is_deterministic_and_unitary():
    us = haar_random_unitaries(8, seed=11)
    assert np.array_equal(us, haar_random_unitaries(8, seed=11))
    assert not np.array_equal(us, haar_random_unitaries(8, seed=12))
    for u in us:
        assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    # prefix stability: sample i does not depend on n
    assert np.array_equal(us[:3], haar_random_unitaries(3, seed=11))


def test_check_unitary_rejects():
    with pytest.raises(NotUnitaryError):
        check_unitary(2 * np.eye(4))
    with pytest.raises(NotUnitaryError):
        check_unitary(np.eye(3))


def test_unitary_json_round_trip_up_to_phase():
    u = haar_random_unitary(9)
    back = unitary_from_json(unitary_to_json(u))
    assert trace_infidelity(u, back) < 1e-15
    assert np.array_equal(unitary_from_json(unitary_to_json(back)), back)
