"""Two-qubit gate geometry: canonical gates, Weyl-alcove coordinates and KAK.

Every two-qubit unitary U can be written as ``L · CAN(a1, a2, a3) · L'`` with
``L, L'`` tensor products of one-qubit gates and

    CAN(a1, a2, a3) = exp(-i (a1 XX + a2 YY + a3 ZZ)).

The triple is unique once it is pushed into the positive canonical alcove

    a1 >= a2 >= a3 >= 0,   a1 + a2 <= pi/2,   (a3 > 0 or a1 <= pi/4),

and the resulting map ``U -> (a1, a2, a3)`` is what this module calls the
monodromy coordinate.  It is computed in the magic basis, where local gates
become real orthogonal matrices and canonical gates become diagonal.

Batched variants (leading stack axis) are provided for the Monte Carlo code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

HALF_PI = np.pi / 2
QUARTER_PI = np.pi / 4

#: coordinates with a3 below this are treated as lying on the a3 = 0 seam
SEAM_TOL = 1e-10
UNITARY_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
XX = np.kron(PAULI_X, PAULI_X)
YY = np.kron(PAULI_Y, PAULI_Y)
ZZ = np.kron(PAULI_Z, PAULI_Z)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

# Columns: Phi+, i Psi+, Psi-, i Phi-.  In this basis SU(2) x SU(2) is SO(4).
MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]],
    dtype=complex,
) / np.sqrt(2)
MAGIC_DAG = MAGIC.conj().T

# CAN(a) is diagonal in the magic basis with entries exp(-i * _LAMBDA @ a).
_LAMBDA = np.array(
    [[1, -1, 1], [1, 1, -1], [-1, -1, -1], [-1, 1, 1]], dtype=float
)


class NotUnitaryError(ValueError):
    """Raised when a matrix handed to the geometry routines is not unitary."""


@dataclass(frozen=True)
class LocalGatePair:
    """A local gate ``left ⊗ right``; ``left`` acts on the first qubit."""

    left: np.ndarray
    right: np.ndarray

    def matrix(self) -> np.ndarray:
        return np.kron(self.left, self.right)

    def dagger(self) -> "LocalGatePair":
        return LocalGatePair(self.left.conj().T, self.right.conj().T)

    def __matmul__(self, other: "LocalGatePair") -> "LocalGatePair":
        return LocalGatePair(self.left @ other.left, self.right @ other.right)

    @staticmethod
    def identity() -> "LocalGatePair":
        return LocalGatePair(I2.copy(), I2.copy())


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Return ``u`` as a complex array, raising if it is not a 4x4 unitary."""
    u = np.asarray(u, dtype=complex)
    if u.shape[-2:] != (4, 4):
        raise NotUnitaryError(f"expected a 4x4 matrix, got shape {u.shape}")
    resid = np.abs(u @ np.swapaxes(u.conj(), -1, -2) - np.eye(4)).max()
    if not np.isfinite(resid) or resid > tol:
        raise NotUnitaryError(f"matrix is not unitary (residual {resid:.3g})")
    return u


def can_matrix(coord) -> np.ndarray:
    """The canonical gate exp(-i(a1 XX + a2 YY + a3 ZZ)) for an unsorted triple."""
    a1, a2, a3 = (float(x) for x in coord)
    cm, sm = np.cos(a1 - a2), np.sin(a1 - a2)
    cp, sp = np.cos(a1 + a2), np.sin(a1 + a2)
    em, ep = np.exp(-1j * a3), np.exp(1j * a3)
    return np.array(
        [
            [em * cm, 0, 0, -1j * em * sm],
            [0, ep * cp, -1j * ep * sp, 0],
            [0, -1j * ep * sp, ep * cp, 0],
            [-1j * em * sm, 0, 0, em * cm],
        ],
        dtype=complex,
    )


def xx_matrix(beta: float) -> np.ndarray:
    """exp(-i beta XX), the XX interaction of strength ``beta``."""
    return can_matrix((beta, 0.0, 0.0))


def z_rotation(theta: float) -> np.ndarray:
    """exp(-i theta Z); the same half-angle convention as the canonical gate."""
    return np.diag([np.exp(-1j * theta), np.exp(1j * theta)])


def _to_special(u: np.ndarray) -> np.ndarray:
    det = np.linalg.det(u)
    return u / (det ** 0.25)[..., None, None]


def canonicalize(coords) -> np.ndarray:
    """Push arbitrary triples (shape (..., 3)) into the positive canonical alcove.

    Uses only symmetries that preserve local equivalence: shifting a single
    coordinate by pi/2, permuting coordinates, and negating two of them.
    """
    x = np.mod(np.asarray(coords, dtype=float), HALF_PI)
    flipped = x > QUARTER_PI
    y = np.where(flipped, HALF_PI - x, x)
    y = -np.sort(-y, axis=-1)
    odd = (np.sum(flipped, axis=-1) % 2) == 1
    # An odd number of negations is repaired by negating the smallest entry,
    # then folding (y1, y2, -y3) ~ (pi/2 - y1, y2, y3).
    out = y.copy()
    out[..., 0] = np.where(odd, HALF_PI - y[..., 0], y[..., 0])
    seam = out[..., 2] < SEAM_TOL
    out[..., 2] = np.where(seam, 0.0, out[..., 2])
    out[..., 0] = np.where(
        seam, np.minimum(out[..., 0], HALF_PI - out[..., 0]), out[..., 0]
    )
    return out


def _magic_eigenphases(u: np.ndarray) -> np.ndarray:
    """Angles lambda_k (summing to zero) with eigenvalues of UpT Up equal to exp(-2i lambda)."""
    up = MAGIC_DAG @ _to_special(u) @ MAGIC
    m = np.swapaxes(up, -1, -2) @ up
    lam = -np.angle(np.linalg.eigvals(m)) / 2
    lam = np.sort(lam, axis=-1)
    # det(m) = 1 forces sum(lam) to be a multiple of pi; each lam_k is only
    # defined modulo pi, so shift the largest ones down until the sum is zero.
    k = np.rint(lam.sum(axis=-1) / np.pi).astype(int)
    for j in range(1, 5):
        lam[..., -j] -= np.pi * (k >= j)
        lam[..., j - 1] += np.pi * (k <= -j)
    return lam


def monodromy_coordinates(us: np.ndarray) -> np.ndarray:
    """Vectorized :func:`monodromy_coordinate` over a stack (N, 4, 4)."""
    lam = _magic_eigenphases(np.asarray(us, dtype=complex))
    raw = np.stack(
        [
            (lam[..., 0] + lam[..., 1]) / 2,
            (lam[..., 1] + lam[..., 3]) / 2,
            (lam[..., 0] + lam[..., 3]) / 2,
        ],
        axis=-1,
    )
    return canonicalize(raw)


def monodromy_coordinate(u) -> np.ndarray:
    """Positive canonical coordinate of a two-qubit unitary."""
    u = check_unitary(u)
    return monodromy_coordinates(u[None])[0]


def _kron_factor(l4: np.ndarray) -> LocalGatePair:
    """Split a 4x4 tensor product A ⊗ B into unitary factors (phases arbitrary)."""
    r = l4.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    uu, ss, vh = np.linalg.svd(r)
    a = np.sqrt(ss[0]) * uu[:, 0].reshape(2, 2)
    b = np.sqrt(ss[0]) * vh[0].reshape(2, 2)
    a = a / np.sqrt(np.linalg.det(a))
    b = b / np.sqrt(np.linalg.det(b))
    return LocalGatePair(a, b)


def _real_orthogonal_eigenbasis(m: np.ndarray) -> np.ndarray:
    """Real orthogonal P with P^T m P diagonal, m complex symmetric unitary.

    Re(m) and Im(m) are commuting real symmetric matrices; a generic real
    combination of them has exactly their common eigenvectors.
    """
    rng = np.random.default_rng(1234)
    herm_re, herm_im = m.real, m.imag
    best, best_err = None, np.inf
    for _ in range(16):
        w = rng.uniform(0.3, 3.0)
        _, p = np.linalg.eigh(herm_re + w * herm_im)
        d = p.T @ m @ p
        err = np.abs(d - np.diag(np.diag(d))).max()
        if err < best_err:
            best, best_err = p, err
        if err < 1e-13:
            break
    return best


def kak_decompose(u) -> tuple[LocalGatePair, np.ndarray, LocalGatePair]:
    """Return ``(L, a, L')`` with ``u ≅ L · CAN(a) · L'`` up to global phase."""
    u = check_unitary(u)
    coord = monodromy_coordinate(u)
    v = np.exp(-1j * (_LAMBDA @ coord))  # CAN(coord) in the magic basis
    up = MAGIC_DAG @ _to_special(u) @ MAGIC
    m = up.T @ up
    p = _real_orthogonal_eigenbasis(m)
    eig = np.diag(p.T @ m @ p)
    best = None
    for sign in (1.0, -1.0):
        cost = np.abs(eig[:, None] - sign * v[None, :] ** 2)
        rows, cols = linear_sum_assignment(cost)
        total = cost[rows, cols].sum()
        if best is None or total < best[0]:
            order = np.empty(4, dtype=int)
            order[cols] = rows
            best = (total, sign, order)
    _, sign, order = best
    p = p[:, order]
    if np.linalg.det(p) < 0:
        p[:, 0] = -p[:, 0]
    omega = 1.0 if sign > 0 else 1j
    k1 = up @ p @ np.diag(1.0 / (omega * v))
    # k1 is real orthogonal up to rounding; snap it back onto SO(4).
    uu, _, vh = np.linalg.svd(k1.real)
    k1 = uu @ vh
    left = _kron_factor(MAGIC @ k1 @ MAGIC_DAG)
    right = _kron_factor(MAGIC @ p.T @ MAGIC_DAG)
    return left, coord, right


def average_infidelity(u, v) -> float:
    """Average gate infidelity (16 - |tr U^† V|^2) / 20 between two gates."""
    tr = np.trace(np.asarray(u).conj().T @ np.asarray(v))
    return float(max(0.0, (16 - abs(tr) ** 2) / 20))


def canonical_infidelities(a, b) -> np.ndarray:
    """Vectorized :func:`canonical_infidelity` (broadcasts over leading axes)."""
    delta = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    c = np.prod(np.cos(delta) ** 2, axis=-1)
    s = np.prod(np.sin(delta) ** 2, axis=-1)
    return np.maximum(0.0, (16 - 16 * (c + s)) / 20)


def canonical_infidelity(a, b) -> float:
    """Average infidelity between CAN(a) and CAN(b), in closed form.

    With deltas d_j = a_j - b_j this is
    (16 - 16 (prod cos^2 d_j + prod sin^2 d_j)) / 20.
    """
    return float(canonical_infidelities(a, b))


def mirror_coordinate(a) -> np.ndarray:
    """Canonical coordinate of CAN(a) · SWAP."""
    a1, a2, a3 = (float(x) for x in a)
    if a1 <= QUARTER_PI:
        raw = (QUARTER_PI + a3, QUARTER_PI - a2, QUARTER_PI - a1)
    else:
        raw = (QUARTER_PI - a3, QUARTER_PI - a2, a1 - QUARTER_PI)
    return canonicalize(np.array(raw))


def mirror_coordinates(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mirror_coordinate` via the SWAP shift (pi/4, pi/4, pi/4)."""
    return canonicalize(np.asarray(a, dtype=float) + QUARTER_PI)


HAAR_NORMALIZATION = 384 / np.pi


def haar_density(a) -> np.ndarray:
    """Density of the Haar pushforward on the alcove (broadcasts over (..., 3))."""
    c = 2 * np.asarray(a, dtype=float)
    c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2]
    val = (
        np.sin(c1 + c2) * np.sin(c1 - c2)
        * np.sin(c1 + c3) * np.sin(c1 - c3)
        * np.sin(c2 + c3) * np.sin(c2 - c3)
    )
    return HAAR_NORMALIZATION * np.abs(val)


def haar_random_unitary(seed) -> np.ndarray:
    """Haar-random element of U(4); deterministic in ``seed``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def haar_random_unitaries(n: int, seed: int) -> np.ndarray:
    """``n`` Haar samples, sample ``i`` drawn from the ``i``-th child seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return np.stack([haar_random_unitary(s) for s in children]) if n else np.empty((0, 4, 4), complex)


def phase_normalize(u: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first nonzero entry (row-major) is real >= 0."""
    u = np.asarray(u, dtype=complex)
    flat = u.ravel()
    idx = np.flatnonzero(np.abs(flat) > 1e-12)
    if idx.size == 0:
        return u.copy()
    z = flat[idx[0]]
    out = u * (abs(z) / z)
    out.flat[idx[0]] = abs(z)  # exactly real, so normalizing twice is a no-op
    return out


def unitary_to_json(u: np.ndarray) -> dict:
    u = phase_normalize(u)
    return {"re": u.real.tolist(), "im": u.imag.tolist()}


def unitary_from_json(obj: dict) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != im.shape:
        raise ValueError("re and im parts have different shapes")
    return re + 1j * im
