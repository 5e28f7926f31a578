"""Matrix/membrane correspondence for the SU(2) (N = 2) regularization.

A configuration is a pair of real 3-vectors ``(x, y)``; the transverse
matrices are ``X = x . sigma`` and ``Y = y . sigma`` in the Pauli basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

#: Coupling of the rescaled Hamiltonian, (4 pi)^2 / sqrt(3)^6.
KAPPA = (4.0 * math.pi) ** 2 / 27.0

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class MembraneConfig:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).reshape(3)
        y = np.asarray(self.y, dtype=float).reshape(3)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("configuration components must be finite")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MembraneConfig):
            return NotImplemented
        return bool(np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y))

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.y.tobytes()))

    def scaled(self, c: float) -> "MembraneConfig":
        return MembraneConfig(c * self.x, c * self.y)


@dataclass(frozen=True)
class TracelessHermitian2:
    """Traceless Hermitian 2x2 matrix stored by its Pauli coefficients.

    The coefficient for the identity is pinned to zero, so tracelessness and
    Hermiticity hold by construction.
    """

    c1: float
    c2: float
    c3: float
    c0: float = 0.0

    def __post_init__(self) -> None:
        if self.c0 != 0.0:
            raise ValueError("identity component must vanish for a traceless matrix")

    def matrix(self) -> np.ndarray:
        return self.c1 * PAULI[0] + self.c2 * PAULI[1] + self.c3 * PAULI[2]


@dataclass(frozen=True)
class InvariantCoords:
    U: float
    V: float
    W: float


def compose_matrix(v) -> TracelessHermitian2:
    v1, v2, v3 = (float(c) for c in v)
    return TracelessHermitian2(v1, v2, v3)


def decompose_matrix(m: TracelessHermitian2) -> np.ndarray:
    return np.array([m.c1, m.c2, m.c3])


def matrix_to_vector(mat: np.ndarray) -> np.ndarray:
    """Pauli coefficients of a dense 2x2 matrix, via Tr(sigma_k M) / 2."""
    mat = np.asarray(mat, dtype=complex)
    return np.array([0.5 * np.trace(p @ mat).real for p in PAULI])


def invariant_values(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (U, V) for arrays of shape (..., 3).

    V is taken as |x cross y|^2 rather than |x|^2 |y|^2 - (x.y)^2, which
    cancels catastrophically for nearly parallel pairs.
    """
    c = np.cross(x, y)
    return 0.5 * (np.sum(x * x, axis=-1) + np.sum(y * y, axis=-1)), np.sum(c * c, axis=-1)


def invariants(cfg: MembraneConfig) -> InvariantCoords:
    U, V = invariant_values(cfg.x, cfg.y)
    U, V = float(U), float(V)
    V = min(max(V, 0.0), U * U)
    W = V / (U * U) if U * U > 0 else 0.0
    return InvariantCoords(U, V, min(W, 1.0))


def potential(cfg: MembraneConfig, kappa: float = KAPPA) -> float:
    return kappa * invariants(cfg).V


def commutator_trace_sq(cfg: MembraneConfig) -> float:
    """Tr([X, Y]^2) by explicit 2x2 complex matrix arithmetic."""
    X = compose_matrix(cfg.x).matrix()
    Y = compose_matrix(cfg.y).matrix()
    C = X @ Y - Y @ X
    return float(np.trace(C @ C).real)


def commutator_trace_sq_batch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Tr([X, Y]^2) for stacks of vectors of shape (n, 3), via batched matrices."""
    X = np.einsum("nk,kij->nij", np.asarray(x, float), PAULI)
    Y = np.einsum("nk,kij->nij", np.asarray(y, float), PAULI)
    C = X @ Y - Y @ X
    return np.einsum("nij,nji->n", C, C).real


def membrane_point(cfg: MembraneConfig, theta, phi):
    """Transverse position (X, Y) of the sphere point at polar angles (theta, phi)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    n = np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta) + 0 * phi],
        axis=-1,
    )
    return n @ cfg.x, n @ cfg.y


def rotate_so3(cfg: MembraneConfig, rotation) -> MembraneConfig:
    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3x3")
    if not np.allclose(R @ R.T, np.eye(3), atol=1e-10) or abs(np.linalg.det(R) - 1.0) > 1e-10:
        raise ValueError("rotation must be orthogonal with determinant +1")
    return MembraneConfig(R @ cfg.x, R @ cfg.y)


def rotate_so2(cfg: MembraneConfig, alpha: float) -> MembraneConfig:
    ca, sa = math.cos(alpha), math.sin(alpha)
    return MembraneConfig(ca * cfg.x - sa * cfg.y, sa * cfg.x + ca * cfg.y)


def axis_rotation(axis: int, angle: float) -> np.ndarray:
    """Rotation by ``angle`` about coordinate axis 0, 1 or 2."""
    c, s = math.cos(angle), math.sin(angle)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    R = np.eye(3)
    R[i, i] = R[j, j] = c
    R[i, j], R[j, i] = -s, s
    return R


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed element of SO(3)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def config_from_invariants(U: float, V: float, rng: np.random.Generator | None = None) -> MembraneConfig:
    """A configuration with the requested (U, V).

    With ``rng`` the result is spread uniformly over the SO(3) x SO(2) orbit,
    which is the whole level set for generic (U, V).
    """
    if U < 0 or V < 0 or V > U * U * (1 + 1e-12):
        raise ValueError("need U >= 0 and 0 <= V <= U^2")
    d = math.sqrt(max(U * U - V, 0.0))
    p, q = math.sqrt(U + d), math.sqrt(max(U - d, 0.0))
    cfg = MembraneConfig([p, 0.0, 0.0], [0.0, q, 0.0])
    if rng is None:
        return cfg
    cfg = rotate_so2(cfg, rng.uniform(0.0, 2 * math.pi))
    return rotate_so3(cfg, random_rotation(rng))


def gauge_invariance_residual(
    f: Callable[[MembraneConfig], float], cfg: MembraneConfig, step: float = 1e-4
) -> float:
    """Largest central-difference derivative of ``f`` along the gauge flows.

    The flows rotate x and y together about each coordinate axis; any
    function of (U, V) alone has zero derivative along all three.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    worst = 0.0
    for axis in range(3):
        plus = rotate_so3(cfg, axis_rotation(axis, step))
        minus = rotate_so3(cfg, axis_rotation(axis, -step))
        worst = max(worst, abs(f(plus) - f(minus)) / (2 * step))
    return worst
