"""
Discrete-time LTI state-space systems used as exactly-known oracle plants.

    x_{t+1} = A x_t + B u_t
    y_t     = C x_t + D u_t
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.errors import DimensionError, UnobservableSystemError

# Rank tolerance factor for oracle fixtures (times sigma_max * max_dim)
LTI_RANK_FACTOR = 64 * np.finfo(float).eps

# Spectral radius cap for random fixtures
STABILITY_CAP = 0.95


def numerical_rank(matrix: np.ndarray, tol_factor: float = LTI_RANK_FACTOR) -> int:
    """Count singular values above sigma_max * max_dim * tol_factor"""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.size == 0:
        return 0
    sv = np.linalg.svd(matrix, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    threshold = sv[0] * max(matrix.shape) * tol_factor
    return int(np.sum(sv > threshold))


@dataclass(frozen=True)
class LTISystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise DimensionError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DimensionError(
                f"D must be {self.C.shape[0]}x{self.B.shape[1]}, got {self.D.shape}"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def controllability_matrix(self) -> np.ndarray:
        blocks = [self.B]
        for _ in range(self.n - 1):
            blocks.append(self.A @ blocks[-1])
        return np.hstack(blocks)

    def observability_matrix(self, depth: Optional[int] = None) -> np.ndarray:
        depth = self.n if depth is None else depth
        blocks = [self.C]
        for _ in range(depth - 1):
            blocks.append(blocks[-1] @ self.A)
        return np.vstack(blocks)


def _vector(value, size: int, name: str) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if vec.shape[0] != size:
        raise DimensionError(f"{name} has length {vec.shape[0]}, expected {size}")
    return vec


def lti_step(sys: LTISystem, x, u) -> Tuple[np.ndarray, np.ndarray]:
    """Return (next state, output) for one sample"""
    x = _vector(x, sys.n, "x")
    u = _vector(u, sys.m, "u")
    return sys.A @ x + sys.B @ u, sys.C @ x + sys.D @ u


def simulate(sys: LTISystem, x0, u_seq) -> np.ndarray:
    """Iterate lti_step from x0; returns the T x p output record"""
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim == 1:
        u_seq = u_seq.reshape(-1, 1) if sys.m == 1 else u_seq.reshape(1, -1)
    if u_seq.shape[0] < 1:
        raise DimensionError("input sequence must have at least one sample")
    if u_seq.shape[1] != sys.m:
        raise DimensionError(f"input sequence has {u_seq.shape[1]} channels, expected {sys.m}")
    x = _vector(x0, sys.n, "x0")
    y_seq = np.empty((u_seq.shape[0], sys.p))
    for t, u in enumerate(u_seq):
        x, y_seq[t] = lti_step(sys, x, u)
    return y_seq


def lag(sys: LTISystem) -> int:
    """Smallest l such that [C; CA; ...; CA^(l-1)] has rank n"""
    for ell in range(1, sys.n + 1):
        if numerical_rank(sys.observability_matrix(ell)) == sys.n:
            return ell
    raise UnobservableSystemError(f"system of order {sys.n} is not observable")


def random_minimal_system(n: int, m: int, p: int, seed: int) -> LTISystem:
    """Seeded Schur-stable, controllable and observable system"""
    if min(n, m, p) < 1:
        raise DimensionError("n, m and p must all be positive")
    rng = np.random.default_rng(seed)
    while True:
        A = rng.standard_normal((n, n))
        radius = np.max(np.abs(np.linalg.eigvals(A)))
        if radius < 1e-8:
            continue
        A *= rng.uniform(0.3, 0.9) / radius
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        D = rng.standard_normal((p, m))
        sys = LTISystem(A, B, C, D)
        if np.max(np.abs(np.linalg.eigvals(sys.A))) >= STABILITY_CAP:
            continue
        if numerical_rank(sys.controllability_matrix()) < n:
            continue
        if numerical_rank(sys.observability_matrix()) < n:
            continue
        return sys
