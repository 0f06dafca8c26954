"""
Integral DeePC: the optimization runs over input differences so that the
applied input carries a discrete integrator on the selected channels.

Channels may be mixed. For each input channel the decision record v holds
either the raw input (direct) or its first difference (integrated); the
applied sequence is recovered as u = Acc v + Offset u_prev.
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.deepc.problem import DeePCConfig, DeePCProblem, DeePCSolution
from app.errors import DimensionError
from app.hankel.blocks import HankelBlocks, partition
from app.hankel.trajectory import Trajectory, as_record

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegralChannelMask:
    integrated: Tuple[bool, ...]

    def __post_init__(self):
        flags = tuple(bool(v) for v in self.integrated)
        if not flags:
            raise ValueError("mask must cover at least one input channel")
        if not any(flags):
            raise ValueError("at least one channel must be integrated")
        object.__setattr__(self, "integrated", flags)

    @property
    def m(self) -> int:
        return len(self.integrated)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.integrated, dtype=float)

    @classmethod
    def all_integrated(cls, m: int) -> "IntegralChannelMask":
        return cls(tuple([True] * m))


def difference(record, u_prev: Optional[Sequence[float]] = None) -> np.ndarray:
    """Row-wise first difference; the sample before the record is u_prev (default 0)"""
    u = as_record(record)
    before = np.zeros(u.shape[1]) if u_prev is None else np.asarray(u_prev, dtype=float).ravel()
    return np.diff(u, axis=0, prepend=before[None, :])


def decision_record(record, mask: IntegralChannelMask, u_prev=None) -> np.ndarray:
    """Raw input on direct channels, first difference on integrated ones"""
    u = as_record(record)
    if u.shape[1] != mask.m:
        raise DimensionError(f"record has {u.shape[1]} channels, mask has {mask.m}")
    return np.where(mask.vector[None, :] > 0, difference(u, u_prev), u)


def accumulation_matrices(mask: IntegralChannelMask, N: int) -> Tuple[np.ndarray, np.ndarray]:
    """(Acc, Offset) with u = Acc v + Offset u_prev over a length-N horizon"""
    if N < 1:
        raise ValueError("N must be positive")
    d = np.diag(mask.vector)
    lower = np.tril(np.ones((N, N)))
    acc = np.kron(lower, d) + np.kron(np.eye(N), np.eye(mask.m) - d)
    offset = np.kron(np.ones((N, 1)), d)
    return acc, offset


@dataclass(frozen=True)
class DeltaBlocks:
    dU_P: np.ndarray
    dU_F: np.ndarray
    Y_P: np.ndarray
    Y_F: np.ndarray
    mask: IntegralChannelMask
    T_ini: int
    N: int

    @property
    def m(self) -> int:
        return self.mask.m

    @property
    def p(self) -> int:
        return self.Y_P.shape[0] // self.T_ini

    def as_hankel_blocks(self) -> HankelBlocks:
        return HankelBlocks(
            U_P=self.dU_P, Y_P=self.Y_P, U_F=self.dU_F, Y_F=self.Y_F,
            T_ini=self.T_ini, N=self.N, m=self.m, p=self.p,
        )


def delta_partition(traj: Trajectory, T_ini: int, N: int, mask: IntegralChannelMask,
                    u_prev=None) -> DeltaBlocks:
    """Hankel blocks of the decision record (u_{-1} = 0 unless given)"""
    v = decision_record(traj.u, mask, u_prev)
    blocks = partition(Trajectory(v, traj.y), T_ini, N)
    return DeltaBlocks(blocks.U_P, blocks.U_F, blocks.Y_P, blocks.Y_F, mask, T_ini, N)


class IntegralDeePCProblem(DeePCProblem):
    """DeePC over v with bounds on du, on the reconstructed u, and on y"""

    signals = ("u", "y", "du")

    def __init__(self, dblocks: DeltaBlocks, cfg: DeePCConfig):
        self.dblocks = dblocks
        self.acc, self.offset = accumulation_matrices(dblocks.mask, cfg.N)
        super().__init__(dblocks.as_hankel_blocks(), cfg)

    def constraint_matrix(self) -> np.ndarray:
        b = self.blocks
        return (self.rows.A_du @ b.U_F + self.rows.A_u @ self.acc @ b.U_F
                + self.rows.A_y @ b.Y_F)

    def bounds_shift(self, u_prev: np.ndarray) -> np.ndarray:
        return self.rows.A_u @ (self.offset @ u_prev)

    def reconstruct(self, v: np.ndarray, u_prev: np.ndarray) -> np.ndarray:
        return self.acc @ v + self.offset @ u_prev

    def solve_integral(self, du_ini, y_ini, u_prev, r, warm: bool = True) -> Tuple[DeePCSolution, np.ndarray]:
        b = self.blocks
        du_ini = np.asarray(du_ini, dtype=float).ravel()
        y_ini = np.asarray(y_ini, dtype=float).ravel()
        r = np.asarray(r, dtype=float).ravel()
        u_prev = np.asarray(u_prev, dtype=float).ravel()
        if (du_ini.shape[0], y_ini.shape[0], r.shape[0], u_prev.shape[0]) != (
                b.U_P.shape[0], b.Y_P.shape[0], b.Y_F.shape[0], b.m):
            raise DimensionError("integral DeePC inputs do not match the blocks")
        start = time.perf_counter()
        g, sol, min_norm = self.solve_for_g(self.linear_term(du_ini, y_ini, r),
                                            bounds_shift=self.bounds_shift(u_prev), warm=warm)
        elapsed = (time.perf_counter() - start) * 1e3
        v = b.U_F @ g
        solution = DeePCSolution(
            u_star=v, y_star=b.Y_F @ g, g_star=g,
            sigma_u=b.U_P @ g - du_ini, sigma_y=b.Y_P @ g - y_ini,
            objective=self.objective(g, du_ini, y_ini, r),
            status=sol.status, iterations=sol.iterations, min_norm=min_norm, solve_ms=elapsed,
        )
        return solution, self.reconstruct(v, u_prev)


def solve_integral_deepc(dblocks: DeltaBlocks, du_ini, y_ini, u_prev, r,
                         cfg: DeePCConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (du_star, y_star, u_star); du_star holds raw u on direct channels"""
    sol, u_star = IntegralDeePCProblem(dblocks, cfg).solve_integral(du_ini, y_ini, u_prev, r)
    return sol.u_star, sol.y_star, u_star
