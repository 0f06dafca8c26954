"""
Hankel-matrix predictors: construction, past/future partitioning and the
excitation/rank conditions under which the data span every trajectory.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.errors import DimensionError
from app.hankel.trajectory import Trajectory, as_record
from app.lti.system import numerical_rank

# Singular values below sigma_max * max_dim * factor count as zero
HANKEL_RANK_FACTOR = 1e-10


def hankel(seq, L: int) -> np.ndarray:
    """
    Depth-L Hankel matrix of a T x q record, shape (q*L, T-L+1).

    Column j is the window seq[j:j+L] flattened sample by sample, so the
    channels of one sample sit together inside each block row.
    """
    record = as_record(seq)
    T, q = record.shape
    if not 1 <= L <= T:
        raise DimensionError(f"depth L={L} must satisfy 1 <= L <= T={T}")
    windows = sliding_window_view(record, L, axis=0)  # (T-L+1, q, L)
    return np.ascontiguousarray(windows.transpose(0, 2, 1).reshape(T - L + 1, L * q).T)


@dataclass(frozen=True)
class HankelBlocks:
    U_P: np.ndarray
    Y_P: np.ndarray
    U_F: np.ndarray
    Y_F: np.ndarray
    T_ini: int
    N: int
    m: int
    p: int

    @property
    def H_c(self) -> int:
        return self.U_P.shape[1]

    def stacked(self) -> np.ndarray:
        """[U_P; Y_P; U_F; Y_F] in the row order of the behavioural equality"""
        return np.vstack([self.U_P, self.Y_P, self.U_F, self.Y_F])

    def data_matrix(self) -> np.ndarray:
        """[U_P; Y_P; U_F], whose row space the projection regularizer uses"""
        return np.vstack([self.U_P, self.Y_P, self.U_F])


def partition(traj: Trajectory, T_ini: int, N: int) -> HankelBlocks:
    if T_ini < 1 or N < 1:
        raise DimensionError("T_ini and N must be positive")
    depth = T_ini + N
    if traj.T < depth:
        raise DimensionError(f"need T >= T_ini + N = {depth}, got T = {traj.T}")
    H_u = hankel(traj.u, depth)
    H_y = hankel(traj.y, depth)
    cut_u = traj.m * T_ini
    cut_y = traj.p * T_ini
    return HankelBlocks(
        U_P=H_u[:cut_u], Y_P=H_y[:cut_y], U_F=H_u[cut_u:], Y_F=H_y[cut_y:],
        T_ini=T_ini, N=N, m=traj.m, p=traj.p,
    )


def is_persistently_exciting(u, order: int) -> bool:
    record = as_record(u)
    H = hankel(record, order)
    return numerical_rank(H, HANKEL_RANK_FACTOR) == record.shape[1] * order


def rank_condition(traj: Trajectory, T_ini: int, N: int, n: int) -> bool:
    """rank(H_{T_ini+N}(u, y)) == m (T_ini + N) + n"""
    depth = T_ini + N
    if traj.T < depth:
        raise DimensionError(f"need T >= T_ini + N = {depth}, got T = {traj.T}")
    H = np.vstack([hankel(traj.u, depth), hankel(traj.y, depth)])
    return numerical_rank(H, HANKEL_RANK_FACTOR) == traj.m * depth + n


def _flat(vec, size: int, name: str) -> np.ndarray:
    out = np.asarray(vec, dtype=float).ravel()
    if out.shape[0] != size:
        raise DimensionError(f"{name} has length {out.shape[0]}, expected {size}")
    return out


def trajectory_residual(blocks: HankelBlocks, u_ini, y_ini, u, y) -> float:
    """Distance of [u_ini; y_ini; u; y] from the column space of the data"""
    b = np.concatenate([
        _flat(u_ini, blocks.U_P.shape[0], "u_ini"),
        _flat(y_ini, blocks.Y_P.shape[0], "y_ini"),
        _flat(u, blocks.U_F.shape[0], "u"),
        _flat(y, blocks.Y_F.shape[0], "y"),
    ])
    M = blocks.stacked()
    g = np.linalg.pinv(M, rcond=max(M.shape) * HANKEL_RANK_FACTOR) @ b
    return float(np.linalg.norm(M @ g - b))
