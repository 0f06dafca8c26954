"""
Closed-form DeePC for the unconstrained two-norm problem.

The stationarity and consistency conditions are linear in
xi = [u_ini; y_ini; r], so one batch solve of

    [ P     2 lambda_u U_P'  2 lambda_y Y_P' ] [ M_g   ]   [ 2 F'W_u Phi  0  2 F'W_y ]
    [ U_P   -I               0               ] [ M_su  ] = [ I            0  0       ]
    [ Y_P   0                -I              ] [ M_sy  ]   [ 0            I  0       ]

with P = 2 (lambda_g I + F'WF) gives g* = M_g xi, and the applied input is
u_0 = K_C xi with K_C the first m rows of U_F M_g.
"""
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg as sla

from app.deepc.problem import DeePCConfig, Regularizer
from app.errors import DimensionError, RankDeficiencyError
from app.hankel.blocks import HANKEL_RANK_FACTOR, HankelBlocks

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlMatrix:
    K_C: np.ndarray
    M_g: np.ndarray
    m: int
    min_norm: bool = False

    @property
    def xi_size(self) -> int:
        return self.M_g.shape[1]

    def first_input(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).ravel()
        if xi.shape[0] != self.xi_size:
            raise DimensionError(f"xi has length {xi.shape[0]}, expected {self.xi_size}")
        return self.K_C @ xi

    def inputs(self, blocks: HankelBlocks, xi) -> np.ndarray:
        """Full optimal input sequence U_F M_g xi"""
        xi = np.asarray(xi, dtype=float).ravel()
        return blocks.U_F @ (self.M_g @ xi)


def stack_xi(u_ini, y_ini, r) -> np.ndarray:
    return np.concatenate([np.ravel(u_ini), np.ravel(y_ini), np.ravel(r)]).astype(float)


def batch_kkt_system(blocks: HankelBlocks, cfg: DeePCConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Left-hand matrix and right-hand block of the batch KKT equation"""
    if cfg.regularizer is not Regularizer.TWO_NORM_SQ:
        raise ValueError("the closed-form path needs the two_norm_sq regularizer")
    m, p, T_ini, N = blocks.m, blocks.p, blocks.T_ini, blocks.N
    weights = cfg.weights(m, p)
    U_P, Y_P, U_F, Y_F = blocks.U_P, blocks.Y_P, blocks.U_F, blocks.Y_F
    H_c = blocks.H_c
    mT, pT, mN, pN = m * T_ini, p * T_ini, m * N, p * N

    F = np.vstack([U_F, Y_F])
    FtW = F.T @ weights.W
    P = 2.0 * (cfg.lambda_g * np.eye(H_c) + FtW @ F)

    size = H_c + mT + pT
    K = np.zeros((size, size))
    K[:H_c, :H_c] = P
    K[:H_c, H_c:H_c + mT] = 2.0 * cfg.lambda_u * U_P.T
    K[:H_c, H_c + mT:] = 2.0 * cfg.lambda_y * Y_P.T
    K[H_c:H_c + mT, :H_c] = U_P
    K[H_c:H_c + mT, H_c:H_c + mT] = -np.eye(mT)
    K[H_c + mT:, :H_c] = Y_P
    K[H_c + mT:, H_c + mT:] = -np.eye(pT)

    B = np.zeros((size, mT + pT + pN))
    B[:H_c, :mT] = 2.0 * FtW[:, :mN] @ weights.Phi
    B[:H_c, mT + pT:] = 2.0 * FtW[:, mN:]
    B[H_c:H_c + mT, :mT] = np.eye(mT)
    B[H_c + mT:, mT:mT + pT] = np.eye(pT)
    return K, B


def kkt_batch(blocks: HankelBlocks, cfg: DeePCConfig) -> ControlMatrix:
    if cfg.constraints:
        logger.warning("closed-form path ignores %d configured bound(s); use the qp solver to enforce them",
                       len(cfg.constraints))
    K, B = batch_kkt_system(blocks, cfg)
    H_c, m = blocks.H_c, blocks.m
    min_norm = False
    if cfg.lambda_g == 0:
        if not cfg.allow_min_norm:
            raise RankDeficiencyError("lambda_g = 0 requested without the minimum-norm fallback",
                                      block="P")
        Z = np.linalg.pinv(K, rcond=max(K.shape) * HANKEL_RANK_FACTOR) @ B
        min_norm = True
        logger.info("lambda_g = 0: control matrix built from the minimum-norm solution")
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                Z = sla.solve(K, B)
        except (np.linalg.LinAlgError, sla.LinAlgWarning) as e:
            raise RankDeficiencyError("batch KKT matrix is singular", block="P") from e
    M_g = Z[:H_c]
    K_C = blocks.U_F[:m] @ M_g
    logger.debug("control matrix %s from H_c=%d", K_C.shape, H_c)
    return ControlMatrix(K_C=K_C, M_g=M_g, m=m, min_norm=min_norm)


def save_control_matrix(cm: ControlMatrix, directory: Union[str, Path]) -> Tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kc_path = directory / "K_C.csv"
    mg_path = directory / "M_g.csv"
    pd.DataFrame(cm.K_C).to_csv(kc_path, header=False, index=False, float_format="%.17g")
    pd.DataFrame(cm.M_g).to_csv(mg_path, header=False, index=False, float_format="%.17g")
    return kc_path, mg_path


def load_control_matrix(directory: Union[str, Path]) -> ControlMatrix:
    directory = Path(directory)
    K_C = pd.read_csv(directory / "K_C.csv", header=None, float_precision="round_trip").to_numpy()
    M_g = pd.read_csv(directory / "M_g.csv", header=None, float_precision="round_trip").to_numpy()
    if K_C.shape[1] != M_g.shape[1]:
        raise DimensionError(f"K_C has {K_C.shape[1]} columns but M_g has {M_g.shape[1]}")
    return ControlMatrix(K_C=K_C, M_g=M_g, m=K_C.shape[0])
