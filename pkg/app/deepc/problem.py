"""
Regularized DeePC problem with the slack variables eliminated.

With sigma_u = U_P g - u_ini and sigma_y = Y_P g - y_ini substituted, the
problem is a QP in g alone:

    min  || F g - rho ||_W^2 + lambda_u ||U_P g - u_ini||^2
         + lambda_y ||Y_P g - y_ini||^2 + lambda_g h(g)
    s.t. lo <= C g <= hi

where F = [U_F; Y_F], rho = [Phi u_ini; r] and W = [[R, S], [S', Q]].
Phi and S are zero unless a behavior design couples inputs and outputs.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Tuple

import numpy as np

from app.errors import DimensionError, RankDeficiencyError, SolverFailure
from app.hankel.blocks import HANKEL_RANK_FACTOR, HankelBlocks
from app.lti.system import numerical_rank
from app.qp.admm import ADMMSettings, ADMMSolver, QPProblem, QPSolution, QPStatus

logger = logging.getLogger(__name__)

SIGNALS = ("u", "y", "du")


class Regularizer(str, Enum):
    TWO_NORM_SQ = "two_norm_sq"
    ONE_NORM = "one_norm"
    PROJECTION = "projection"


class SolverPath(str, Enum):
    QP = "qp"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class BoxBound:
    """Per-sample bound on one channel, replicated over the horizon"""

    signal: str
    channel: int
    lo: float = -np.inf
    hi: float = np.inf

    def __post_init__(self):
        if self.signal not in SIGNALS:
            raise ValueError(f"unknown bound signal {self.signal!r}, expected one of {SIGNALS}")
        if self.channel < 0:
            raise ValueError("channel index must be nonnegative")
        if self.lo > self.hi:
            raise ValueError(f"bound on {self.signal}[{self.channel}] has lo={self.lo} > hi={self.hi}")


@dataclass(frozen=True)
class DeePCConfig:
    T_ini: int
    N: int
    k: int = 1
    R: Any = 1.0
    Q: Any = 1.0
    S: Optional[np.ndarray] = None
    Phi: Optional[np.ndarray] = None
    lambda_u: float = 1e5
    lambda_y: float = 1e5
    lambda_g: float = 10.0
    regularizer: Regularizer = Regularizer.TWO_NORM_SQ
    constraints: Tuple[BoxBound, ...] = ()
    solver: SolverPath = SolverPath.QP
    admm: ADMMSettings = field(default_factory=ADMMSettings)
    allow_min_norm: bool = True
    strict_solver: bool = False

    def __post_init__(self):
        if self.T_ini < 1 or self.N < 1:
            raise ValueError("T_ini and N must be positive")
        if not 1 <= self.k <= self.N:
            raise ValueError(f"control horizon k={self.k} must satisfy 1 <= k <= N={self.N}")
        if min(self.lambda_u, self.lambda_y, self.lambda_g) < 0:
            raise ValueError("regularization weights must be nonnegative")
        object.__setattr__(self, "regularizer", Regularizer(self.regularizer))
        object.__setattr__(self, "solver", SolverPath(self.solver))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def weights(self, m: int, p: int) -> "CostWeights":
        N = self.N
        R = expand_weight(self.R, m, N)
        Q = expand_weight(self.Q, p, N)
        S = np.zeros((m * N, p * N)) if self.S is None else np.asarray(self.S, dtype=float)
        Phi = np.zeros((m * N, m * self.T_ini)) if self.Phi is None else np.asarray(self.Phi, dtype=float)
        return CostWeights(R, Q, S, Phi)


def expand_weight(weight, width: int, N: int) -> np.ndarray:
    """
    Scalar, per-sample diagonal, per-sample matrix, or full (width*N) matrix
    to the full sample-major weight.
    """
    W = np.asarray(weight, dtype=float)
    if W.ndim == 0:
        return float(W) * np.eye(width * N)
    if W.ndim == 1 and W.shape[0] == width:
        return np.kron(np.eye(N), np.diag(W))
    if W.shape == (width, width):
        return np.kron(np.eye(N), W)
    if W.shape == (width * N, width * N):
        return W.copy()
    raise DimensionError(f"weight of shape {W.shape} fits neither {width} nor {width * N} entries")


@dataclass(frozen=True)
class CostWeights:
    R: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    Phi: np.ndarray

    def __post_init__(self):
        if self.S.shape != (self.R.shape[0], self.Q.shape[0]):
            raise DimensionError(f"S must be {self.R.shape[0]}x{self.Q.shape[0]}, got {self.S.shape}")
        if self.Phi.shape[0] != self.R.shape[0]:
            raise DimensionError(f"Phi must have {self.R.shape[0]} rows, got {self.Phi.shape[0]}")
        for name in ("R", "Q"):
            M = getattr(self, name)
            if not np.allclose(M, M.T, atol=1e-10 * max(1.0, np.max(np.abs(M)))):
                raise ValueError(f"{name} must be symmetric")
        scale = max(1.0, float(np.max(np.abs(self.W))))
        if np.min(np.linalg.eigvalsh(self.R)) <= 0:
            raise ValueError("R must be positive definite")
        if np.min(np.linalg.eigvalsh(self.Q)) < -1e-10 * scale:
            raise ValueError("Q must be positive semidefinite")
        if np.min(np.linalg.eigvalsh(self.W)) < -1e-10 * scale:
            raise ValueError("joint weight [[R, S], [S', Q]] must be positive semidefinite")

    @property
    def W(self) -> np.ndarray:
        return np.block([[self.R, self.S], [self.S.T, self.Q]])


@dataclass(frozen=True)
class ConstraintRows:
    """Rows lo <= A_u u + A_y y + A_du du <= hi over the horizon"""

    A_u: np.ndarray
    A_y: np.ndarray
    A_du: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def count(self) -> int:
        return self.lo.shape[0]


def selection_rows(channel: int, width: int, N: int) -> np.ndarray:
    """N x (width*N) selector of one channel in a sample-major horizon vector"""
    if not 0 <= channel < width:
        raise DimensionError(f"channel {channel} out of range for {width} channels")
    S = np.zeros((N, width * N))
    S[np.arange(N), np.arange(N) * width + channel] = 1.0
    return S


def assemble_constraints(cfg: DeePCConfig, m: int, p: int, signals=("u", "y")) -> ConstraintRows:
    N = cfg.N
    blocks = {"u": [], "y": [], "du": []}
    lo, hi = [], []
    for bound in cfg.constraints:
        if bound.lo > bound.hi:
            raise ValueError(f"bound on {bound.signal}[{bound.channel}] has lo > hi")
        if bound.signal not in signals:
            raise ValueError(f"bounds on {bound.signal!r} are not supported here")
        width = p if bound.signal == "y" else m
        sel = selection_rows(bound.channel, width, N)
        for name in blocks:
            w = p if name == "y" else m
            blocks[name].append(sel if name == bound.signal else np.zeros((N, w * N)))
        lo.append(np.full(N, bound.lo))
        hi.append(np.full(N, bound.hi))

    def stack(name, width):
        return np.vstack(blocks[name]) if blocks[name] else np.zeros((0, width * N))

    return ConstraintRows(
        A_u=stack("u", m), A_y=stack("y", p), A_du=stack("du", m),
        lo=np.concatenate(lo) if lo else np.zeros(0),
        hi=np.concatenate(hi) if hi else np.zeros(0),
    )


def row_space_projector(blocks: HankelBlocks) -> np.ndarray:
    """Orthogonal projector onto the row space of [U_P; Y_P; U_F]"""
    Z = blocks.data_matrix()
    return np.linalg.pinv(Z, rcond=max(Z.shape) * HANKEL_RANK_FACTOR) @ Z


def regularizer_value(g, kind: Regularizer, blocks: Optional[HankelBlocks] = None,
                      projector: Optional[np.ndarray] = None) -> float:
    g = np.asarray(g, dtype=float).ravel()
    kind = Regularizer(kind)
    if kind is Regularizer.TWO_NORM_SQ:
        return float(g @ g)
    if kind is Regularizer.ONE_NORM:
        return float(np.sum(np.abs(g)))
    if projector is None:
        if blocks is None:
            raise ValueError("projection regularizer needs the Hankel blocks")
        projector = row_space_projector(blocks)
    residual = g - projector @ g
    return float(residual @ residual)


@dataclass
class DeePCSolution:
    u_star: np.ndarray
    y_star: np.ndarray
    g_star: np.ndarray
    sigma_u: np.ndarray
    sigma_y: np.ndarray
    objective: float
    status: QPStatus = QPStatus.SOLVED
    iterations: int = 0
    min_norm: bool = False
    solve_ms: float = 0.0


def _vec(value, size: int, name: str) -> np.ndarray:
    out = np.asarray(value, dtype=float).ravel()
    if out.shape[0] != size:
        raise DimensionError(f"{name} has length {out.shape[0]}, expected {size}")
    return out


class DeePCProblem:
    """
    The QP in g for fixed data and weights.

    Only the linear term and (for bounds on reconstructed signals) the bounds
    depend on the measured history and reference, so the ADMM factorization
    is built once and reused with warm starts on every receding-horizon solve.
    """

    signals = ("u", "y")

    def __init__(self, blocks: HankelBlocks, cfg: DeePCConfig):
        if blocks.T_ini != cfg.T_ini or blocks.N != cfg.N:
            raise DimensionError(
                f"blocks built for (T_ini={blocks.T_ini}, N={blocks.N}) but config has "
                f"(T_ini={cfg.T_ini}, N={cfg.N})"
            )
        self.blocks = blocks
        self.cfg = cfg
        m, p = blocks.m, blocks.p
        self.weights = cfg.weights(m, p)
        self.rows = assemble_constraints(cfg, m, p, signals=self.signals)

        U_P, Y_P, U_F, Y_F = blocks.U_P, blocks.Y_P, blocks.U_F, blocks.Y_F
        F = np.vstack([U_F, Y_F])
        W = self.weights.W
        FtW = F.T @ W
        mN = m * cfg.N
        H = 2.0 * (FtW @ F + cfg.lambda_u * U_P.T @ U_P + cfg.lambda_y * Y_P.T @ Y_P)
        self.projector = None
        if cfg.regularizer is Regularizer.TWO_NORM_SQ:
            H = H + 2.0 * cfg.lambda_g * np.eye(blocks.H_c)
        elif cfg.regularizer is Regularizer.PROJECTION:
            self.projector = row_space_projector(blocks)
            H = H + 2.0 * cfg.lambda_g * (np.eye(blocks.H_c) - self.projector)
        self.H = 0.5 * (H + H.T)
        # linear term f = G_u u_ini + G_y y_ini + G_r r
        self.G_u = -2.0 * (FtW[:, :mN] @ self.weights.Phi + cfg.lambda_u * U_P.T)
        self.G_y = -2.0 * cfg.lambda_y * Y_P.T
        self.G_r = -2.0 * FtW[:, mN:]
        self.C = self.constraint_matrix()
        self._solver: Optional[ADMMSolver] = None
        self._last: Optional[QPSolution] = None

    def constraint_matrix(self) -> np.ndarray:
        return self.rows.A_u @ self.blocks.U_F + self.rows.A_y @ self.blocks.Y_F

    def linear_term(self, u_ini, y_ini, r) -> np.ndarray:
        return self.G_u @ u_ini + self.G_y @ y_ini + self.G_r @ r

    def objective(self, g, u_ini, y_ini, r) -> float:
        """Objective of the slack formulation at g (slacks at their optimal values)"""
        b, cfg = self.blocks, self.cfg
        rho = np.concatenate([self.weights.Phi @ u_ini, r])
        e = np.concatenate([b.U_F @ g, b.Y_F @ g]) - rho
        s_u = b.U_P @ g - u_ini
        s_y = b.Y_P @ g - y_ini
        h = regularizer_value(g, cfg.regularizer, b, self.projector)
        return float(e @ self.weights.W @ e + cfg.lambda_u * s_u @ s_u
                     + cfg.lambda_y * s_y @ s_y + cfg.lambda_g * h)

    def _qp(self, f: np.ndarray, bounds_shift: Optional[np.ndarray] = None) -> QPProblem:
        lo, hi = self.rows.lo, self.rows.hi
        if bounds_shift is not None:
            lo, hi = lo - bounds_shift, hi - bounds_shift
        if self.cfg.regularizer is Regularizer.ONE_NORM:
            n = self.H.shape[0]
            lam = self.cfg.lambda_g * np.ones(n)
            P = np.block([[self.H, -self.H], [-self.H, self.H]])
            q = np.concatenate([f + lam, -f + lam])
            A = np.vstack([np.hstack([self.C, -self.C]), np.eye(2 * n)])
            return QPProblem(P, q, A, np.concatenate([lo, np.zeros(2 * n)]),
                             np.concatenate([hi, np.full(2 * n, np.inf)]))
        return QPProblem(self.H, f, self.C, lo, hi)

    def solve_for_g(self, f: np.ndarray, bounds_shift: Optional[np.ndarray] = None,
                    warm: bool = True) -> Tuple[np.ndarray, QPSolution, bool]:
        """Solve the QP for a given linear term; returns (g, raw solution, min_norm)"""
        cfg = self.cfg
        if (cfg.regularizer is Regularizer.TWO_NORM_SQ and cfg.lambda_g == 0
                and self.C.shape[0] == 0):
            return self._min_norm(f)
        prob = self._qp(f, bounds_shift)
        if self._solver is None:
            self._solver = ADMMSolver(prob, cfg.admm)
        else:
            self._solver.update(q=prob.q, lo=prob.lo, hi=prob.hi)
            if not warm:
                self._solver.cold_start()
        sol = self._solver.solve()
        self._last = sol
        if sol.status is QPStatus.INFEASIBLE:
            raise SolverFailure("DeePC QP reported primal infeasibility", status=sol.status.value)
        if sol.status is not QPStatus.SOLVED:
            if cfg.strict_solver:
                raise SolverFailure(f"DeePC QP stopped with status {sol.status.value}",
                                    status=sol.status.value)
            logger.warning("using best iterate after %d iterations (%s)", sol.iterations, sol.status.value)
        n = self.H.shape[0]
        g = sol.x[:n] - sol.x[n:] if cfg.regularizer is Regularizer.ONE_NORM else sol.x
        return g, sol, False

    def _min_norm(self, f: np.ndarray) -> Tuple[np.ndarray, QPSolution, bool]:
        singular = numerical_rank(self.H, HANKEL_RANK_FACTOR) < self.H.shape[0]
        if singular and not self.cfg.allow_min_norm:
            raise RankDeficiencyError("lambda_g = 0 leaves the DeePC cost singular in g", block="P")
        g = -np.linalg.pinv(self.H, rcond=max(self.H.shape) * HANKEL_RANK_FACTOR) @ f
        if singular:
            logger.info("lambda_g = 0: returning the minimum-norm optimizer")
        sol = QPSolution(x=g, y=np.zeros(0), status=QPStatus.SOLVED, primal_res=0.0,
                         dual_res=float(np.max(np.abs(self.H @ g + f))), iterations=0)
        return g, sol, singular

    def solve(self, u_ini, y_ini, r, warm: bool = True) -> DeePCSolution:
        b = self.blocks
        u_ini = _vec(u_ini, b.U_P.shape[0], "u_ini")
        y_ini = _vec(y_ini, b.Y_P.shape[0], "y_ini")
        r = _vec(r, b.Y_F.shape[0], "r")
        start = time.perf_counter()
        g, sol, min_norm = self.solve_for_g(self.linear_term(u_ini, y_ini, r), warm=warm)
        elapsed = (time.perf_counter() - start) * 1e3
        return DeePCSolution(
            u_star=b.U_F @ g, y_star=b.Y_F @ g, g_star=g,
            sigma_u=b.U_P @ g - u_ini, sigma_y=b.Y_P @ g - y_ini,
            objective=self.objective(g, u_ini, y_ini, r),
            status=sol.status, iterations=sol.iterations, min_norm=min_norm, solve_ms=elapsed,
        )


def solve_deepc(blocks: HankelBlocks, u_ini, y_ini, r, cfg: DeePCConfig) -> DeePCSolution:
    return DeePCProblem(blocks, cfg).solve(u_ini, y_ini, r)


def predict_outputs(blocks: HankelBlocks, u_ini, y_ini, u, lambda_g: float = 1e-8,
                    lambda_u: float = 1e8, lambda_y: float = 1e8) -> np.ndarray:
    """
    Data-driven output prediction for a fixed future input: the DeePC
    problem with u pinned (weighted like the initial input) and no cost on y.
    """
    u_ini = _vec(u_ini, blocks.U_P.shape[0], "u_ini")
    y_ini = _vec(y_ini, blocks.Y_P.shape[0], "y_ini")
    u = _vec(u, blocks.U_F.shape[0], "u")
    wu, wy, wg = np.sqrt(lambda_u), np.sqrt(lambda_y), np.sqrt(lambda_g)
    lhs = np.vstack([wu * blocks.U_P, wy * blocks.Y_P, wu * blocks.U_F, wg * np.eye(blocks.H_c)])
    rhs = np.concatenate([wu * u_ini, wy * y_ini, wu * u, np.zeros(blocks.H_c)])
    g = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    return blocks.Y_F @ g
