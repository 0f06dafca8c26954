import logging
import time
from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Deque, Hashable, Optional

import numpy as np

from app.deepc.closed_form import ControlMatrix, kkt_batch, stack_xi
from app.deepc.problem import DeePCConfig, DeePCProblem, SolverPath
from app.errors import DimensionError, NotWarmedUpError
from app.hankel.blocks import HankelBlocks

logger = logging.getLogger(__name__)


class InitBuffer:
    """Last T_ini (u, y) samples, oldest first"""

    def __init__(self, T_ini: int, m: int, p: int):
        self.T_ini, self.m, self.p = T_ini, m, p
        self._u: Deque[np.ndarray] = deque(maxlen=T_ini)
        self._y: Deque[np.ndarray] = deque(maxlen=T_ini)

    def push(self, u, y):
        u = np.asarray(u, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if u.shape[0] != self.m or y.shape[0] != self.p:
            raise DimensionError(f"sample sizes ({u.shape[0]}, {y.shape[0]}) != ({self.m}, {self.p})")
        self._u.append(u)
        self._y.append(y)

    def prime(self, u_hist, y_hist):
        for u, y in zip(np.atleast_2d(u_hist), np.atleast_2d(y_hist)):
            self.push(u, y)

    def clear(self):
        self._u.clear()
        self._y.clear()

    @property
    def warmed(self) -> bool:
        return len(self._u) == self.T_ini

    def __len__(self) -> int:
        return len(self._u)

    def _require_warm(self):
        if not self.warmed:
            raise NotWarmedUpError(f"history holds {len(self._u)} of {self.T_ini} samples")

    @property
    def u_ini(self) -> np.ndarray:
        self._require_warm()
        return np.concatenate(self._u)

    @property
    def y_ini(self) -> np.ndarray:
        self._require_warm()
        return np.concatenate(self._y)

    @property
    def last_u(self) -> np.ndarray:
        if not self._u:
            raise NotWarmedUpError("history is empty")
        return self._u[-1]


def horizon_reference(r, p: int, N: int) -> np.ndarray:
    """Per-sample output reference replicated over N, or a full p*N vector"""
    r = np.asarray(r, dtype=float).ravel()
    if r.shape[0] == p:
        return np.tile(r, N)
    if r.shape[0] == p * N:
        return r
    raise DimensionError(f"reference has length {r.shape[0]}, expected {p} or {p * N}")


@dataclass
class StepInfo:
    solved: bool = False
    iterations: int = 0
    solve_ms: float = 0.0


class DeePCController:
    """
    Receding-horizon DeePC: every k calls the problem is re-solved from the
    latest T_ini measurements and the first k optimal inputs are applied,
    one per call.
    """

    CACHE_SIZE = 8

    def __init__(self, blocks: HankelBlocks, cfg: DeePCConfig):
        self.blocks = blocks
        self.buffer = InitBuffer(cfg.T_ini, blocks.m, blocks.p)
        self._cache: "OrderedDict[Hashable, tuple]" = OrderedDict()
        self.cfg: Optional[DeePCConfig] = None
        self.set_config(cfg)
        self.solve_count = 0
        self.info = StepInfo()

    @property
    def m(self) -> int:
        return self.blocks.m

    @property
    def p(self) -> int:
        return self.blocks.p

    def set_config(self, cfg: DeePCConfig, key: Optional[Hashable] = None):
        """
        Swap weights/regularization. The control matrix or QP structure is
        rebuilt only for a config not seen before under the same key; the
        CACHE_SIZE most recently used artifacts are kept.
        """
        if cfg is self.cfg:
            return
        if cfg.T_ini != self.blocks.T_ini or cfg.N != self.blocks.N:
            raise DimensionError("config horizons do not match the Hankel blocks")
        # entries hold cfg itself, so an id() key cannot be reused while cached
        key = key if key is not None else id(cfg)
        cached = self._cache.get(key)
        if cached is None or cached[0] is not cfg:
            if cfg.solver is SolverPath.CLOSED_FORM:
                artifact = kkt_batch(self.blocks, cfg)
            else:
                artifact = DeePCProblem(self.blocks, cfg)
            self._cache[key] = (cfg, artifact)
            logger.info("built %s artifact for T_ini=%d N=%d k=%d", cfg.solver.value, cfg.T_ini, cfg.N, cfg.k)
        self._cache.move_to_end(key)
        while len(self._cache) > self.CACHE_SIZE:
            self._cache.popitem(last=False)
        self.cfg = cfg
        self._artifact = self._cache[key][1]
        self._plan: Deque[np.ndarray] = deque()

    @property
    def control_matrix(self) -> Optional[ControlMatrix]:
        return self._artifact if isinstance(self._artifact, ControlMatrix) else None

    def plan(self, r) -> np.ndarray:
        """Optimal input sequence (m*N) for the current history"""
        cfg = self.cfg
        r = horizon_reference(r, self.p, cfg.N)
        u_ini, y_ini = self.buffer.u_ini, self.buffer.y_ini
        start = time.perf_counter()
        if isinstance(self._artifact, ControlMatrix):
            xi = stack_xi(u_ini, y_ini, r)
            if cfg.k == 1:
                u_star = np.concatenate([self._artifact.first_input(xi), np.zeros(self.m * (cfg.N - 1))])
            else:
                u_star = self._artifact.inputs(self.blocks, xi)
            iterations = 0
        else:
            sol = self._artifact.solve(u_ini, y_ini, r)
            u_star, iterations = sol.u_star, sol.iterations
        self.solve_count += 1
        self.info = StepInfo(True, iterations, (time.perf_counter() - start) * 1e3)
        return u_star

    def step(self, u_prev, y_t, r) -> np.ndarray:
        """Record (applied input, new measurement), return the next input"""
        self.buffer.push(u_prev, y_t)
        if not self.buffer.warmed:
            raise NotWarmedUpError(f"history holds {len(self.buffer)} of {self.cfg.T_ini} samples")
        if not self._plan:
            u_star = self.plan(r).reshape(self.cfg.N, self.m)
            self._plan.extend(u_star[: self.cfg.k])
        else:
            self.info = StepInfo()
        return self._plan.popleft().copy()

    def reset_plan(self):
        self._plan.clear()


def controller_step(ctrl: DeePCController, measurement, r) -> np.ndarray:
    u_prev, y_t = measurement
    return ctrl.step(u_prev, y_t, r)
