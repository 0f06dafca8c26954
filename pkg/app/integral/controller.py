import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Deque, Optional, Tuple

import numpy as np

from app.deepc.closed_form import ControlMatrix, kkt_batch, stack_xi
from app.deepc.controller import InitBuffer, StepInfo, horizon_reference
from app.deepc.problem import DeePCConfig, SolverPath
from app.errors import NotWarmedUpError
from app.integral.delta import (
    DeltaBlocks,
    IntegralChannelMask,
    IntegralDeePCProblem,
    accumulation_matrices,
    decision_record,
)

logger = logging.getLogger(__name__)

INTEGRAL_PRESETS = ("full", "power_voltage")


@dataclass(frozen=True)
class IntegralConverterWiring:
    """Which plant signals the integral controller drives"""

    preset: str
    mask: IntegralChannelMask
    input_channels: Tuple[str, ...]
    keeps_inner_loops: bool


def configure_integral_converter(preset: str) -> IntegralConverterWiring:
    if preset == "full":
        # frequency passes straight through, both voltage commands integrated
        return IntegralConverterWiring(
            preset, IntegralChannelMask((False, True, True)), ("dw", "ud_star", "uq_star"), False
        )
    if preset == "power_voltage":
        return IntegralConverterWiring(
            preset, IntegralChannelMask((True, True)), ("id_ref", "iq_ref"), True
        )
    raise ValueError(f"unknown integral preset {preset!r}, expected one of {INTEGRAL_PRESETS}")


class IntegralDeePCController:
    """
    Receding-horizon integral DeePC. The history holds the decision record
    (du on integrated channels, u on direct ones) and the last applied input;
    applied inputs are rebuilt as u_{t+i} = u_{t-1} + sum of du up to i.
    """

    def __init__(self, dblocks: DeltaBlocks, cfg: DeePCConfig):
        self.dblocks = dblocks
        self.mask = dblocks.mask
        self.cfg = cfg
        self.buffer = InitBuffer(cfg.T_ini, dblocks.m, dblocks.p)
        self.acc, self.offset = accumulation_matrices(self.mask, cfg.N)
        self._u_last: Optional[np.ndarray] = None
        self._plan: Deque[np.ndarray] = deque()
        self.solve_count = 0
        self.info = StepInfo()
        self._build()

    def _build(self):
        if self.cfg.solver is SolverPath.CLOSED_FORM:
            self._artifact = kkt_batch(self.dblocks.as_hankel_blocks(), self.cfg)
        else:
            self._artifact = IntegralDeePCProblem(self.dblocks, self.cfg)

    def set_config(self, cfg: DeePCConfig):
        if cfg is self.cfg:
            return
        self.cfg = cfg
        self.acc, self.offset = accumulation_matrices(self.mask, cfg.N)
        self._build()
        self._plan.clear()

    @property
    def control_matrix(self) -> Optional[ControlMatrix]:
        return self._artifact if isinstance(self._artifact, ControlMatrix) else None

    @property
    def m(self) -> int:
        return self.mask.m

    def prime(self, u_hist, y_hist, u_before=None):
        """Fill the history from applied inputs (u_before precedes u_hist, default 0)"""
        u_hist = np.atleast_2d(np.asarray(u_hist, dtype=float))
        self.buffer.prime(decision_record(u_hist, self.mask, u_before), y_hist)
        self._u_last = u_hist[-1].copy()

    def _record(self, u_applied, y_t):
        u_applied = np.asarray(u_applied, dtype=float).ravel()
        before = np.zeros(self.m) if self._u_last is None else self._u_last
        v = decision_record(u_applied[None, :], self.mask, before)[0]
        self.buffer.push(v, y_t)
        self._u_last = u_applied.copy()

    def plan(self, r) -> np.ndarray:
        cfg = self.cfg
        r = horizon_reference(r, self.dblocks.p, cfg.N)
        v_ini, y_ini, u_prev = self.buffer.u_ini, self.buffer.y_ini, self._u_last
        start = time.perf_counter()
        if isinstance(self._artifact, ControlMatrix):
            xi = stack_xi(v_ini, y_ini, r)
            if cfg.k == 1:
                u0 = self._artifact.first_input(xi) + self.mask.vector * u_prev
                u_star = np.concatenate([u0, np.zeros(self.m * (cfg.N - 1))])
            else:
                v_star = self._artifact.inputs(self.dblocks.as_hankel_blocks(), xi)
                u_star = self.acc @ v_star + self.offset @ u_prev
            iterations = 0
        else:
            sol, u_star = self._artifact.solve_integral(v_ini, y_ini, u_prev, r)
            iterations = sol.iterations
        self.solve_count += 1
        self.info = StepInfo(True, iterations, (time.perf_counter() - start) * 1e3)
        return u_star

    def step(self, u_prev, y_t, r) -> np.ndarray:
        self._record(u_prev, y_t)
        if not self.buffer.warmed:
            raise NotWarmedUpError(f"history holds {len(self.buffer)} of {self.cfg.T_ini} samples")
        if not self._plan:
            u_star = self.plan(r).reshape(self.cfg.N, self.m)
            self._plan.extend(u_star[: self.cfg.k])
        else:
            self.info = StepInfo()
        return self._plan.popleft().copy()


def integral_controller_step(ctrl: IntegralDeePCController, measurement, r) -> np.ndarray:
    u_prev, y_t = measurement
    return ctrl.step(u_prev, y_t, r)
