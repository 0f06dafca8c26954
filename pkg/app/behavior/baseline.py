"""
Classical converter control laws: the discrete PLL and virtual synchronous
machine recursions, their embedding as rows of the DeePC control matrix,
and cascaded GFL/GFM baseline controllers.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.behavior.design import BehaviorRefs
from app.behavior.params import GFMParams, PLLParams
from app.errors import NotWarmedUpError
from app.plant.converter import ConverterParams, PlantInputs, PlantOutputs

logger = logging.getLogger(__name__)


def pll_step(dw_prev: float, Vq_prev: float, Vq_prev2: float, pll: PLLParams) -> float:
    """dw(t) = dw(t-1) + (Kp + Ki Ts) Vq(t-1) - Kp Vq(t-2)"""
    return dw_prev + (pll.Kp_pll + pll.Ki_pll * pll.Ts) * Vq_prev - pll.Kp_pll * Vq_prev2


def vsm_step(dw_prev: float, PE_prev: float, P_ref: float, gfm: GFMParams) -> float:
    """dw(t) = P_ref Ts/J + (1 - D Ts/J) dw(t-1) - (Ts/J) P_E(t-1)"""
    ratio = gfm.Ts / gfm.J
    return P_ref * ratio + (1.0 - gfm.D * ratio) * dw_prev - ratio * PE_prev


@dataclass(frozen=True)
class KcLayout:
    """Positions inside xi = [u_ini; y_ini; r] (all sample-major)"""

    T_ini: int
    N: int
    m: int
    p: int
    dw_input: int = 0
    vq_output: int = 1
    pe_output: int = 4

    @property
    def size(self) -> int:
        return (self.m + self.p) * self.T_ini + self.p * self.N

    def u_ini_index(self, lag: int, channel: int) -> int:
        """lag=1 is the newest sample"""
        return (self.T_ini - lag) * self.m + channel

    def y_ini_index(self, lag: int, channel: int) -> int:
        return self.m * self.T_ini + (self.T_ini - lag) * self.p + channel

    def r_index(self, step: int, channel: int) -> int:
        return (self.m + self.p) * self.T_ini + step * self.p + channel


def pll_row_of_Kc(pll: PLLParams, layout: KcLayout) -> np.ndarray:
    if layout.T_ini < 2:
        raise ValueError("the PLL row needs T_ini >= 2")
    row = np.zeros(layout.size)
    row[layout.u_ini_index(1, layout.dw_input)] = 1.0
    row[layout.y_ini_index(1, layout.vq_output)] = pll.Kp_pll + pll.Ki_pll * pll.Ts
    row[layout.y_ini_index(2, layout.vq_output)] = -pll.Kp_pll
    return row


def vsm_row_of_Kc(gfm: GFMParams, layout: KcLayout) -> np.ndarray:
    if layout.T_ini < 1:
        raise ValueError("the VSM row needs T_ini >= 1")
    ratio = gfm.Ts / gfm.J
    row = np.zeros(layout.size)
    row[layout.u_ini_index(1, layout.dw_input)] = 1.0 - gfm.D * ratio
    row[layout.y_ini_index(1, layout.pe_output)] = -ratio
    row[layout.r_index(0, layout.pe_output)] = ratio
    return row


class PIController:
    """Discrete PI, integrator updated before the output is formed"""

    def __init__(self, kp: float, ki: float, Ts: float, limit: Optional[float] = None):
        self.kp, self.ki, self.Ts = kp, ki, Ts
        self.limit = limit
        self.integral = 0.0

    def update(self, error: float) -> float:
        self.integral += self.ki * self.Ts * error
        if self.limit is not None:
            self.integral = float(np.clip(self.integral, -self.limit, self.limit))
        return self.kp * error + self.integral

    def hold(self, output: float, error: float = 0.0):
        """Set the integrator so that update(error) returns output"""
        self.integral = output - self.kp * error - self.ki * self.Ts * error


@dataclass(frozen=True)
class BaselineGains:
    kp_power: float = 0.2
    ki_power: float = 20.0
    kp_current: float = 0.1
    ki_current: float = 20.0
    kp_voltage: float = 0.5
    ki_voltage: float = 100.0


class CurrentLoop:
    """dq current PI with cross-coupling decoupling and voltage feedforward"""

    def __init__(self, gains: BaselineGains, cp: ConverterParams, Ts: float):
        self.cp = cp
        self.pi_d = PIController(gains.kp_current, gains.ki_current, Ts)
        self.pi_q = PIController(gains.kp_current, gains.ki_current, Ts)

    def step(self, id_ref: float, iq_ref: float, y: PlantOutputs, dw: float) -> tuple:
        wl = (self.cp.omega0 + dw) * self.cp.L1
        ud = y.vd + self.pi_d.update(id_ref - y.id) - wl * y.iq
        uq = y.vq + self.pi_q.update(iq_ref - y.iq) + wl * y.id
        return ud, uq

    def hold(self, u: PlantInputs, id_ref: float, iq_ref: float, y: PlantOutputs):
        wl = (self.cp.omega0 + u.dw) * self.cp.L1
        self.pi_d.hold(u.ud_star - y.vd + wl * y.iq, id_ref - y.id)
        self.pi_q.hold(u.uq_star - y.vq - wl * y.id, iq_ref - y.iq)


class GFLBaseline:
    """PLL + PQ outer PI + dq current PI"""

    kind = "gfl"

    def __init__(self, pll: Optional[PLLParams] = None, gains: Optional[BaselineGains] = None,
                 cp: Optional[ConverterParams] = None):
        self.pll = pll or PLLParams()
        self.gains = gains or BaselineGains()
        Ts = self.pll.Ts
        self.pi_p = PIController(self.gains.kp_power, self.gains.ki_power, Ts)
        self.pi_q = PIController(self.gains.kp_power, self.gains.ki_power, Ts)
        self.current = CurrentLoop(self.gains, cp or ConverterParams(), Ts)
        self.dw = 0.0
        self._vq = None

    @property
    def warmed(self) -> bool:
        return self._vq is not None

    def initialize(self, y: PlantOutputs, u: PlantInputs, refs: BehaviorRefs):
        """Bumpless start: hold the current commands at the present measurement"""
        self.dw = u.dw
        self._vq = [y.vq, y.vq]
        self.pi_p.hold(y.id, refs.P_ref - y.pe)
        self.pi_q.hold(-y.iq, refs.Q_ref - y.qe)
        self.current.hold(u, y.id, y.iq, y)

    def synchronize(self, y: PlantOutputs) -> float:
        if not self.warmed:
            raise NotWarmedUpError("GFL baseline used before initialize()")
        self._vq = [y.vq, self._vq[0]]
        self.dw = pll_step(self.dw, self._vq[0], self._vq[1], self.pll)
        return self.dw

    def outer(self, y: PlantOutputs, refs: BehaviorRefs) -> tuple:
        id_ref = self.pi_p.update(refs.P_ref - y.pe)
        iq_ref = -self.pi_q.update(refs.Q_ref - y.qe)
        return id_ref, iq_ref

    def inner(self, id_ref: float, iq_ref: float, y: PlantOutputs) -> PlantInputs:
        ud, uq = self.current.step(id_ref, iq_ref, y, self.dw)
        return PlantInputs(self.dw, ud, uq)

    def step(self, y: PlantOutputs, refs: BehaviorRefs) -> PlantInputs:
        self.synchronize(y)
        id_ref, iq_ref = self.outer(y, refs)
        return self.inner(id_ref, iq_ref, y)


class GFMBaseline:
    """VSM swing law + voltage PI + dq current PI"""

    kind = "gfm"

    def __init__(self, gfm: Optional[GFMParams] = None, gains: Optional[BaselineGains] = None,
                 cp: Optional[ConverterParams] = None):
        self.gfm = gfm or GFMParams()
        self.gains = gains or BaselineGains()
        Ts = self.gfm.Ts
        self.pi_vd = PIController(self.gains.kp_voltage, self.gains.ki_voltage, Ts)
        self.pi_vq = PIController(self.gains.kp_voltage, self.gains.ki_voltage, Ts)
        self.current = CurrentLoop(self.gains, cp or ConverterParams(), Ts)
        self.dw = 0.0
        self._warm = False

    @property
    def warmed(self) -> bool:
        return self._warm

    def initialize(self, y: PlantOutputs, u: PlantInputs, refs: BehaviorRefs):
        self.dw = u.dw
        self.pi_vq.hold(y.id, refs.Vq_ref - y.vq)
        self.pi_vd.hold(-y.iq, refs.Vd_ref - y.vd)
        self.current.hold(u, y.id, y.iq, y)
        self._warm = True

    def step(self, y: PlantOutputs, refs: BehaviorRefs) -> PlantInputs:
        if not self._warm:
            raise NotWarmedUpError("GFM baseline used before initialize()")
        self.dw = vsm_step(self.dw, y.pe, refs.P_ref, self.gfm)
        id_ref = self.pi_vq.update(refs.Vq_ref - y.vq)
        iq_ref = -self.pi_vd.update(refs.Vd_ref - y.vd)
        ud, uq = self.current.step(id_ref, iq_ref, y, self.dw)
        return PlantInputs(self.dw, ud, uq)


def make_baseline(kind: str, cp: Optional[ConverterParams] = None, **params):
    if kind == "gfl":
        return GFLBaseline(cp=cp, **params)
    if kind == "gfm":
        return GFMBaseline(cp=cp, **params)
    raise ValueError(f"unknown baseline kind {kind!r}")


def baseline_controller_step(kind: str, state, outputs: PlantOutputs, refs: BehaviorRefs) -> PlantInputs:
    """Advance a baseline controller of the given kind by one period"""
    if state.kind != kind:
        raise ValueError(f"controller state is {state.kind!r}, requested {kind!r}")
    if not state.warmed:
        raise NotWarmedUpError(f"{kind} baseline used before initialize()")
    return state.step(outputs, refs)
