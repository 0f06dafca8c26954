"""
Grid-connected voltage-source converter with LCL filter and Thevenin grid,
simulated natively in the controller dq frame (rotating at omega0 + dw).

All electrical quantities are per-unit. Inductances and the capacitance are
stored as X / omega0 and B / omega0 so that omega * L is a per-unit reactance.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from app.config.settings import settings
from app.errors import IntegrationDivergedError

logger = logging.getLogger(__name__)

OMEGA0 = 2 * math.pi * 50.0

# Default per-unit reactances / susceptance of the filter
X1_PU = 0.10
R1_PU = 0.05
BC_PU = 0.05
X2_PU = 0.05
R2_PU = 0.01

OUTPUT_CHANNELS = ("vd", "vq", "id", "iq", "pe", "qe")
INPUT_CHANNELS = ("dw", "ud_star", "uq_star")


@dataclass(frozen=True)
class ConverterParams:
    L1: float = X1_PU / OMEGA0
    R1: float = R1_PU
    Cf: float = BC_PU / OMEGA0
    L2: float = X2_PU / OMEGA0
    R2: float = R2_PU
    omega0: float = OMEGA0
    s_base: float = 1.0e6
    v_base: float = 690.0

    def __post_init__(self):
        if min(self.L1, self.Cf, self.L2) <= 0:
            raise ValueError("filter inductances and capacitance must be positive")
        if min(self.R1, self.R2) < 0:
            raise ValueError("filter resistances must be nonnegative")


@dataclass(frozen=True)
class GridParams:
    ug_mag: float = 1.0
    Lg: float = 0.4975 / OMEGA0
    Rg: float = 0.04975
    scr: float = 2.0
    x_over_r: float = 10.0
    omega_offset: float = 0.0

    def __post_init__(self):
        if self.scr <= 0:
            raise ValueError("SCR must be positive")
        if self.Lg <= 0 or self.Rg < 0:
            raise ValueError("grid impedance must have Lg > 0 and Rg >= 0")


@dataclass(frozen=True)
class PlantState:
    id: float = 0.0
    iq: float = 0.0
    igd: float = 0.0
    igq: float = 0.0
    vd: float = 0.0
    vq: float = 0.0
    theta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.id, self.iq, self.igd, self.igq, self.vd, self.vq, self.theta])

    @classmethod
    def from_array(cls, x) -> "PlantState":
        return cls(*(float(v) for v in x))


@dataclass(frozen=True)
class PlantInputs:
    dw: float = 0.0
    ud_star: float = 0.0
    uq_star: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.dw, self.ud_star, self.uq_star])

    @classmethod
    def from_array(cls, u) -> "PlantInputs":
        return cls(float(u[0]), float(u[1]), float(u[2]))


@dataclass(frozen=True)
class PlantOutputs:
    vd: float
    vq: float
    id: float
    iq: float
    pe: float
    qe: float

    def as_array(self) -> np.ndarray:
        return np.array([self.vd, self.vq, self.id, self.iq, self.pe, self.qe])

    @classmethod
    def from_array(cls, y) -> "PlantOutputs":
        return cls(*(float(v) for v in y))


def power_outputs(vd: float, vq: float, id: float, iq: float) -> Tuple[float, float]:
    """Per-unit active/reactive power, no 3/2 factor"""
    return vd * id + vq * iq, vq * id - vd * iq


def grid_from_scr(scr: float, x_over_r: float, omega0: float = OMEGA0, ug_mag: float = 1.0,
                  omega_offset: float = 0.0) -> GridParams:
    """Thevenin grid with |Z| = 1/scr split by the X/R ratio"""
    if scr <= 0 or x_over_r <= 0:
        raise ValueError(f"scr and x_over_r must be positive, got {scr}, {x_over_r}")
    z = 1.0 / scr
    if math.isinf(x_over_r):
        x, r = z, 0.0
    else:
        r = z / math.sqrt(1.0 + x_over_r ** 2)
        x = x_over_r * r
    return GridParams(ug_mag=ug_mag, Lg=x / omega0, Rg=r, scr=scr, x_over_r=x_over_r,
                      omega_offset=omega_offset)


def _derivatives(x, dw: float, ud: float, uq: float, cp: ConverterParams, gp: GridParams) -> np.ndarray:
    i_d, i_q, ig_d, ig_q, v_d, v_q, theta = x
    w = cp.omega0 + dw
    lt = cp.L2 + gp.Lg
    rt = cp.R2 + gp.Rg
    ug_d = gp.ug_mag * math.cos(-theta)
    ug_q = gp.ug_mag * math.sin(-theta)
    return np.array([
        (ud - v_d - cp.R1 * i_d + w * cp.L1 * i_q) / cp.L1,
        (uq - v_q - cp.R1 * i_q - w * cp.L1 * i_d) / cp.L1,
        (v_d - ug_d - rt * ig_d + w * lt * ig_q) / lt,
        (v_q - ug_q - rt * ig_q - w * lt * ig_d) / lt,
        (i_d - ig_d + w * cp.Cf * v_q) / cp.Cf,
        (i_q - ig_q - w * cp.Cf * v_d) / cp.Cf,
        dw - gp.omega_offset,
    ])


def plant_derivatives(s: PlantState, inputs: PlantInputs, cp: ConverterParams, gp: GridParams) -> np.ndarray:
    """State derivative ordered (Id, Iq, Igd, Igq, Vd, Vq, theta)"""
    dx = _derivatives(s.as_array(), inputs.dw, inputs.ud_star, inputs.uq_star, cp, gp)
    if not np.all(np.isfinite(dx)):
        raise IntegrationDivergedError("non-finite plant derivative")
    return dx


def _rk4(x: np.ndarray, u: PlantInputs, cp: ConverterParams, gp: GridParams, h: float) -> np.ndarray:
    dw, ud, uq = u.dw, u.ud_star, u.uq_star
    k1 = _derivatives(x, dw, ud, uq, cp, gp)
    k2 = _derivatives(x + 0.5 * h * k1, dw, ud, uq, cp, gp)
    k3 = _derivatives(x + 0.5 * h * k2, dw, ud, uq, cp, gp)
    k4 = _derivatives(x + h * k3, dw, ud, uq, cp, gp)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def outputs_from_state(s: PlantState) -> PlantOutputs:
    pe, qe = power_outputs(s.vd, s.vq, s.id, s.iq)
    return PlantOutputs(s.vd, s.vq, s.id, s.iq, pe, qe)


def plant_step(s: PlantState, inputs: PlantInputs, cp: ConverterParams, gp: GridParams,
               h: float) -> Tuple[PlantState, PlantOutputs]:
    """One classical RK4 step of length h; outputs read from the new state"""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = _rk4(s.as_array(), inputs, cp, gp, h)
    if not np.all(np.isfinite(x)):
        raise IntegrationDivergedError(f"plant state diverged: {x}")
    new_state = PlantState.from_array(x)
    return new_state, outputs_from_state(new_state)


def plant_equilibrium(inputs: PlantInputs, theta: float, cp: ConverterParams, gp: GridParams) -> PlantState:
    """
    Electrical steady state for constant commands and a frozen frame angle.

    The electrical dynamics are affine in the six currents/voltages, so the
    system matrix is read off exactly from seven evaluations of the model.
    """
    base = np.zeros(7)
    base[6] = theta
    f0 = _derivatives(base, inputs.dw, inputs.ud_star, inputs.uq_star, cp, gp)[:6]
    jac = np.empty((6, 6))
    for i in range(6):
        e = base.copy()
        e[i] = 1.0
        jac[:, i] = _derivatives(e, inputs.dw, inputs.ud_star, inputs.uq_star, cp, gp)[:6] - f0
    x = np.linalg.solve(jac, -f0)
    return PlantState.from_array(np.append(x, theta))


def lc_energy(s: PlantState, cp: ConverterParams, gp: GridParams) -> float:
    """Energy stored in the filter and grid inductances and the capacitor"""
    return 0.5 * (cp.L1 * (s.id ** 2 + s.iq ** 2)
                  + cp.Cf * (s.vd ** 2 + s.vq ** 2)
                  + (cp.L2 + gp.Lg) * (s.igd ** 2 + s.igq ** 2))


class ConverterPlant:
    """Stateful plant advanced one control period at a time"""

    def __init__(
        self,
        cp: Optional[ConverterParams] = None,
        gp: Optional[GridParams] = None,
        state: Optional[PlantState] = None,
        noise: float = 1e-3,
        seed: int = 1,
        sim_step: Optional[float] = None,
    ):
        self.cp = cp or ConverterParams()
        self.gp = gp or GridParams()
        self.noise = noise
        self.sim_step = sim_step or settings.sim_step
        self._rng = np.random.default_rng(seed)
        if state is None:
            state = plant_equilibrium(PlantInputs(0.0, self.gp.ug_mag, 0.0), 0.0, self.cp, self.gp)
        self._x = state.as_array()

    @property
    def state(self) -> PlantState:
        return PlantState.from_array(self._x)

    def set_grid(self, gp: GridParams):
        logger.debug("grid changed: scr=%.3f ug=%.3f offset=%.3f", gp.scr, gp.ug_mag, gp.omega_offset)
        self.gp = gp

    def advance(self, inputs: PlantInputs, duration: float) -> PlantOutputs:
        """
        Hold inputs for `duration` and return voltages and currents averaged
        over the substeps, plus uniform measurement noise of amplitude
        `noise`. Powers are computed from the reported voltages and currents.
        """
        steps = max(1, int(round(duration / self.sim_step)))
        h = duration / steps
        acc = np.zeros(4)
        x = self._x
        for _ in range(steps):
            x = _rk4(x, inputs, self.cp, self.gp, h)
            i_d, i_q, _, _, v_d, v_q, _ = x
            acc += (v_d, v_q, i_d, i_q)
        if not np.all(np.isfinite(x)):
            raise IntegrationDivergedError(f"plant state diverged: {x}")
        self._x = x
        vi = acc / steps
        if self.noise > 0:
            vi = vi + self._rng.uniform(-self.noise, self.noise, size=vi.shape)
        v_d, v_q, i_d, i_q = vi
        pe, qe = power_outputs(v_d, v_q, i_d, i_q)
        return PlantOutputs(v_d, v_q, i_d, i_q, pe, qe)

    def with_grid(self, **changes) -> GridParams:
        return replace(self.gp, **changes)
