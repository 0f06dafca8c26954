"""
Closed-loop data collection: a GFL baseline keeps the converter at its
operating point while seeded uniform noise is superimposed on the commands
of the channels the DeePC controller will later drive.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.behavior.baseline import GFLBaseline
from app.behavior.design import BehaviorRefs
from app.config.settings import settings
from app.errors import DimensionError, ExcitationError
from app.hankel.blocks import is_persistently_exciting
from app.hankel.trajectory import Trajectory
from app.plant.converter import INPUT_CHANNELS, ConverterPlant, PlantInputs, PlantOutputs

logger = logging.getLogger(__name__)

CURRENT_CHANNELS = ("id_ref", "iq_ref")


@dataclass(frozen=True)
class ExcitationSpec:
    amplitudes: Tuple[float, ...]
    length: int = 600
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("excitation amplitudes must be nonnegative")
        if self.length < 1:
            raise ValueError("excitation length must be positive")

    @property
    def m(self) -> int:
        return len(self.amplitudes)

    def perturbations(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(-1.0, 1.0, size=(self.length, self.m)) * np.array(self.amplitudes)


class LoopDriver:
    """
    Couples a command vector in controller channels to the plant. In plant
    channels the command is applied as is; in current-reference channels the
    baseline's PLL and current loop stay in the loop.
    """

    def __init__(self, plant: ConverterPlant, baseline: GFLBaseline,
                 channels: Sequence[str] = INPUT_CHANNELS, Ts: Optional[float] = None):
        channels = tuple(channels)
        if channels not in (INPUT_CHANNELS, CURRENT_CHANNELS):
            raise ValueError(f"unsupported command channels {channels}")
        self.plant = plant
        self.baseline = baseline
        self.channels = channels
        self.Ts = Ts or settings.control_period
        self.y: Optional[PlantOutputs] = None
        self.last_command: Optional[np.ndarray] = None
        self.last_inputs: Optional[PlantInputs] = None

    @property
    def m(self) -> int:
        return len(self.channels)

    @property
    def current_mode(self) -> bool:
        return self.channels == CURRENT_CHANNELS

    def start(self, y: PlantOutputs, u: PlantInputs, refs: BehaviorRefs):
        self.baseline.initialize(y, u, refs)
        self.y = y
        self.last_inputs = u
        if self.current_mode:
            self.last_command = np.array([y.id, y.iq])
        else:
            self.last_command = u.as_array()

    def synchronize(self):
        if self.current_mode:
            self.baseline.synchronize(self.y)

    def nominal(self, refs: BehaviorRefs) -> np.ndarray:
        """The baseline's own command for this period"""
        if self.current_mode:
            self.baseline.synchronize(self.y)
            return np.array(self.baseline.outer(self.y, refs))
        return self.baseline.step(self.y, refs).as_array()

    def actuate(self, command) -> PlantInputs:
        command = np.asarray(command, dtype=float).ravel()
        if command.shape[0] != self.m:
            raise DimensionError(f"command has {command.shape[0]} entries, expected {self.m}")
        if self.current_mode:
            return self.baseline.inner(command[0], command[1], self.y)
        return PlantInputs.from_array(command)

    def apply(self, command) -> PlantOutputs:
        inputs = self.actuate(command)
        self.y = self.plant.advance(inputs, self.Ts)
        self.last_command = np.asarray(command, dtype=float).ravel().copy()
        self.last_inputs = inputs
        return self.y

    def run_baseline(self, refs: BehaviorRefs, steps: int) -> Tuple[np.ndarray, np.ndarray]:
        """Unexcited baseline operation, returns the (command, output) history"""
        U, Y = [], []
        for _ in range(steps):
            u = self.nominal(refs)
            U.append(u)
            Y.append(self.apply(u).as_array())
        return np.array(U).reshape(steps, self.m), np.array(Y).reshape(steps, -1)


def collect_data(driver: LoopDriver, excitation: ExcitationSpec, refs: Optional[BehaviorRefs] = None,
                 order: Optional[int] = None) -> Trajectory:
    """
    Record (u, y) at the control rate with the excitation added to the
    baseline commands. With `order` set, the input record must be
    persistently exciting of that order.
    """
    if excitation.m != driver.m:
        raise DimensionError(f"excitation covers {excitation.m} channels, driver has {driver.m}")
    if order is not None and not any(excitation.amplitudes):
        raise ExcitationError("all excitation amplitudes are zero; the input record cannot be persistently exciting")
    refs = refs or BehaviorRefs()
    noise = excitation.perturbations()
    U = np.empty((excitation.length, driver.m))
    Y = np.empty((excitation.length, 6))
    for t in range(excitation.length):
        U[t] = driver.nominal(refs) + noise[t]
        Y[t] = driver.apply(U[t]).as_array()
    if order is not None:
        needed = (driver.m + 1) * order - 1
        if excitation.length < needed:
            raise ExcitationError(
                f"T={excitation.length} is too short for PE order {order}; need T >= {needed}"
            )
        if not is_persistently_exciting(U, order):
            raise ExcitationError(
                f"excitation is not persistently exciting of order {order}; "
                f"increase the length (T={excitation.length}) or the amplitudes {excitation.amplitudes}"
            )
    logger.info("collected %d samples on %s (seed %d)", excitation.length, driver.channels, excitation.seed)
    return Trajectory(U, Y)
