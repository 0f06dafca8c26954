from enum import Enum
from typing import List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.behavior.design import BEHAVIOR_PRESETS
from app.config.settings import settings
from app.deepc.problem import Regularizer, SolverPath


class ControllerKind(str, Enum):
    DEEPC_FULL = "deepc_full"
    DEEPC_INTEGRAL_FULL = "deepc_integral_full"
    DEEPC_POWER_VOLTAGE = "deepc_power_voltage"
    BASELINE_GFL = "baseline_gfl"
    BASELINE_GFM = "baseline_gfm"

    @property
    def is_deepc(self) -> bool:
        return self.value.startswith("deepc")


class EventKind(str, Enum):
    SET_P_REF = "set_P_ref"
    SET_Q_REF = "set_Q_ref"
    SET_V_REF = "set_V_ref"
    SET_SCR = "set_SCR"
    GRID_VOLTAGE_SAG = "grid_voltage_sag"
    SWITCH_PRESET = "switch_preset"
    SET_GRID_FREQUENCY = "set_grid_frequency"


class Event(BaseModel):
    time: float = Field(..., ge=0.0)
    kind: EventKind
    value: Union[float, str]
    duration: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def check_value(self):
        if self.kind is EventKind.SWITCH_PRESET:
            if str(self.value) not in BEHAVIOR_PRESETS:
                raise ValueError(f"switch_preset needs one of {BEHAVIOR_PRESETS}, got {self.value!r}")
            self.value = str(self.value)
        else:
            try:
                self.value = float(self.value)
            except (TypeError, ValueError):
                raise ValueError(f"{self.kind.value} needs a numeric value, got {self.value!r}")
        if self.kind is EventKind.GRID_VOLTAGE_SAG and self.duration is None:
            raise ValueError("grid_voltage_sag needs a duration")
        if self.kind is EventKind.SET_SCR and self.value <= 0:
            raise ValueError("SCR must be positive")
        return self


class PlantSection(BaseModel):
    scr: float = Field(default=2.0, gt=0.0)
    x_over_r: float = Field(default=10.0, gt=0.0)
    ug_mag: float = Field(default=1.0, gt=0.0)
    noise: float = Field(default=1e-3, ge=0.0)


class ControllerSection(BaseModel):
    kind: ControllerKind = ControllerKind.DEEPC_INTEGRAL_FULL
    solver: SolverPath = SolverPath.CLOSED_FORM


class BehaviorSection(BaseModel):
    preset: str = "gfl"
    alpha1: Optional[float] = Field(default=None, ge=0.0)
    alpha2: Optional[float] = Field(default=None, ge=0.0)
    alpha3: Optional[float] = Field(default=None, ge=0.0)
    k_qv: Optional[float] = None
    P_ref: float = 0.0
    Q_ref: float = 0.0
    Vd_ref: float = 1.0
    Vq_ref: float = 0.0
    J: float = Field(default=0.03, gt=0.0)
    D: float = Field(default=0.3, gt=0.0)
    input_weight: float = Field(default=0.1, gt=0.0)

    @model_validator(mode="after")
    def check_swing_decay(self):
        decay = 1.0 - self.D * settings.control_period / self.J
        if not 0.0 < decay < 1.0:
            raise ValueError(
                f"J={self.J} and D={self.D} give 1 - D*Ts/J = {decay:.4f} at Ts={settings.control_period}; "
                "it must lie in (0, 1)"
            )
        return self

    @field_validator("preset")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        if v not in BEHAVIOR_PRESETS:
            raise ValueError(f"unknown behavior preset {v!r}, expected one of {BEHAVIOR_PRESETS}")
        return v

    def overrides(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha1", "alpha2", "alpha3", "k_qv")
                if getattr(self, k) is not None}


class DeePCSection(BaseModel):
    T_ini: int = Field(default=5, ge=1)
    N: int = Field(default=10, ge=1)
    k: int = Field(default=1, ge=1)
    lambda_g: float = Field(default=10.0, ge=0.0)
    lambda_u: float = Field(default=1e5, ge=0.0)
    lambda_y: float = Field(default=1e5, ge=0.0)
    regularizer: Regularizer = Regularizer.TWO_NORM_SQ
    id_limit: Optional[float] = Field(default=None, gt=0.0)
    iq_limit: Optional[float] = Field(default=None, gt=0.0)
    dw_limit: Optional[float] = Field(default=None, gt=0.0)
    strict_solver: bool = False

    @model_validator(mode="after")
    def check_horizon(self):
        if self.k > self.N:
            raise ValueError(f"control horizon k={self.k} exceeds N={self.N}")
        return self


class ExcitationSection(BaseModel):
    length: int = Field(default=600, ge=2)
    amplitude_dw: float = Field(default=2.0, ge=0.0)
    amplitude_u: float = Field(default=0.02, ge=0.0)
    amplitude_current: float = Field(default=0.05, ge=0.0)
    n_guess: int = Field(default=12, ge=0)
    seed: int = 1
    warmup: float = Field(default=0.5, ge=0.0)
    settle: float = Field(default=0.1, ge=0.0)


class RunSection(BaseModel):
    duration: float = Field(default=2.0, gt=0.0)
    seed: int = 1
    record_solve_time: Optional[bool] = None


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    plant: PlantSection = Field(default_factory=PlantSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    behavior: BehaviorSection = Field(default_factory=BehaviorSection)
    deepc: DeePCSection = Field(default_factory=DeePCSection)
    excitation: ExcitationSection = Field(default_factory=ExcitationSection)
    run: RunSection = Field(default_factory=RunSection)
    events: List[Event] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_consistency(self):
        times = [e.time for e in self.events]
        if times != sorted(times):
            raise ValueError("events must be in time order")
        if any(t >= self.run.duration for t in times):
            raise ValueError("every event must occur before the end of the run")
        if self.run.duration <= self.excitation.warmup:
            raise ValueError("run duration must exceed the warmup")
        presets = [self.behavior.preset] + [
            e.value for e in self.events if e.kind is EventKind.SWITCH_PRESET
        ]
        if self.controller.kind is ControllerKind.DEEPC_POWER_VOLTAGE and "gfm" in presets:
            raise ValueError("the power_voltage wiring has no frequency input for the gfm preset")
        return self
