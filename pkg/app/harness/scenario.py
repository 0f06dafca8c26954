"""
Scenario engine.

Before t = 0 the converter is brought to its operating point by the GFL
baseline, excited for data collection (DeePC controllers only) and settled
again. From t = 0 the configured controller runs one control period per
step while timed events change references, grid strength, grid voltage,
grid frequency or the behavior preset.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from app.behavior.baseline import GFLBaseline, GFMBaseline
from app.behavior.design import BehaviorCost, BehaviorRefs, behavior_cost, behavior_preset
from app.behavior.params import GFMParams
from app.config.settings import settings
from app.deepc.controller import DeePCController, StepInfo
from app.deepc.problem import BoxBound, DeePCConfig
from app.errors import DeePCError, DimensionError, ScenarioAbortedError
from app.harness.collect import CURRENT_CHANNELS, ExcitationSpec, LoopDriver, collect_data
from app.hankel.blocks import partition
from app.hankel.trajectory import Trajectory
from app.integral.controller import IntegralDeePCController, configure_integral_converter
from app.integral.delta import delta_partition
from app.models.scenario import ControllerKind, Event, EventKind, ScenarioConfig
from app.plant.converter import (
    INPUT_CHANNELS,
    OUTPUT_CHANNELS,
    ConverterPlant,
    PlantInputs,
    PlantOutputs,
    grid_from_scr,
    outputs_from_state,
)

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ("t",) + INPUT_CHANNELS + OUTPUT_CHANNELS + ("solve_ms", "iters")

INTEGRAL_WIRING = {
    ControllerKind.DEEPC_INTEGRAL_FULL: "full",
    ControllerKind.DEEPC_POWER_VOLTAGE: "power_voltage",
}


@dataclass
class RunRecord:
    """Per-control-step plant inputs, outputs and solver diagnostics"""

    Ts: float
    u: List[np.ndarray] = field(default_factory=list)
    y: List[np.ndarray] = field(default_factory=list)
    solve_ms: List[float] = field(default_factory=list)
    iters: List[int] = field(default_factory=list)

    def append(self, inputs: PlantInputs, outputs: PlantOutputs, solve_ms: float = 0.0, iters: int = 0):
        self.u.append(inputs.as_array())
        self.y.append(outputs.as_array())
        self.solve_ms.append(float(solve_ms))
        self.iters.append(int(iters))

    @property
    def steps(self) -> int:
        return len(self.u)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.steps) * self.Ts

    @property
    def end_time(self) -> float:
        return self.steps * self.Ts

    def inputs(self) -> np.ndarray:
        return np.array(self.u).reshape(self.steps, len(INPUT_CHANNELS))

    def outputs(self) -> np.ndarray:
        return np.array(self.y).reshape(self.steps, len(OUTPUT_CHANNELS))

    def channel(self, name: str) -> np.ndarray:
        if name in INPUT_CHANNELS:
            return self.inputs()[:, INPUT_CHANNELS.index(name)]
        if name in OUTPUT_CHANNELS:
            return self.outputs()[:, OUTPUT_CHANNELS.index(name)]
        raise KeyError(f"unknown record channel {name!r}")

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack([self.t, self.inputs(), self.outputs(), self.solve_ms, self.iters])
        frame = pd.DataFrame(data, columns=list(RECORD_COLUMNS))
        frame["iters"] = frame["iters"].astype(int)
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, Ts: Optional[float] = None) -> "RunRecord":
        missing = [c for c in RECORD_COLUMNS if c not in frame.columns]
        if missing:
            raise DimensionError(f"record is missing columns {missing}")
        if Ts is None:
            t = frame["t"].to_numpy()
            Ts = float(t[1] - t[0]) if len(t) > 1 else settings.control_period
        return cls(
            Ts=Ts,
            u=list(frame[list(INPUT_CHANNELS)].to_numpy(dtype=float)),
            y=list(frame[list(OUTPUT_CHANNELS)].to_numpy(dtype=float)),
            solve_ms=frame["solve_ms"].astype(float).tolist(),
            iters=frame["iters"].astype(int).tolist(),
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "RunRecord":
        return cls.from_frame(pd.read_csv(path, float_precision="round_trip"))


def initial_refs(cfg: ScenarioConfig) -> BehaviorRefs:
    b = cfg.behavior
    return BehaviorRefs(Vd_ref=b.Vd_ref, Vq_ref=b.Vq_ref, Q_ref=b.Q_ref, P_ref=b.P_ref)


def build_plant(cfg: ScenarioConfig, seed: Optional[int] = None) -> ConverterPlant:
    p = cfg.plant
    grid = grid_from_scr(p.scr, p.x_over_r, ug_mag=p.ug_mag)
    return ConverterPlant(gp=grid, noise=p.noise, seed=cfg.run.seed if seed is None else seed)


def command_channels(kind: ControllerKind) -> tuple:
    return CURRENT_CHANNELS if kind is ControllerKind.DEEPC_POWER_VOLTAGE else INPUT_CHANNELS


def excitation_spec(cfg: ScenarioConfig, channels: tuple) -> ExcitationSpec:
    ex = cfg.excitation
    if channels == CURRENT_CHANNELS:
        amplitudes = (ex.amplitude_current,) * len(channels)
    else:
        amplitudes = tuple(ex.amplitude_dw if ch == "dw" else ex.amplitude_u for ch in channels)
    return ExcitationSpec(amplitudes, length=ex.length, seed=ex.seed)


def pe_order(cfg: ScenarioConfig) -> int:
    d = cfg.deepc
    return d.T_ini + d.N + cfg.excitation.n_guess


def gfm_params(cfg: ScenarioConfig) -> GFMParams:
    return GFMParams(J=cfg.behavior.J, D=cfg.behavior.D, Ts=settings.control_period)


def scenario_cost(cfg: ScenarioConfig, preset: str, refs: BehaviorRefs) -> BehaviorCost:
    overrides = cfg.behavior.overrides()
    design = behavior_preset(preset, cfg.deepc.N, gfm=gfm_params(cfg), overrides=overrides, refs=refs)
    return behavior_cost(design, OUTPUT_CHANNELS)


def scenario_bounds(cfg: ScenarioConfig, channels: tuple) -> tuple:
    d = cfg.deepc
    bounds = []
    for name, limit in (("id", d.id_limit), ("iq", d.iq_limit)):
        if limit is not None:
            bounds.append(BoxBound("y", OUTPUT_CHANNELS.index(name), -limit, limit))
    if d.dw_limit is not None and "dw" in channels:
        bounds.append(BoxBound("u", channels.index("dw"), -d.dw_limit, d.dw_limit))
    return tuple(bounds)


def scenario_deepc_config(cfg: ScenarioConfig, cost: BehaviorCost, channels: tuple) -> DeePCConfig:
    d = cfg.deepc
    w = cost.to_deepc_weights(d.T_ini, [cfg.behavior.input_weight] * len(channels), channels)
    return DeePCConfig(
        T_ini=d.T_ini, N=d.N, k=d.k,
        R=w["R"], Q=w["Q"], S=w["S"], Phi=w["Phi"],
        lambda_u=d.lambda_u, lambda_y=d.lambda_y, lambda_g=d.lambda_g,
        regularizer=d.regularizer, constraints=scenario_bounds(cfg, channels),
        solver=cfg.controller.solver, strict_solver=d.strict_solver,
    )


class BaselineLoop:
    def __init__(self, baseline):
        self.baseline = baseline
        self.info = StepInfo()

    def command(self, driver: LoopDriver, refs: BehaviorRefs) -> np.ndarray:
        return self.baseline.step(driver.y, refs).as_array()

    def switch_preset(self, preset: str, refs: BehaviorRefs):
        logger.warning("baseline %s ignores switch_preset(%s)", self.baseline.kind, preset)


class DeePCLoop:
    """Receding-horizon DeePC (plain or integral) behind a loop driver"""

    def __init__(self, cfg: ScenarioConfig, ctrl, preset: str, refs: BehaviorRefs, channels: tuple):
        self.cfg = cfg
        self.ctrl = ctrl
        self.channels = channels
        self._configs: Dict[str, DeePCConfig] = {}
        self.cost = scenario_cost(cfg, preset, refs)
        self.preset = preset
        self._configs[preset] = ctrl.cfg

    @property
    def info(self) -> StepInfo:
        return self.ctrl.info

    def command(self, driver: LoopDriver, refs: BehaviorRefs) -> np.ndarray:
        driver.synchronize()
        r = self.cost.sample_major_reference(refs)
        return self.ctrl.step(driver.last_command, driver.y.as_array(), r)

    def switch_preset(self, preset: str, refs: BehaviorRefs):
        self.cost = scenario_cost(self.cfg, preset, refs)
        dcfg = self._configs.get(preset)
        if dcfg is None:
            dcfg = scenario_deepc_config(self.cfg, self.cost, self.channels)
            self._configs[preset] = dcfg
        if isinstance(self.ctrl, DeePCController):
            self.ctrl.set_config(dcfg, key=preset)
        else:
            self.ctrl.set_config(dcfg)
        logger.info("behavior preset %s -> %s", self.preset, preset)
        self.preset = preset


class ScenarioRunner:
    """One plant, one controller, one run"""

    def __init__(self, cfg: ScenarioConfig, record_solve_time: Optional[bool] = None):
        self.cfg = cfg
        self.Ts = settings.control_period
        if record_solve_time is None:
            record_solve_time = cfg.run.record_solve_time
        self.record_solve_time = settings.record_solve_time if record_solve_time is None else record_solve_time
        self.kind = cfg.controller.kind
        self.refs = initial_refs(cfg)
        self.plant = build_plant(cfg)
        self.driver = LoopDriver(self.plant, GFLBaseline(cp=self.plant.cp), command_channels(self.kind), self.Ts)
        self.trajectory: Optional[Trajectory] = None
        self.loop = None
        self._sag_end: Optional[float] = None
        self._ug_nominal = self.plant.gp.ug_mag

    def _steps(self, seconds: float) -> int:
        return int(round(seconds / self.Ts))

    def collect(self) -> Trajectory:
        """Warm up from equilibrium and record the excited data set"""
        ug = self.plant.gp.ug_mag
        u0 = PlantInputs(0.0, ug, 0.0)
        self.driver.start(outputs_from_state(self.plant.state), u0, self.refs)
        self.driver.run_baseline(self.refs, self._steps(self.cfg.excitation.warmup))
        self._u_before = self.driver.last_command.copy()
        spec = excitation_spec(self.cfg, self.driver.channels)
        self.trajectory = collect_data(self.driver, spec, self.refs, order=pe_order(self.cfg))
        return self.trajectory

    def prepare(self):
        T_ini = self.cfg.deepc.T_ini
        if self.kind.is_deepc:
            self.collect()
        else:
            self.driver.start(outputs_from_state(self.plant.state),
                              PlantInputs(0.0, self.plant.gp.ug_mag, 0.0), self.refs)
            self.driver.run_baseline(self.refs, self._steps(self.cfg.excitation.warmup))
        settle = max(self._steps(self.cfg.excitation.settle), T_ini + 2)
        U, Y = self.driver.run_baseline(self.refs, settle)
        self.loop = self._build_loop(U, Y)

    def build_controller(self):
        """DeePC controller over the collected data, before any priming"""
        d = self.cfg.deepc
        preset = self.cfg.behavior.preset
        channels = self.driver.channels
        dcfg = scenario_deepc_config(self.cfg, scenario_cost(self.cfg, preset, self.refs), channels)
        if self.kind in INTEGRAL_WIRING:
            wiring = configure_integral_converter(INTEGRAL_WIRING[self.kind])
            if wiring.input_channels != channels:
                raise DimensionError(f"wiring {wiring.preset} drives {wiring.input_channels}, loop has {channels}")
            dblocks = delta_partition(self.trajectory, d.T_ini, d.N, wiring.mask, u_prev=self._u_before)
            return IntegralDeePCController(dblocks, dcfg)
        return DeePCController(partition(self.trajectory, d.T_ini, d.N), dcfg)

    def _build_loop(self, U: np.ndarray, Y: np.ndarray):
        if self.kind is ControllerKind.BASELINE_GFL:
            return BaselineLoop(self.driver.baseline)
        if self.kind is ControllerKind.BASELINE_GFM:
            gfm = GFMBaseline(gfm=gfm_params(self.cfg), cp=self.plant.cp)
            gfm.initialize(self.driver.y, self.driver.last_inputs, self.refs)
            return BaselineLoop(gfm)
        T_ini = self.cfg.deepc.T_ini
        ctrl = self.build_controller()
        # the newest pair is pushed by the first step
        if isinstance(ctrl, IntegralDeePCController):
            ctrl.prime(U[-T_ini - 1:-1], Y[-T_ini - 1:-1], u_before=U[-T_ini - 2])
        else:
            ctrl.buffer.prime(U[-T_ini - 1:-1], Y[-T_ini - 1:-1])
        return DeePCLoop(self.cfg, ctrl, self.cfg.behavior.preset, self.refs, self.driver.channels)

    def apply_event(self, event: Event, t: float):
        kind, value = event.kind, event.value
        gp = self.plant.gp
        if kind is EventKind.SET_P_REF:
            self.refs = replace(self.refs, P_ref=value)
        elif kind is EventKind.SET_Q_REF:
            self.refs = replace(self.refs, Q_ref=value)
        elif kind is EventKind.SET_V_REF:
            self.refs = replace(self.refs, Vd_ref=value)
        elif kind is EventKind.SET_SCR:
            self.plant.set_grid(grid_from_scr(value, gp.x_over_r, self.plant.cp.omega0,
                                              ug_mag=gp.ug_mag, omega_offset=gp.omega_offset))
        elif kind is EventKind.GRID_VOLTAGE_SAG:
            self.plant.set_grid(self.plant.with_grid(ug_mag=self._ug_nominal - value))
            self._sag_end = t + event.duration
        elif kind is EventKind.SWITCH_PRESET:
            self.loop.switch_preset(value, self.refs)
        elif kind is EventKind.SET_GRID_FREQUENCY:
            self.plant.set_grid(self.plant.with_grid(omega_offset=value))
        logger.info("t=%.4f s: %s %s", t, kind.value, value)

    def run(self) -> RunRecord:
        if self.loop is None:
            self.prepare()
        record = RunRecord(self.Ts)
        pending = list(self.cfg.events)
        eps = 1e-9 * self.Ts
        for j in range(self._steps(self.cfg.run.duration)):
            t = j * self.Ts
            while pending and pending[0].time <= t + eps:
                self.apply_event(pending.pop(0), t)
            if self._sag_end is not None and t + eps >= self._sag_end:
                self.plant.set_grid(self.plant.with_grid(ug_mag=self._ug_nominal))
                self._sag_end = None
                logger.info("t=%.4f s: grid voltage restored", t)
            try:
                command = self.loop.command(self.driver, self.refs)
                y = self.driver.apply(command)
            except (DeePCError, np.linalg.LinAlgError) as e:
                logger.error("scenario %r aborted at t=%.4f s: %s", self.cfg.name, t, e)
                raise ScenarioAbortedError(
                    f"run aborted at t={t:.4f} s: {e}", record,
                    {"time": t, "step": j, "error": type(e).__name__},
                ) from e
            info = self.loop.info
            solve_ms = info.solve_ms if self.record_solve_time else 0.0
            record.append(self.driver.last_inputs, y, solve_ms, info.iterations)
        logger.info("scenario %r finished: %d steps", self.cfg.name, record.steps)
        return record


def run_scenario(cfg: ScenarioConfig, record_solve_time: Optional[bool] = None) -> RunRecord:
    return ScenarioRunner(cfg, record_solve_time).run()
