"""
Post-event window metrics. Each event opens a window that lasts until the
next event (or the end of the record); a run without events is measured as
one window starting at t = 0.
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np

from app.harness.scenario import RunRecord
from app.models.metrics import ChannelMetrics, EventWindowMetrics, Metrics
from app.models.scenario import Event, EventKind, ScenarioConfig

logger = logging.getLogger(__name__)

SETTLING_BAND = 0.02
FINAL_FRACTION = 0.1

DISTURBANCE_CHANNELS = ("pe", "qe", "vd")

TRACKED_CHANNELS = {
    EventKind.SET_P_REF: ("pe",),
    EventKind.SET_Q_REF: ("qe",),
    EventKind.SET_V_REF: ("vd",),
    EventKind.SET_SCR: DISTURBANCE_CHANNELS,
    EventKind.GRID_VOLTAGE_SAG: DISTURBANCE_CHANNELS,
    EventKind.SWITCH_PRESET: DISTURBANCE_CHANNELS,
    EventKind.SET_GRID_FREQUENCY: ("pe", "dw"),
}


def channel_metrics(t: np.ndarray, x: np.ndarray, start: float, before: float,
                    target: Optional[float] = None, band_floor: float = 0.0) -> ChannelMetrics:
    """
    Step metrics of one signal over a window.

    `before` is the level just before the event. The steady-state error is
    taken against `target` when the event sets one, otherwise against
    `before`. Overshoot is in channel units beyond the final value.
    """
    tail = max(1, int(round(FINAL_FRACTION * len(x))))
    final = float(np.mean(x[-tail:]))
    change = final - before
    excursion = float(np.max(np.abs(x - before)))
    band = max(SETTLING_BAND * max(abs(change), excursion), band_floor, 1e-12 * max(1.0, abs(final)))
    outside = np.flatnonzero(np.abs(x - final) > band)
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] + 1 < len(x):
        settling = float(t[outside[-1] + 1] - start)
    else:
        settling = float(t[-1] - start)
    if abs(change) > 1e-12:
        overshoot = max(0.0, float(np.max(np.sign(change) * (x - final))))
    else:
        overshoot = float(np.max(np.abs(x - final)))
    reference = before if target is None else target
    return ChannelMetrics(steady_state_error=abs(final - reference), settling_time=settling,
                          overshoot=overshoot)


def _targets(event: Optional[Event]) -> Dict[str, float]:
    if event is None:
        return {}
    if event.kind is EventKind.SET_P_REF:
        return {"pe": float(event.value)}
    if event.kind is EventKind.SET_Q_REF:
        return {"qe": float(event.value)}
    if event.kind is EventKind.SET_V_REF:
        return {"vd": float(event.value)}
    if event.kind is EventKind.SET_GRID_FREQUENCY:
        return {"dw": float(event.value)}
    return {}


def count_violations(record: RunRecord, mask: np.ndarray, limits: Dict[str, float],
                     tolerance: float = 0.0) -> int:
    count = 0
    for name, limit in limits.items():
        x = record.channel(name)[mask]
        count += int(np.count_nonzero(np.abs(x) > limit + tolerance))
    return count


def compute_metrics(record: RunRecord, events: Sequence[Event], limits: Optional[Dict[str, float]] = None,
                    tolerance: float = 0.0, band_floor: float = 0.0) -> Metrics:
    """
    limits maps a record channel to a symmetric bound |x| <= limit; samples
    beyond limit + tolerance count as violations.
    """
    limits = limits or {}
    t = record.t
    end = record.end_time
    events = sorted(events, key=lambda e: e.time)
    for e in events:
        if e.time >= end:
            raise ValueError(f"event {e.kind.value} at t={e.time} lies beyond the record (ends at {end})")
    starts = [(e.time, e) for e in events] or [(0.0, None)]
    eps = 1e-9 * record.Ts
    windows = []
    for i, (start, event) in enumerate(starts):
        stop = starts[i + 1][0] if i + 1 < len(starts) else end
        mask = (t >= start - eps) & (t < stop - eps)
        if not np.any(mask):
            continue
        idx = np.flatnonzero(mask)
        kind = event.kind if event is not None else None
        channels = TRACKED_CHANNELS.get(kind, DISTURBANCE_CHANNELS)
        targets = _targets(event)
        per_channel = {}
        for name in channels:
            x = record.channel(name)
            before = float(x[idx[0] - 1]) if idx[0] > 0 else float(x[idx[0]])
            per_channel[name] = channel_metrics(t[mask], x[mask], start, before,
                                                targets.get(name), band_floor)
        windows.append(EventWindowMetrics(
            kind=kind.value if kind is not None else "run",
            start=start, end=stop, channels=per_channel,
            peak_dw=float(np.max(np.abs(record.channel("dw")[mask]))),
            violations=count_violations(record, mask, limits, tolerance),
        ))
    logger.debug("computed metrics over %d windows", len(windows))
    return Metrics(
        steps=record.steps,
        windows=windows,
        peak_dw=max((w.peak_dw for w in windows), default=0.0),
        violations=sum(w.violations for w in windows),
    )


def scenario_limits(cfg: ScenarioConfig) -> Dict[str, float]:
    d = cfg.deepc
    limits = {"id": d.id_limit, "iq": d.iq_limit, "dw": d.dw_limit}
    return {name: value for name, value in limits.items() if value is not None}


def scenario_metrics(cfg: ScenarioConfig, record: RunRecord, error: Optional[str] = None) -> Metrics:
    """Metrics of a (possibly partial) run of cfg"""
    events = [e for e in cfg.events if e.time < record.end_time]
    if record.steps == 0:
        return Metrics(steps=0, windows=[], peak_dw=0.0, violations=0,
                       aborted=error is not None, error_message=error)
    metrics = compute_metrics(record, events, scenario_limits(cfg), band_floor=2.0 * cfg.plant.noise)
    if error is not None:
        metrics = metrics.model_copy(update={"aborted": True, "error_message": error})
    return metrics
