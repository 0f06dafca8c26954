import math

import numpy as np
import pytest

from app.harness.metrics import channel_metrics, compute_metrics, scenario_limits, scenario_metrics
from app.harness.scenario import RunRecord
from app.models.scenario import Event, ScenarioConfig
from app.plant.converter import PlantInputs, PlantOutputs

TS = 1e-3
TAU = 0.05


def _record(pe, id_=None):
    record = RunRecord(Ts=TS)
    id_ = np.full(len(pe), 0.5) if id_ is None else id_
    for p, i in zip(pe, id_):
        record.append(PlantInputs(0.0, 1.0, 0.0), PlantOutputs(1.0, 0.0, float(i), 0.0, float(p), 0.0))
    return record


def _first_order_step(steps=1200, start=0.2):
    t = np.arange(steps) * TS
    return np.where(t >= start - 1e-12, 1.0 - np.exp(-(t - start) / TAU), 0.0)


def test_flat_record_settles_immediately():
    record = _record(np.full(300, 0.4))
    metrics = compute_metrics(record, [])
    assert len(metrics.windows) == 1
    window = metrics.windows[0]
    assert window.kind == "run"
    ch = window.channels["pe"]
    assert ch.settling_time == 0.0
    assert ch.overshoot == pytest.approx(0.0, abs=1e-12)
    assert ch.steady_state_error == pytest.approx(0.0, abs=1e-12)
    assert metrics.steps == 300


def test_first_order_settling_time():
    record = _record(_first_order_step())
    metrics = compute_metrics(record, [Event(time=0.2, kind="set_P_ref", value=1.0)])
    window = metrics.windows[-1]
    assert window.start == 0.2
    assert window.end == pytest.approx(1.2)
    ch = window.channels["pe"]
    assert abs(ch.settling_time - TAU * math.log(50.0)) <= TS + 1e-9
    assert ch.steady_state_error < 1e-6
    assert ch.overshoot < 1e-6


def test_overshoot_in_channel_units():
    t = np.arange(500) * TS
    x = np.zeros(500)
    x[100:] = 1.0
    x[150] = 1.3
    ch = channel_metrics(t[100:], x[100:], 0.1, 0.0, target=1.0)
    assert ch.overshoot == pytest.approx(0.3)
    assert ch.settling_time == pytest.approx(0.051)


def test_steady_state_error_without_target_uses_prior_level():
    t = np.arange(100) * TS
    ch = channel_metrics(t, np.full(100, 0.9), 0.0, before=1.0)
    assert ch.steady_state_error == pytest.approx(0.1)


def test_single_violation_is_counted():
    id_ = np.full(400, 0.5)
    id_[250] = 1.5
    record = _record(np.zeros(400), id_)
    metrics = compute_metrics(record, [Event(time=0.2, kind="set_P_ref", value=0.0)], limits={"id": 1.2})
    assert metrics.violations == 1
    assert len(metrics.windows) == 1
    relaxed = compute_metrics(record, [], limits={"id": 1.2}, tolerance=0.5)
    assert relaxed.violations == 0


def test_event_beyond_record_is_rejected():
    record = _record(np.zeros(100))
    with pytest.raises(ValueError):
        compute_metrics(record, [Event(time=0.5, kind="set_P_ref", value=1.0)])


def test_scenario_metrics_for_partial_and_empty_runs():
    cfg = ScenarioConfig.model_validate({
        "deepc": {"id_limit": 1.2},
        "events": [{"time": 0.05, "kind": "set_P_ref", "value": 0.4},
                   {"time": 0.5, "kind": "set_P_ref", "value": 0.8}],
    })
    assert scenario_limits(cfg) == {"id": 1.2}
    partial = scenario_metrics(cfg, _record(np.zeros(100)), error="stalled")
    assert partial.aborted and partial.error_message == "stalled"
    assert [w.kind for w in partial.windows] == ["set_P_ref"]
    empty = scenario_metrics(cfg, RunRecord(Ts=TS), error="stalled")
    assert empty.steps == 0 and empty.windows == []
