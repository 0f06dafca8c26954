from pathlib import Path

import pytest

from app.config.scenario_file import dump_scenario, load_scenario, parse_scenario_text
from app.errors import ScenarioFileError
from app.models.scenario import ControllerKind, EventKind, ScenarioConfig

SCENARIOS = sorted((Path(__file__).resolve().parents[2] / "scenarios").glob("*.cfg"))

EXAMPLE = """
# sag with a preset switch
name = example

[plant]
scr = 2.5   # strong grid
noise = 0

[controller]
kind = deepc_full
solver = qp

[behavior]
preset = gfm
P_ref = 0.5

[deepc]
T_ini = 4
N = 8
k = 2
id_limit = 1.2

[run]
duration = 1.0
record_solve_time = false

[events]
time=0.2, kind=grid_voltage_sag, value=0.05, duration=0.1
time=0.5, kind=switch_preset, value=pv
"""


def test_parse_example():
    cfg = parse_scenario_text(EXAMPLE)
    assert cfg.name == "example"
    assert cfg.plant.scr == 2.5
    assert cfg.plant.noise == 0.0
    assert cfg.controller.kind is ControllerKind.DEEPC_FULL
    assert (cfg.deepc.T_ini, cfg.deepc.N, cfg.deepc.k) == (4, 8, 2)
    assert cfg.run.record_solve_time is False
    assert [e.kind for e in cfg.events] == [EventKind.GRID_VOLTAGE_SAG, EventKind.SWITCH_PRESET]
    assert cfg.events[0].duration == 0.1
    assert cfg.events[1].value == "pv"
    assert cfg.excitation.length == 600


def test_dump_round_trip():
    cfg = parse_scenario_text(EXAMPLE)
    assert parse_scenario_text(dump_scenario(cfg)) == cfg
    assert parse_scenario_text(dump_scenario(ScenarioConfig())) == ScenarioConfig()


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_bundled_scenarios_load(path):
    cfg = load_scenario(path)
    assert cfg.events


@pytest.mark.parametrize("text, line", [
    ("[plant]\nscr = 2\n[nowhere]\n", 3),
    ("[plant]\nscr 2\n", 2),
    ("[plant]\nscr = 2\nscr = 3\n", 3),
    ("[plant\n", 1),
    ("[events]\ntime=0.1, kind=set_P_ref\n", 2),
    ("[events]\ntime=0.1, kind=set_P_ref, value=1, slope=2\n", 2),
])
def test_syntax_errors_name_the_line(text, line):
    with pytest.raises(ScenarioFileError, match=f"line {line}"):
        parse_scenario_text(text)


@pytest.mark.parametrize("text", [
    "[events]\ntime=0.5, kind=set_P_ref, value=1\ntime=0.1, kind=set_P_ref, value=0\n",
    "[run]\nduration = 1\n[events]\ntime=1.5, kind=set_P_ref, value=1\n",
    "[events]\ntime=0.5, kind=grid_voltage_sag, value=0.05\n",
    "[events]\ntime=0.5, kind=switch_preset, value=droop\n",
    "[events]\ntime=0.5, kind=set_SCR, value=0\n",
    "[controller]\nkind = deepc_power_voltage\n[behavior]\npreset = gfm\n",
    "[deepc]\nN = 4\nk = 5\n",
    "[behavior]\npreset = inverter\n",
    "[plant]\nscr = fast\n",
    "[behavior]\nJ = 0.0001\nD = 0.3\n",
])
def test_invalid_scenarios_are_rejected(text):
    with pytest.raises(ScenarioFileError):
        parse_scenario_text(text)


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioFileError):
        load_scenario(tmp_path / "missing.cfg")


def test_swing_decay_error_names_inertia_and_damping():
    with pytest.raises(ScenarioFileError, match="J=0.0001 and D=0.3"):
        parse_scenario_text("[behavior]\npreset = gfm\nJ = 0.0001\nD = 0.3\n")
