"""
Scenario file reader/writer.

Grammar (one statement per line):

    # comment
    name = sag_test               top-level keys before the first section
    [plant]                       section header
    scr = 2.0                     key = value inside a section
    [events]
    time=0.5, kind=set_P_ref, value=1.0
    time=1.0, kind=grid_voltage_sag, value=0.05, duration=0.1

Sections: plant, controller, behavior, deepc, excitation, run, events.
"""
import logging
from pathlib import Path
from typing import Dict, List, Union

from pydantic import ValidationError

from app.errors import ScenarioFileError
from app.models.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

SECTIONS = ("plant", "controller", "behavior", "deepc", "excitation", "run", "events")
EVENT_KEYS = ("time", "kind", "value", "duration")


def _split_pair(text: str, lineno: int, sep: str = "=") -> tuple:
    if sep not in text:
        raise ScenarioFileError(f"line {lineno}: expected 'key {sep} value', got {text!r}")
    key, value = text.split(sep, 1)
    key, value = key.strip(), value.strip()
    if not key or not value:
        raise ScenarioFileError(f"line {lineno}: empty key or value in {text!r}")
    return key, value


def _parse_event(text: str, lineno: int) -> Dict[str, str]:
    event: Dict[str, str] = {}
    for part in text.split(","):
        key, value = _split_pair(part, lineno)
        if key not in EVENT_KEYS:
            raise ScenarioFileError(f"line {lineno}: unknown event key {key!r}")
        if key in event:
            raise ScenarioFileError(f"line {lineno}: duplicate event key {key!r}")
        event[key] = value
    missing = [k for k in ("time", "kind", "value") if k not in event]
    if missing:
        raise ScenarioFileError(f"line {lineno}: event is missing {missing}")
    return event


def parse_scenario_text(text: str) -> ScenarioConfig:
    data: Dict[str, Union[str, dict, list]] = {}
    events: List[Dict[str, str]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioFileError(f"line {lineno}: unterminated section header {line!r}")
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ScenarioFileError(f"line {lineno}: unknown section [{section}]")
            if section != "events":
                data.setdefault(section, {})
            continue
        if section == "events":
            events.append(_parse_event(line, lineno))
            continue
        key, value = _split_pair(line, lineno)
        target = data if section is None else data[section]
        if key in target:
            raise ScenarioFileError(f"line {lineno}: duplicate key {key!r}")
        target[key] = value
    data["events"] = events
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ScenarioFileError(f"invalid scenario: {e}") from e


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioFileError(f"cannot read scenario {path}: {e}") from e
    cfg = parse_scenario_text(text)
    logger.info("loaded scenario %r from %s (%d events)", cfg.name, path, len(cfg.events))
    return cfg


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_scenario(cfg: ScenarioConfig) -> str:
    data = cfg.model_dump(mode="json")
    lines = [f"name = {data['name']}"]
    for section in SECTIONS[:-1]:
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in data[section].items():
            if value is not None:
                lines.append(f"{key} = {_format(value)}")
    lines.append("")
    lines.append("[events]")
    for event in data["events"]:
        parts = [f"{k}={_format(event[k])}" for k in EVENT_KEYS if event.get(k) is not None]
        lines.append(", ".join(parts))
    return "\n".join(lines) + "\n"
