from typing import Dict, List, Optional

from pydantic import BaseModel


class ChannelMetrics(BaseModel):
    steady_state_error: float
    settling_time: float
    overshoot: float


class EventWindowMetrics(BaseModel):
    kind: str
    start: float
    end: float
    channels: Dict[str, ChannelMetrics]
    peak_dw: float
    violations: int


class Metrics(BaseModel):
    steps: int
    windows: List[EventWindowMetrics]
    peak_dw: float
    violations: int
    aborted: bool = False
    error_message: Optional[str] = None
