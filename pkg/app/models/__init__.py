from .scenario import ControllerKind, EventKind, Event, ScenarioConfig
from .metrics import ChannelMetrics, EventWindowMetrics, Metrics
from .job import ScenarioJob, JobStatus

__all__ = [
    "ControllerKind",
    "EventKind",
    "Event",
    "ScenarioConfig",
    "ChannelMetrics",
    "EventWindowMetrics",
    "Metrics",
    "ScenarioJob",
    "JobStatus",
]
