from pydantic import BaseModel
from typing import Optional, Dict, Any
from datetime import datetime
from enum import Enum


class JobStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class ScenarioJob(BaseModel):
    job_id: str
    scenario_name: str
    controller_kind: str
    status: JobStatus
    created_at: datetime
    finished_at: Optional[datetime] = None
    record_path: Optional[str] = None
    metrics_path: Optional[str] = None
    error_message: Optional[str] = None
    metadata: Optional[Dict[str, Any]] = None
