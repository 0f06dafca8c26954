from apscheduler.schedulers.background import BackgroundScheduler
from apscheduler.triggers.date import DateTrigger
from datetime import datetime, timezone
from typing import Optional
import logging
import uuid

from app.config.scenario_file import dump_scenario
from app.errors import ScenarioAbortedError
from app.harness.metrics import scenario_metrics
from app.harness.scenario import ScenarioRunner
from app.models.job import JobStatus, ScenarioJob
from app.models.scenario import ScenarioConfig
from app.storage.storage_manager import StorageManager, storage_manager

logger = logging.getLogger(__name__)


class JobManager:
    """Runs scenarios in the background and tracks their status"""

    def __init__(self, storage: Optional[StorageManager] = None, start: bool = True):
        self.storage = storage or storage_manager
        self.scheduler = BackgroundScheduler()
        if start:
            self.scheduler.start()

    def execute(self, job_id: str, cfg: ScenarioConfig):
        """Run one scenario and persist its record and metrics"""
        self.storage.update_job_status(job_id, JobStatus.RUNNING.value)
        out = self.storage.run_dir(job_id)
        record_path = out / "record.csv"
        try:
            record = ScenarioRunner(cfg).run()
            metrics = scenario_metrics(cfg, record)
            status, error = JobStatus.COMPLETED, None
        except ScenarioAbortedError as e:
            record = e.record
            metrics = scenario_metrics(cfg, record, error=str(e))
            status, error = JobStatus.FAILED, str(e)
        except Exception as e:
            logger.exception("scenario job %s failed", job_id)
            self.storage.update_job_status(
                job_id,
                JobStatus.FAILED.value,
                error_message=str(e),
                finished_at=datetime.now(timezone.utc).isoformat(),
            )
            return
        record.to_csv(record_path)
        metrics_path = self.storage.save_metrics(job_id, metrics.model_dump(mode="json"))
        self.storage.update_job_status(
            job_id,
            status.value,
            error_message=error,
            record_path=str(record_path),
            metrics_path=str(metrics_path),
            finished_at=datetime.now(timezone.utc).isoformat(),
        )
        logger.info("scenario job %s %s (%d steps)", job_id, status.value, record.steps)

    def submit(self, cfg: ScenarioConfig, run_date: Optional[datetime] = None) -> ScenarioJob:
        """Register a job and schedule its run (immediately unless run_date is given)"""
        job_id = str(uuid.uuid4())
        job = ScenarioJob(
            job_id=job_id,
            scenario_name=cfg.name,
            controller_kind=cfg.controller.kind.value,
            status=JobStatus.PENDING,
            created_at=datetime.now(timezone.utc),
            metadata={"events": len(cfg.events), "duration": cfg.run.duration},
        )
        self.storage.save_job(job_id, job.model_dump(mode="json"))
        (self.storage.run_dir(job_id) / "scenario.cfg").write_text(dump_scenario(cfg), encoding="utf-8")

        self.scheduler.add_job(
            self.execute,
            trigger=DateTrigger(run_date=run_date or datetime.now(timezone.utc)),
            args=[job_id, cfg],
            id=job_id,
            replace_existing=True
        )
        return job

    def get_job_status(self, job_id: str) -> Optional[dict]:
        """Get status of a scenario job"""
        job = self.storage.get_job(job_id)
        if not job:
            return None

        scheduled_job = self.scheduler.get_job(job_id)
        if scheduled_job:
            job["scheduled"] = True
            next_run = getattr(scheduled_job, "next_run_time", None)
            job["next_run_time"] = next_run.isoformat() if next_run else None
        else:
            job["scheduled"] = False

        return job

    def shutdown(self):
        if self.scheduler.running:
            self.scheduler.shutdown(wait=False)


job_manager = JobManager()
