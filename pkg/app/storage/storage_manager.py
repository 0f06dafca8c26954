import json
from typing import Dict, List, Any, Optional
from pathlib import Path
from app.config.settings import settings


class StorageManager:
    """Manages JSON-based storage of scenario jobs and their run outputs"""

    def __init__(self, storage_dir: Optional[str] = None):
        self.storage_dir = Path(storage_dir or settings.storage_dir)
        self.storage_dir.mkdir(parents=True, exist_ok=True)

        if storage_dir is None:
            self.runs_dir = Path(settings.runs_dir)
            self.jobs_file = Path(settings.jobs_file)
        else:
            self.runs_dir = self.storage_dir / "runs"
            self.jobs_file = self.storage_dir / "scenario_jobs.json"

        self._ensure_files_exist()

    def _ensure_files_exist(self):
        """Create the jobs file and runs directory if they don't exist"""
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        if not self.jobs_file.exists():
            self._write_json(self.jobs_file, {})

    def _read_json(self, file_path: Path) -> Dict[str, Any]:
        """Read JSON file"""
        if not file_path.exists():
            return {}
        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def _write_json(self, file_path: Path, data: Dict[str, Any]):
        """Write JSON file"""
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False, default=str)

    # Job operations
    def get_jobs(self) -> Dict[str, Any]:
        """Get all scenario jobs"""
        return self._read_json(self.jobs_file)

    def list_jobs(self) -> List[Dict[str, Any]]:
        """Jobs ordered by creation time, newest first"""
        jobs = self.get_jobs()
        return sorted(jobs.values(), key=lambda job: job.get('created_at', ''), reverse=True)

    def save_job(self, job_id: str, job_data: Dict[str, Any]):
        """Save or update job"""
        jobs = self.get_jobs()
        jobs[job_id] = job_data
        self._write_json(self.jobs_file, jobs)

    def get_job(self, job_id: str) -> Optional[Dict[str, Any]]:
        """Get job by ID"""
        jobs = self.get_jobs()
        return jobs.get(job_id)

    def update_job_status(self, job_id: str, status: str, error_message: Optional[str] = None, **fields):
        """Update job status and any extra fields (paths, finish time)"""
        jobs = self.get_jobs()
        if job_id in jobs:
            jobs[job_id]['status'] = status
            if error_message:
                jobs[job_id]['error_message'] = error_message
            for key, value in fields.items():
                if value is not None:
                    jobs[job_id][key] = value
            self._write_json(self.jobs_file, jobs)

    # Run output operations
    def run_dir(self, job_id: str) -> Path:
        """Directory holding record.csv, metrics.json and scenario.cfg of a job"""
        path = self.runs_dir / job_id
        path.mkdir(parents=True, exist_ok=True)
        return path

    def save_metrics(self, job_id: str, metrics: Dict[str, Any]) -> Path:
        path = self.run_dir(job_id) / "metrics.json"
        self._write_json(path, metrics)
        return path

    def get_metrics(self, job_id: str) -> Optional[Dict[str, Any]]:
        path = self.runs_dir / job_id / "metrics.json"
        if not path.exists():
            return None
        return self._read_json(path)


storage_manager = StorageManager()
