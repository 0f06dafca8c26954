from fastapi import APIRouter, HTTPException, status, UploadFile, File
from app.config.scenario_file import parse_scenario_text
from app.errors import ScenarioFileError
from app.scheduler.job_manager import job_manager

router = APIRouter(prefix="/api/scenarios", tags=["scenarios"])


@router.post("/run", status_code=status.HTTP_202_ACCEPTED)
async def run_scenario_file(file: UploadFile = File(...)):
    """Upload a scenario file and run it in the background"""
    content = await file.read()
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="Scenario file must be UTF-8 text"
        )

    try:
        cfg = parse_scenario_text(text)
    except ScenarioFileError as e:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail=str(e)
        )

    job = job_manager.submit(cfg)
    return job.model_dump(mode="json")


@router.get("/jobs")
async def list_jobs():
    """List all scenario jobs, newest first"""
    return {"jobs": job_manager.storage.list_jobs()}


@router.get("/jobs/{job_id}")
async def get_job(job_id: str):
    """Get the status of one scenario job"""
    job = job_manager.get_job_status(job_id)
    if not job:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail="Job not found"
        )
    return job


@router.get("/jobs/{job_id}/metrics")
async def get_job_metrics(job_id: str):
    """Get the metrics of a finished scenario job"""
    if not job_manager.storage.get_job(job_id):
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail="Job not found"
        )
    metrics = job_manager.storage.get_metrics(job_id)
    if metrics is None:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail="Metrics not available yet"
        )
    return metrics
