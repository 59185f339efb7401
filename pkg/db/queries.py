"""Database query helper functions for the run registry."""
from datetime import datetime
from typing import Any, Dict, List, Optional, TypedDict

from sqlalchemy import desc
from sqlalchemy.orm import Session

from db.models import MetricRecord, RunRecord, utc_now


class RunDict(TypedDict):
    run_id: str
    subcommand: str
    config_path: Optional[str]
    seed: Optional[int]
    dataset_hash: Optional[str]
    output_dir: str
    model_name: Optional[str]
    status: str
    started_at: str
    finished_at: Optional[str]


class MetricDict(TypedDict):
    run_id: str
    model_id: str
    dataset_id: Optional[str]
    num_bins: int
    precision: float
    rmse: float
    num_examples: int


class RunDataDict(TypedDict, total=False):
    run_id: str
    subcommand: str
    config_path: Optional[str]
    seed: Optional[int]
    dataset_hash: Optional[str]
    output_dir: str
    model_name: Optional[str]
    settings: Dict[str, Any]
    started_at: datetime


def _run_dict(run: RunRecord) -> RunDict:
    return {
        'run_id': run.run_id,
        'subcommand': run.subcommand,
        'config_path': run.config_path,
        'seed': run.seed,
        'dataset_hash': run.dataset_hash,
        'output_dir': run.output_dir,
        'model_name': run.model_name,
        'status': run.status,
        'started_at': run.started_at.isoformat(),
        'finished_at': run.finished_at.isoformat() if run.finished_at else None,
    }


def record_run(session: Session, data: RunDataDict) -> RunDict:
    """
    Insert a new run in 'running' state.

    Args:
        session: Database session
        data: Dict with keys run_id, subcommand, output_dir and optionally
            config_path, seed, dataset_hash, model_name, settings, started_at

    Returns:
        The stored run as a dict
    """
    run = RunRecord(
        run_id=data['run_id'],
        subcommand=data['subcommand'],
        config_path=str(data['config_path']) if data.get('config_path') else None,
        seed=data.get('seed'),
        dataset_hash=data.get('dataset_hash'),
        output_dir=str(data['output_dir']),
        model_name=data.get('model_name'),
        settings=data.get('settings'),
        status='running',
        started_at=data.get('started_at') or utc_now(),
    )
    session.add(run)
    session.flush()
    return _run_dict(run)


def get_run(session: Session, run_id: str) -> Optional[RunRecord]:
    return session.query(RunRecord).filter(RunRecord.run_id == run_id).first()


def finish_run(session: Session, run_id: str, success: bool, error_message: Optional[str] = None,
               dataset_hash: Optional[str] = None) -> Optional[RunDict]:
    """Mark a run completed or failed; returns None for unknown run ids."""
    run = get_run(session, run_id)
    if run is None:
        return None
    run.status = 'completed' if success else 'failed'
    run.finished_at = utc_now()
    if error_message:
        run.error_message = error_message[:1000]
    if dataset_hash:
        run.dataset_hash = dataset_hash
    session.flush()
    return _run_dict(run)


def insert_metric_report(session: Session, run_id: str, report) -> List[MetricDict]:
    """Store one row per bin count of a MetricReport."""
    run = get_run(session, run_id)
    if run is None:
        raise KeyError(f"Unknown run '{run_id}'")
    rows = []
    for k, precision in sorted(report.precision.items(), reverse=True):
        record = MetricRecord(
            run_pk=run.id,
            model_id=report.model_id,
            dataset_id=report.dataset_id or None,
            num_bins=int(k),
            precision=float(precision),
            rmse=float(report.rmse),
            num_examples=int(report.num_examples),
        )
        session.add(record)
        rows.append({'run_id': run_id, 'model_id': record.model_id, 'dataset_id': record.dataset_id,
                     'num_bins': record.num_bins, 'precision': record.precision, 'rmse': record.rmse,
                     'num_examples': record.num_examples})
    session.flush()
    return rows


def list_runs(session: Session, subcommand: Optional[str] = None, limit: Optional[int] = None) -> List[RunDict]:
    """Runs newest first, optionally filtered by subcommand."""
    query = session.query(RunRecord)
    if subcommand:
        query = query.filter(RunRecord.subcommand == subcommand)
    query = query.order_by(desc(RunRecord.started_at), desc(RunRecord.id))
    if limit:
        query = query.limit(limit)
    return [_run_dict(run) for run in query.all()]


def get_metric_reports(session: Session, run_id: str) -> List[MetricDict]:
    run = get_run(session, run_id)
    if run is None:
        return []
    records = (
        session.query(MetricRecord)
        .filter(MetricRecord.run_pk == run.id)
        .order_by(desc(MetricRecord.num_bins), MetricRecord.id)
        .all()
    )
    return [
        {'run_id': run_id, 'model_id': r.model_id, 'dataset_id': r.dataset_id, 'num_bins': r.num_bins,
         'precision': r.precision, 'rmse': r.rmse, 'num_examples': r.num_examples}
        for r in records
    ]
