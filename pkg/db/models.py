"""SQLAlchemy models for the run registry."""
from datetime import datetime, timezone

from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Index, Integer, String
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


def utc_now() -> datetime:
    """Naive UTC timestamp; the registry stores UTC without tzinfo."""
    return datetime.now(timezone.utc).replace(tzinfo=None)


class RunRecord(Base):
    """One CLI invocation (mirrors manifest.json in the run's output directory)."""
    __tablename__ = 'runs'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(64), nullable=False, unique=True)
    subcommand = Column(String(32), nullable=False)
    config_path = Column(String(1000), nullable=True)
    seed = Column(Integer, nullable=True)
    dataset_hash = Column(String(64), nullable=True)
    output_dir = Column(String(1000), nullable=False)
    model_name = Column(String(64), nullable=True)
    status = Column(String(16), nullable=False, default='running')  # 'running', 'completed', 'failed'
    settings = Column(JSON, nullable=True)
    error_message = Column(String(1000), nullable=True)
    started_at = Column(DateTime, default=utc_now, nullable=False)
    finished_at = Column(DateTime, nullable=True)

    metric_reports = relationship('MetricRecord', back_populates='run', cascade='all, delete-orphan')

    __table_args__ = (
        Index('idx_runs_subcommand_started', 'subcommand', 'started_at'),
    )

    def __repr__(self):
        return f"<RunRecord(run_id={self.run_id}, subcommand={self.subcommand}, status={self.status})>"


class MetricRecord(Base):
    """Precision at one bin count (plus RMSE) from one MetricReport."""
    __tablename__ = 'metric_reports'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_pk = Column(Integer, ForeignKey('runs.id'), nullable=False, index=True)
    model_id = Column(String(128), nullable=False)
    dataset_id = Column(String(64), nullable=True)
    num_bins = Column(Integer, nullable=False)
    precision = Column(Float, nullable=False)
    rmse = Column(Float, nullable=False)
    num_examples = Column(Integer, nullable=False)
    created_at = Column(DateTime, default=utc_now)

    run = relationship('RunRecord', back_populates='metric_reports')

    def __repr__(self):
        return f"<MetricRecord(model_id={self.model_id}, k={self.num_bins}, precision={self.precision:.4f})>"
