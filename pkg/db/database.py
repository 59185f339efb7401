"""Database connection and session management."""
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, scoped_session, sessionmaker
from sqlalchemy.pool import StaticPool

from config import get_config
from db.models import Base

_state = {'engine': None, 'sessions': None}


def _make_engine(url: str) -> Engine:
    if url.startswith('sqlite:///'):
        Path(url[len('sqlite:///'):]).parent.mkdir(parents=True, exist_ok=True)
    if url in ('sqlite://', 'sqlite:///:memory:'):
        # one shared connection so every session sees the same in-memory database
        return create_engine(url, echo=False, connect_args={"check_same_thread": False}, poolclass=StaticPool)
    return create_engine(url, echo=False, connect_args={"check_same_thread": False} if url.startswith('sqlite') else {})


def get_engine(url: Optional[str] = None) -> Engine:
    """Engine for ``url`` (default: the configured TIMING_DB_URL); tables are created on first use."""
    if _state['engine'] is None or url is not None:
        configure(url or get_config().DB_URL)
    return _state['engine']


def configure(url: str) -> Engine:
    """Point the registry at ``url``, replacing any existing engine."""
    if _state['sessions'] is not None:
        _state['sessions'].remove()
    engine = _make_engine(url)
    Base.metadata.create_all(bind=engine)
    _state['engine'] = engine
    _state['sessions'] = scoped_session(sessionmaker(autocommit=False, autoflush=False, bind=engine))
    return engine


@contextmanager
def get_session() -> Session:
    """
    Context manager for database sessions using scoped_session.

    Usage:
        with get_session() as session:
            session.query(...)
    """
    get_engine()
    session = _state['sessions']()
    try:
        yield session
        session.commit()
    except Exception as e:
        session.rollback()
        raise e
    finally:
        _state['sessions'].remove()
