"""JSON-lines event log for training runs, sweeps and CLI lifecycle."""
import json
import logging
from contextlib import contextmanager
from logging.handlers import QueueHandler, QueueListener, RotatingFileHandler
from typing import Iterator

from config import get_config

EVENTS_LOGGER = "timing_matters.events"


def get_run_logger() -> logging.Logger:
    logger = logging.getLogger(EVENTS_LOGGER)
    if logger.handlers:
        return logger
    logger.setLevel(logging.INFO)
    logger.propagate = False
    log_path = get_config().RUN_LOG_PATH
    log_path.parent.mkdir(parents=True, exist_ok=True)
    handler = RotatingFileHandler(log_path, maxBytes=5_000_000, backupCount=5, encoding="utf-8")
    formatter = logging.Formatter('%(message)s')
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    return logger


def attach_queue(queue) -> None:
    """
    Pool initializer: send this process's events to ``queue`` instead of the log file.

    Only the parent's ``forwarded_events`` listener writes the rotating file.
    """
    logger = logging.getLogger(EVENTS_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    logger.addHandler(QueueHandler(queue))


@contextmanager
def forwarded_events(queue) -> Iterator[QueueListener]:
    """Drain worker events from ``queue`` into the parent's event-log handlers."""
    listener = QueueListener(queue, *get_run_logger().handlers)
    listener.start()
    try:
        yield listener
    finally:
        listener.stop()


def jlog(logger: logging.Logger, payload: dict) -> None:
    try:
        logger.info(json.dumps(payload, ensure_ascii=False, default=str))
    except Exception:
        logger.info(str(payload))
