"""Console logger shared by the data, training and CLI layers."""
import logging
import sys
from typing import Optional

LOGGER_NAME = 'timing_matters'
LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'


class AppLogger:
    """
    Singleton wrapper around the ``timing_matters`` logger.

    Messages of the domain helpers read ``<Kind> <operation> [<subject>] - STATUS: details``
    so data loads, training runs and CLI failures grep the same way.
    """

    _instance: Optional['AppLogger'] = None
    _logger: Optional[logging.Logger] = None

    def __new__(cls) -> 'AppLogger':
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._logger is None:
            self._configure()

    def _configure(self) -> None:
        from config import get_config

        logger = logging.getLogger(LOGGER_NAME)
        logger.handlers.clear()
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
        logger.addHandler(handler)
        logger.propagate = False
        self._logger = logger
        self.set_level(get_config().LOG_LEVEL)

    def set_level(self, level: str) -> None:
        numeric = getattr(logging, str(level).upper(), logging.INFO)
        self._logger.setLevel(numeric)
        for handler in self._logger.handlers:
            handler.setLevel(numeric)

    @property
    def logger(self) -> logging.Logger:
        return self._logger

    def info(self, message: str) -> None:
        self._logger.info(message)

    def warning(self, message: str) -> None:
        self._logger.warning(message)

    def error(self, message: str) -> None:
        self._logger.error(message)

    def debug(self, message: str) -> None:
        self._logger.debug(message)

    def _report(self, kind: str, operation: str, subject: Optional[str], success: bool,
                details: Optional[str]) -> None:
        message = f"{kind} {operation}"
        if subject:
            message += f" [{subject}]"
        message += f" - {'SUCCESS' if success else 'FAILED'}"
        if details:
            message += f": {details}"
        self._logger.log(logging.INFO if success else logging.ERROR, message)

    def log_data_operation(self, operation: str, success: bool, details: Optional[str] = None) -> None:
        """Dataset loads, generation and re-windowing."""
        self._report('Data', operation, None, success, details)

    def log_training_operation(self, operation: str, model_id: str, success: bool,
                               details: Optional[str] = None) -> None:
        """Training and evaluation of one model."""
        self._report('Model', operation, model_id, success, details)

    def log_command_failure(self, command: str, error: BaseException) -> None:
        """A CLI subcommand that ended with an error exit code."""
        self._report('Command', command, type(error).__name__, False, str(error))


def get_app_logger() -> AppLogger:
    return AppLogger()
