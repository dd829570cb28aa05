"""
Logging configuration for hexloop
Logs go to stderr; stdout is reserved for JSON reports
"""
import logging
import sys
from typing import Optional

LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(run)s | %(name)s | %(message)s'


class RunContextFilter(logging.Filter):
    """Stamp every record with the running subcommand ('-' outside a run)"""

    def __init__(self, run: Optional[str] = None):
        super().__init__()
        self.run = run or "-"

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "run"):
            record.run = self.run
        return True


def setup_logging(log_level: str = "INFO", run: Optional[str] = None) -> None:
    """
    Configure the root logger

    Args:
        log_level: DEBUG, INFO, WARNING or ERROR (unknown names fall back to INFO)
        run: label stamped on every record, usually the CLI subcommand
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
    handler.addFilter(RunContextFilter(run))

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers = [handler]

    # numpy / scipy RuntimeWarnings (polyfit conditioning, overflow in weights) land in the log
    logging.captureWarnings(True)

    logging.getLogger('matplotlib').setLevel(logging.WARNING)
    logging.getLogger('PIL').setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
