"""
Logging setup shared by the command-line tools and library users.

One root handler is installed per process, either on stdout or on a log file. Library modules
only create module-level loggers and never configure handlers themselves.

Example:
    >>> from predictive_planner.config import setup_logging
    >>> setup_logging('DEBUG', output_file='train_irl.log')
    >>> logging.getLogger('predictive_planner.irl').info('step 50: nll 1.234')
    2024-01-01 12:00:00 - INFO - step 50: nll 1.234

Records are formatted as ``<timestamp> - <LEVEL> - <message>`` with second resolution.
"""

import logging
import sys
from typing import Optional, Union


LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def _resolve_level(log_level: Optional[Union[int, str]]) -> int:
    if log_level is None:
        return logging.INFO
    if isinstance(log_level, int):
        return log_level
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        raise ValueError(f'unknown log level {log_level!r}')
    return level


def setup_logging(log_level: Optional[Union[int, str]] = None, output_file: Optional[str] = None) -> None:
    """
    Install the toolkit's root handler, replacing any handlers already present.

    Args:
        log_level: Level as a number or a name such as 'DEBUG'; INFO when omitted
        output_file: Log file path; stdout when omitted

    Raises:
        ValueError: If ``log_level`` names no logging level
    """
    level = _resolve_level(log_level)

    root = logging.getLogger()
    for existing in root.handlers[:]:
        root.removeHandler(existing)
        if isinstance(existing, logging.FileHandler):
            existing.close()

    handler = logging.FileHandler(output_file) if output_file else logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
