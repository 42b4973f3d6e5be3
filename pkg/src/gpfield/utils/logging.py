"""Logging configuration for gpfield."""

import logging
import sys
from typing import Any, Dict, Optional

from pythonjsonlogger import jsonlogger

from gpfield import __version__


class ToolkitJsonFormatter(jsonlogger.JsonFormatter):
    """
    JSON formatter that stamps every record with run context.

    Records carry the package version and emitting module, plus the CLI
    command and random seed of the run when known.
    """

    def __init__(
        self, *args: Any, command: Optional[str] = None, seed: Optional[int] = None, **kwargs: Any
    ):
        super().__init__(*args, **kwargs)
        self.command = command
        self.seed = seed

    def add_fields(
        self, log_record: Dict[str, Any], record: logging.LogRecord, message_dict: Dict[str, Any]
    ) -> None:
        super().add_fields(log_record, record, message_dict)
        log_record["toolkit"] = "gpfield"
        log_record["version"] = __version__
        log_record["module"] = record.module
        if self.command is not None:
            log_record.setdefault("command", self.command)
        if self.seed is not None:
            log_record.setdefault("seed", self.seed)


def setup_logging(
    level: str = "WARNING",
    format_type: str = "text",
    log_file: Optional[str] = None,
    command: Optional[str] = None,
    seed: Optional[int] = None,
) -> None:
    """
    Configure toolkit logging.

    Console output goes to stderr; stdout is reserved for command results.

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        format_type: Format ('json' or 'text')
        log_file: Optional log file path
        command: CLI subcommand recorded on JSON records
        seed: Random seed recorded on JSON records
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level.upper()))
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)

    formatter: logging.Formatter
    if format_type == "json":
        formatter = ToolkitJsonFormatter(
            "%(asctime)s %(name)s %(levelname)s %(message)s",
            timestamp=True,
            command=command,
            seed=seed,
        )
    else:
        prefix = f"[{command}] " if command else ""
        formatter = logging.Formatter(
            f"%(asctime)s - %(name)s - %(levelname)s - {prefix}%(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )

    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    logging.getLogger(__name__).debug(
        f"Logging configured: level={level}, format={format_type}, command={command}"
    )
