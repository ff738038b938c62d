"""
Logging setup shared by the library and the command line.

Library modules only ever call `get_logger(__name__)`; handlers are installed
once, by the command line, through `RunLogger.initialize`. Console output goes
to stderr so that stdout carries nothing but command results.
"""

import contextlib
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, Optional, Union

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(threadName)s %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

LOG_LEVELS = {name: getattr(logging, name) for name in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")}


def parse_level(level: str) -> Optional[int]:
    return LOG_LEVELS.get(level.upper())


class StderrHandler(logging.StreamHandler):
    """Writes to whatever sys.stderr is when a record is emitted"""

    def __init__(self):
        super().__init__(sys.stderr)

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _value):
        pass


class RunLogger:
    """Owns the root handlers of one process"""

    def __init__(self, log_dir: Union[str, Path] = "logs"):
        self.loggers: Dict[str, logging.Logger] = {}
        self.log_dir = Path(log_dir)
        self.initialized = False
        self._formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)

    def initialize(self, log_level: str = 'INFO',
                   log_to_file: bool = False,
                   log_to_console: bool = True,
                   log_dir: Optional[Union[str, Path]] = None) -> None:
        """
        Install handlers on the root logger

        Handlers are installed on the first call only; later calls just apply
        `log_level`, so one process can run several commands.

        Args:
            log_level: Level name for the root logger
            log_to_file: Also write a timestamped `run_<time>.log` under log_dir
            log_to_console: Write to stderr
            log_dir: Directory for the timestamped file
        """
        if self.initialized:
            self.set_level(log_level)
            return

        if log_dir is not None:
            self.log_dir = Path(log_dir)
        root = logging.getLogger()
        root.setLevel(parse_level(log_level) or logging.INFO)
        if log_to_console:
            console = StderrHandler()
            console.setFormatter(self._formatter)
            root.addHandler(console)
        if log_to_file:
            self.add_file_handler(f"run_{datetime.now():%Y%m%d_%H%M%S}.log")
        self.initialized = True
        self.get_logger("system").debug(
            f"Logging at {log_level} (console={log_to_console}, file={log_to_file})")

    def get_logger(self, name: str) -> logging.Logger:
        if name not in self.loggers:
            self.loggers[name] = logging.getLogger(name)
        return self.loggers[name]

    def set_level(self, level: str, logger_name: Optional[str] = None) -> None:
        """Set the root level, or one logger's level; unknown names are ignored"""
        value = parse_level(level)
        if value is None:
            return
        if logger_name is None:
            logging.getLogger().setLevel(value)
        elif logger_name in self.loggers:
            self.loggers[logger_name].setLevel(value)

    def add_file_handler(self, filename: Union[str, Path],
                         level: Optional[str] = None) -> logging.Handler:
        """
        Attach a file handler to the root logger

        Args:
            filename: Log file; relative names resolve against log_dir
            level: Optional handler level

        Returns:
            Handler: The handler, for `remove_handler`
        """
        path = Path(filename)
        if not path.is_absolute():
            path = self.log_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(path, encoding="utf-8")
        handler.setFormatter(self._formatter)
        value = parse_level(level) if level else None
        if value is not None:
            handler.setLevel(value)
        logging.getLogger().addHandler(handler)
        return handler

    def remove_handler(self, handler: logging.Handler) -> None:
        logging.getLogger().removeHandler(handler)
        handler.close()

    @contextlib.contextmanager
    def run_log(self, path: Union[str, Path], level: Optional[str] = None) -> Iterator[Path]:
        """Copy everything logged inside the block to `path`"""
        path = Path(path).resolve()
        handler = self.add_file_handler(path, level)
        try:
            yield path
        finally:
            self.remove_handler(handler)


_logger_manager: Optional[RunLogger] = None


def get_logger_manager() -> RunLogger:
    """Get or create the process-wide manager"""
    global _logger_manager
    if _logger_manager is None:
        _logger_manager = RunLogger()
    return _logger_manager


def get_logger(name: str) -> logging.Logger:
    return get_logger_manager().get_logger(name)
