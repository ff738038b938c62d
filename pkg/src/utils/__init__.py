"""
Utilities package.

This package provides the infrastructure shared by the engine, the model and
the command line.

Modules:
    constants.py: Defaults, protocol constants, file magics and exit codes
    config.py: Typed run configuration and its text format
    errors.py: Exception hierarchy
    event_handler.py: Training lifecycle events
    logger_config.py: Logging setup and configuration
    binary_io.py: Little-endian readers and writers
    checkpoint.py: Checkpoint persistence

Classes:
    RunConfig: Configuration sections for one run
    EventHandler: Dispatches training events to callbacks
    RunLogger: Configures and manages logging

Usage Example:
    ```python
    from src.utils.config import RunConfig
    from src.utils.logger_config import get_logger

    config = RunConfig.load("run.cfg").validate()
    logger = get_logger(__name__)
    logger.info("Configuration loaded")
    ```
"""

from .config import RunConfig
from .errors import (
    ConfigError, ContractError, DimensionError, DivergenceError, ParseError,
    SegmentTooEarlyError, URMError
)
from .event_handler import EventHandler, TrainingEvent
from .logger_config import RunLogger, get_logger

__all__ = [
    'RunConfig',
    'ConfigError', 'ContractError', 'DimensionError', 'DivergenceError', 'ParseError',
    'SegmentTooEarlyError', 'URMError',
    'EventHandler', 'TrainingEvent',
    'RunLogger', 'get_logger'
]
