"""
Event handling utility module connecting the trainer to its observers.
"""

from typing import Dict, List, Callable, Any
from enum import Enum, auto

from src.utils.logger_config import get_logger

logger = get_logger(__name__)


class TrainingEvent(Enum):
    """Training lifecycle event types"""
    RUN_START = auto()
    EPOCH_START = auto()
    STEP_END = auto()
    EPOCH_END = auto()
    EVAL_COMPLETE = auto()
    CHECKPOINT_SAVED = auto()
    RUN_END = auto()


class EventHandler:
    """Dispatches training events to registered callbacks in registration order"""

    def __init__(self):
        self._handlers: Dict[TrainingEvent, List[Callable[..., Any]]] = {}

    def add_handler(self, event_type: TrainingEvent, handler: Callable[..., Any]) -> None:
        """
        Add a handler for an event

        Args:
            event_type: Event type
            handler: Callback receiving the event's keyword arguments
        """
        self._handlers.setdefault(event_type, []).append(handler)

    def remove_handler(self, event_type: TrainingEvent, handler: Callable[..., Any]) -> None:
        """Remove an event handler"""
        if event_type in self._handlers:
            try:
                self._handlers[event_type].remove(handler)
            except ValueError:
                pass

    def handler_count(self, event_type: TrainingEvent) -> int:
        """Number of handlers registered for an event"""
        return len(self._handlers.get(event_type, []))

    def trigger(self, event_type: TrainingEvent, **kwargs: Any) -> None:
        """
        Trigger an event

        Args:
            event_type: Type of event to trigger
            **kwargs: Data passed to handlers
        """
        for handler in list(self._handlers.get(event_type, [])):
            try:
                handler(**kwargs)
            except Exception as e:
                logger.error(f"Error in {event_type.name} handler: {e}")
