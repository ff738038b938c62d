"""
One-parameter sweeps: train a fresh model per value of a configuration key
and score it on held-out segments at a single anticipation interval.
"""

from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

from src.data.segment import Segment
from src.entities.model import AnticipationModel, build_model, count_parameters
from src.pipeline.metrics import evaluate
from src.pipeline.trainer import train
from src.utils.config import RunConfig
from src.utils.constants import REPORT_INTERVAL_S, TOP_K
from src.utils.errors import ConfigError
from src.utils.event_handler import EventHandler
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

SWEEP_METRIC = f"action_top{TOP_K}"


@dataclass
class SweepPoint:
    key: str
    value: Any
    parameters: int
    steps: int
    final_loss: float
    score: float
    k: int


def sweep(train_set: Sequence[Segment], val_set: Sequence[Segment], config: RunConfig,
          key: str, values: Sequence[Any], interval_s: float = REPORT_INTERVAL_S,
          on_model: Optional[Callable[[RunConfig, AnticipationModel, SweepPoint], None]] = None,
          workers: int = 1) -> List[SweepPoint]:
    """
    Train and score one model per value

    Every model starts from run.seed, so points differ only in `key`. All values
    are validated before the first model trains.

    Args:
        train_set: Training segments
        val_set: Scored segments
        config: Base configuration, left unchanged
        key: Dotted configuration key to vary, e.g. 'edges.bank_size'
        values: Values for `key`, in report order
        interval_s: Anticipation interval the score is read at
        on_model: Called with each trained model and its point, e.g. to save a checkpoint
        workers: Threads for evaluation

    Returns:
        List[SweepPoint]: Action top-k accuracy per value

    Raises:
        ConfigError: A value is invalid for `key`, or interval_s is not evaluated
    """
    if not values:
        raise ConfigError("sweep needs at least one value", key)
    if not any(abs(tau - interval_s) < 1e-9 for tau in config.anticipation.intervals_s):
        raise ConfigError(f"sweeps report at {interval_s:g} s, which is not an interval",
                          "anticipation.intervals_s")
    configs = []
    for value in values:
        point_config = config.copy()
        point_config.set(key, value)
        configs.append(point_config.validate())

    points = []
    for value, point_config in zip(values, configs):
        model = build_model(point_config)
        logger.info(f"Sweep {key} = {value}: {count_parameters(model)} parameters")
        result = train(model, train_set, point_config, EventHandler())
        report = evaluate(model, val_set, point_config.anticipation, workers=workers)
        point = SweepPoint(key, point_config.get(key), count_parameters(model), result.steps,
                           result.final_loss, report.value(interval_s, SWEEP_METRIC),
                           report.k["action"])
        if on_model is not None:
            on_model(point_config, model, point)
        points.append(point)
        logger.info(f"Sweep {key} = {value}: {SWEEP_METRIC} {point.score:.4f} "
                    f"at {interval_s:g} s")
    return points
