"""
Mini-batch training loop and the append-only training log.

The loop publishes TrainingEvent notifications; the log writer and the
command line's checkpoint writer are subscribers.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from src.core.tensor import Tape
from src.data.segment import Segment
from src.entities.model import AnticipationModel
from src.pipeline.anticipation import (
    BatchLabels, anticipation_loss, forward_batch, usable_segments
)
from src.pipeline.metrics import EvalReport, evaluate
from src.pipeline.optim import Optimizer, build_optimizer, learning_rate
from src.utils.config import RunConfig
from src.utils.errors import ContractError, DivergenceError
from src.utils.event_handler import EventHandler, TrainingEvent
from src.utils.logger_config import get_logger

logger = get_logger(__name__)


class TrainingLog:
    """
    Plain-text training record:

        epoch,step,loss,lr
        eval,<interval>,<metric>,<value>

    Lines are kept in memory and, when a path is given, appended to that file
    as they arrive.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.path = Path(path) if path is not None else None
        self.lines: List[str] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def subscribe(self, events: EventHandler) -> "TrainingLog":
        events.add_handler(TrainingEvent.STEP_END, self.on_step_end)
        events.add_handler(TrainingEvent.EVAL_COMPLETE, self.on_eval_complete)
        return self

    def write(self, line: str) -> None:
        self.lines.append(line)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def on_step_end(self, epoch: int, step: int, loss: float, lr: float, **_) -> None:
        self.write(f"{epoch},{step},{loss:.9g},{lr:.9g}")

    def on_eval_complete(self, report: EvalReport, **_) -> None:
        for entry in report.intervals:
            for name in report.metric_names:
                self.write(f"eval,{entry.interval_s:.9g},{name},{entry.values[name]:.9g}")


@dataclass
class TrainingResult:
    steps: int
    epochs: int
    losses: List[float] = field(default_factory=list)
    reports: List[EvalReport] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def steps_per_epoch(num_segments: int, config: RunConfig) -> int:
    return math.ceil(num_segments / config.train.batch_size)


def plan_steps(num_segments: int, config: RunConfig) -> int:
    """Total optimizer steps the schedule anneals over"""
    total = steps_per_epoch(num_segments, config) * config.train.epochs
    if config.train.max_steps > 0:
        total = min(total, config.train.max_steps)
    return total


def train(model: AnticipationModel, dataset: Sequence[Segment], config: RunConfig,
          events: Optional[EventHandler] = None, val_set: Optional[Sequence[Segment]] = None,
          optimizer: Optional[Optimizer] = None, start_step: int = 0) -> TrainingResult:
    """
    Train the model in place

    Each epoch visits the usable segments in an order drawn from (run.seed, epoch);
    every batch runs one taped forward pass, one backward pass and one optimizer
    step at the scheduled learning rate. A run resumed at `start_step` continues
    in the epoch and batch that step belongs to.

    Args:
        model: Model to train
        dataset: Training segments
        config: Run configuration (optim, train, anticipation and run sections)
        events: Optional event handler to publish progress on
        val_set: Optional segments evaluated after every epoch
        optimizer: Optional optimizer, e.g. restored from a checkpoint
        start_step: Step counter to continue from; train.epochs counts from step 0

    Returns:
        TrainingResult: Loss per step and evaluation reports per epoch

    Raises:
        DivergenceError: The loss became NaN or infinite
    """
    cfg = config.anticipation
    segments = usable_segments(dataset, cfg)
    if not segments:
        raise ContractError("training needs at least one usable segment")
    events = events or EventHandler()
    params = model.named_parameters()
    optimizer = optimizer or build_optimizer(config.optim, params)
    total_steps = plan_steps(len(segments), config)
    batch_size = config.train.batch_size
    workers = 1 if config.run.deterministic else config.train.eval_workers

    per_epoch = steps_per_epoch(len(segments), config)
    start_epoch, skip_batches = divmod(start_step, per_epoch)

    result = TrainingResult(steps=start_step, epochs=start_epoch)
    events.trigger(TrainingEvent.RUN_START, model=model, total_steps=total_steps)
    logger.info(f"Training on {len(segments)} segments for {config.train.epochs} epochs "
                f"({total_steps} steps, batch {batch_size})")

    step = start_step
    if start_step:
        logger.info(f"Resuming at step {start_step} (epoch {start_epoch}, batch {skip_batches})")
    for epoch in range(start_epoch, config.train.epochs):
        if step >= total_steps:
            break
        events.trigger(TrainingEvent.EPOCH_START, epoch=epoch)
        order = np.random.default_rng([config.run.seed, epoch]).permutation(len(segments))
        first = skip_batches * batch_size if epoch == start_epoch else 0
        epoch_losses = []
        for start in range(first, len(order), batch_size):
            if step >= total_steps:
                break
            batch = [segments[i] for i in order[start:start + batch_size]]
            lr = learning_rate(step, total_steps, config.optim.lr, config.optim.min_lr,
                               config.optim.anneal_fraction)
            optimizer.zero_grad()
            with Tape() as tape:
                loss = anticipation_loss(forward_batch(model, batch, cfg),
                                         BatchLabels.from_segments(batch))
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(step, value)
            tape.backward(loss)
            optimizer.step(lr)
            epoch_losses.append(value)
            result.losses.append(value)
            events.trigger(TrainingEvent.STEP_END, epoch=epoch, step=step, loss=value, lr=lr)
            logger.debug(f"epoch {epoch} step {step}: loss {value:.6f}, lr {lr:.3g}")
            step += 1

        result.epochs = epoch + 1
        result.steps = step
        mean_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
        logger.info(f"Epoch {epoch} finished: mean loss {mean_loss:.6f}")
        events.trigger(TrainingEvent.EPOCH_END, epoch=epoch, step=step, loss=mean_loss,
                       model=model, optimizer=optimizer)
        if val_set:
            report = evaluate(model, val_set, cfg, batch_size=max(batch_size, 32), workers=workers)
            result.reports.append(report)
            events.trigger(TrainingEvent.EVAL_COMPLETE, epoch=epoch, report=report)

    events.trigger(TrainingEvent.RUN_END, result=result, model=model, optimizer=optimizer)
    return result
