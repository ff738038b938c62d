"""
The anticipation protocol: which frames a prediction may see, the forward pass
over a segment or batch, and the loss summed over anticipation intervals.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.core import functional as F
from src.core.tensor import Tensor, dtype_for
from src.data.segment import Segment
from src.entities.cell import run_sequence
from src.entities.model import AnticipationModel, classify
from src.utils.config import AnticipationConfig
from src.utils.errors import ContractError, DimensionError, SegmentTooEarlyError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class SamplingPlan:
    """
    Observed frames of one segment.

    `times[k]` is the time of step k; `interval_steps[i]` is the step whose
    readout answers `intervals[i]` seconds before the action.
    """
    times: Tuple[float, ...]
    indices: Tuple[int, ...]
    intervals: Tuple[float, ...]
    interval_steps: Tuple[int, ...]


@dataclass
class IntervalLogits:
    interval_s: float
    step: int
    verb: Tensor
    noun: Tensor
    action: Tensor


@dataclass
class BatchLabels:
    verb: np.ndarray
    noun: np.ndarray
    action: np.ndarray

    @classmethod
    def from_segments(cls, segments: Sequence[Segment]) -> "BatchLabels":
        return cls(np.array([s.verb for s in segments], dtype=np.int64),
                   np.array([s.noun for s in segments], dtype=np.int64),
                   np.array([s.action for s in segments], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.verb)


def interval_steps(cfg: AnticipationConfig) -> List[int]:
    """Step answering each interval: the frame at t_s - τ"""
    return [cfg.num_frames - int(round(tau / cfg.stride_s)) for tau in cfg.intervals_s]


def frame_indices(cfg: AnticipationConfig, t_start_s: float, fps: float) -> SamplingPlan:
    """
    Observed frame times t_s - num_frames·stride ... t_s - stride

    Args:
        cfg: Sampling settings
        t_start_s: Action start in seconds
        fps: Frame rate of the recording

    Returns:
        SamplingPlan: Frame times, frame indices and the interval steps

    Raises:
        SegmentTooEarlyError: The first observed time would precede the recording
    """
    first = t_start_s - cfg.num_frames * cfg.stride_s
    if first < -_FLOOR_SLACK:
        raise SegmentTooEarlyError(
            f"observation starts at {first:.3f} s, before the recording (t_s={t_start_s} s)")
    times = tuple(t_start_s - (cfg.num_frames - k) * cfg.stride_s for k in range(cfg.num_frames))
    indices = tuple(int(math.floor(t * fps + _FLOOR_SLACK)) for t in times)
    if any(t >= t_start_s for t in times):
        raise ContractError("an observed frame falls at or after the action start")
    return SamplingPlan(times, indices, tuple(cfg.intervals_s), tuple(interval_steps(cfg)))


def sample_frames(segment: Segment, cfg: AnticipationConfig) -> np.ndarray:
    """Observed features of a segment, shape (num_frames, N, C_in)"""
    plan = frame_indices(cfg, segment.t_start_s, segment.fps)
    if plan.indices[-1] >= segment.num_frames:
        raise ContractError(f"segment {segment.segment_id} has {segment.num_frames} frames, "
                            f"sampling needs index {plan.indices[-1]}")
    return segment.frames[list(plan.indices)]


def usable_segments(segments: Sequence[Segment], cfg: AnticipationConfig) -> List[Segment]:
    """Segments whose observation window fits the recording; the rest are skipped with a warning"""
    usable = []
    for segment in segments:
        try:
            frame_indices(cfg, segment.t_start_s, segment.fps)
        except SegmentTooEarlyError as e:
            logger.warning(f"Skipping segment {segment.segment_id}: {e}")
            continue
        usable.append(segment)
    return usable


def forward_frames(model: AnticipationModel, frames: np.ndarray,
                   cfg: AnticipationConfig) -> List[IntervalLogits]:
    """
    Run the model over sampled frames and classify at every interval step

    Args:
        model: The model
        frames: Observed features, (T, N, C_in) or batched (B, T, N, C_in)
        cfg: Sampling settings

    Returns:
        List[IntervalLogits]: One entry per interval, in interval order
    """
    if frames.ndim not in (3, 4):
        raise DimensionError("frames must be (T, N, C_in) or (B, T, N, C_in)", frames.shape)
    if frames.shape[-2:] != (model.dims.num_vertices, model.dims.input_dim):
        raise DimensionError("frame features do not match the model",
                             frames.shape[-2:], (model.dims.num_vertices, model.dims.input_dim))
    dtype = dtype_for(model.precision)
    time_axis = frames.ndim - 3
    sequence = [Tensor(np.take(frames, t, axis=time_axis).astype(dtype))
                for t in range(frames.shape[time_axis])]
    steps = interval_steps(cfg)
    outputs = {out.step: out for out in run_sequence(model.cell, sequence, model.edges, steps)}
    result = []
    for tau, step in zip(cfg.intervals_s, steps):
        verb, noun, action = classify(model, outputs[step])
        result.append(IntervalLogits(tau, step, verb, noun, action))
    return result


def forward_segment(model: AnticipationModel, segment: Segment,
                    cfg: AnticipationConfig) -> List[IntervalLogits]:
    """Per-interval logits of one segment, each of shape (classes,)"""
    return forward_frames(model, sample_frames(segment, cfg), cfg)


def forward_batch(model: AnticipationModel, segments: Sequence[Segment],
                  cfg: AnticipationConfig) -> List[IntervalLogits]:
    """Per-interval logits of a batch, each of shape (B, classes)"""
    if not segments:
        raise ContractError("forward_batch needs at least one segment")
    frames = np.stack([sample_frames(s, cfg) for s in segments])
    return forward_frames(model, frames, cfg)


def _as_batch(logits: Tensor) -> Tensor:
    return F.reshape(logits, (1, logits.shape[0])) if logits.ndim == 1 else logits


def anticipation_loss(per_interval: Sequence[IntervalLogits], labels: BatchLabels) -> Tensor:
    """
    Σ over intervals of CE_verb + CE_noun + CE_action, each averaged over the batch

    Args:
        per_interval: Logits from forward_batch or forward_segment
        labels: Class ids, one per batch row

    Returns:
        Tensor: Scalar loss
    """
    if not per_interval:
        raise ContractError("anticipation_loss needs at least one interval")
    total = None
    for logits in per_interval:
        for head, target in ((logits.verb, labels.verb), (logits.noun, labels.noun),
                             (logits.action, labels.action)):
            term = F.cross_entropy(_as_batch(head), target)
            total = term if total is None else F.add(total, term)
    return total
