"""
Evaluation metrics: top-k accuracy and class-mean top-k recall, computed per
anticipation interval for verb, noun and action predictions.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from src.data.segment import Segment
from src.entities.model import AnticipationModel
from src.pipeline.anticipation import forward_batch, interval_steps, usable_segments
from src.utils.config import AnticipationConfig
from src.utils.constants import TOP_K
from src.utils.errors import ContractError, DimensionError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

TASKS = ("verb", "noun", "action")


def _check(scores: np.ndarray, labels: np.ndarray, k: int) -> None:
    if scores.ndim != 2 or labels.shape != (scores.shape[0],):
        raise DimensionError("scores must be (samples, classes) with one label per sample",
                             scores.shape, labels.shape)
    if not 1 <= k <= scores.shape[1]:
        raise ContractError(f"k={k} must lie in [1, {scores.shape[1]}]")


def topk_hits(scores: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """
    Whether each label is among its row's k highest scores

    Equal scores rank the lower class index first.
    """
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    _check(scores, labels, k)
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    return (order == labels[:, None]).any(axis=1)


def topk_accuracy(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of samples whose label ranks in the top k"""
    hits = topk_hits(scores, labels, k)
    return float(hits.mean()) if hits.size else 0.0


def mean_topk_recall(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """
    Per-class top-k recall averaged over classes that occur in `labels`

    Args:
        scores: (samples, classes) scores
        labels: Ground-truth class per sample
        k: Rank cut-off

    Returns:
        float: Class-mean recall
    """
    hits = topk_hits(scores, labels, k)
    labels = np.asarray(labels)
    present = np.unique(labels)
    if present.size == 0:
        raise ContractError("mean recall is undefined without samples")
    return float(np.mean([hits[labels == c].mean() for c in present]))


@dataclass
class IntervalMetrics:
    interval_s: float
    step: int
    values: Dict[str, float] = field(default_factory=dict)


@dataclass
class EvalReport:
    """
    Metrics per interval. Keys are `<task>_top1`, `<task>_top5` and
    `<task>_recall5`; `k` holds the cut-off actually used per task when a
    vocabulary has fewer than five classes.
    """
    intervals: List[IntervalMetrics]
    sample_count: int
    k: Dict[str, int]

    @property
    def metric_names(self) -> List[str]:
        return [f"{task}_{kind}" for task in TASKS for kind in ("top1", f"top{TOP_K}", f"recall{TOP_K}")]

    def value(self, interval_s: float, name: str) -> float:
        for entry in self.intervals:
            if abs(entry.interval_s - interval_s) < 1e-9:
                return entry.values[name]
        raise KeyError(f"no interval {interval_s}")


def interval_metrics(scores: Dict[str, np.ndarray], labels: Dict[str, np.ndarray],
                     k: Dict[str, int]) -> Dict[str, float]:
    values: Dict[str, float] = {}
    for task in TASKS:
        values[f"{task}_top1"] = topk_accuracy(scores[task], labels[task], 1)
        values[f"{task}_top{TOP_K}"] = topk_accuracy(scores[task], labels[task], k[task])
        values[f"{task}_recall{TOP_K}"] = mean_topk_recall(scores[task], labels[task], k[task])
    return values


def _batch_scores(model: AnticipationModel, batch: Sequence[Segment],
                  cfg: AnticipationConfig) -> List[Dict[str, np.ndarray]]:
    logits = forward_batch(model, batch, cfg)
    return [{"verb": entry.verb.numpy(), "noun": entry.noun.numpy(), "action": entry.action.numpy()}
            for entry in logits]


def evaluate(model: AnticipationModel, segments: Sequence[Segment], cfg: AnticipationConfig,
             batch_size: int = 32, workers: int = 1) -> EvalReport:
    """
    Score every usable segment and compute metrics per interval

    Batches run on a thread pool when workers > 1; results are gathered in
    batch order, so the report does not depend on the worker count.

    Args:
        model: The model, read-only here
        segments: Evaluation segments
        cfg: Sampling settings
        batch_size: Segments per forward pass
        workers: Threads for the forward passes

    Returns:
        EvalReport: Metrics for every interval
    """
    usable = usable_segments(segments, cfg)
    if not usable:
        raise ContractError("no usable evaluation segments")
    batches = [usable[i:i + batch_size] for i in range(0, len(usable), batch_size)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda b: _batch_scores(model, b, cfg), batches))
    else:
        results = [_batch_scores(model, b, cfg) for b in batches]

    labels = {
        "verb": np.array([s.verb for s in usable]),
        "noun": np.array([s.noun for s in usable]),
        "action": np.array([s.action for s in usable]),
    }
    class_counts = {"verb": model.heads.num_verbs, "noun": model.heads.num_nouns,
                    "action": model.heads.num_actions}
    k = {task: min(TOP_K, count) for task, count in class_counts.items()}

    entries = []
    for i, (tau, step) in enumerate(zip(cfg.intervals_s, interval_steps(cfg))):
        scores = {task: np.concatenate([batch[i][task] for batch in results]) for task in TASKS}
        entries.append(IntervalMetrics(tau, step, interval_metrics(scores, labels, k)))
    logger.info(f"Evaluated {len(usable)} segments over {len(entries)} intervals")
    return EvalReport(entries, len(usable), k)
