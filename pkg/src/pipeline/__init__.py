"""
Anticipation pipeline package.

Modules:
    anticipation.py: Frame sampling, forward passes and the summed interval loss
    metrics.py: Top-k accuracy, class-mean recall and evaluation reports
    optim.py: SGD and Adam optimizers with the annealed learning-rate schedule
    trainer.py: Training loop and the plain-text training log

Classes:
    SamplingPlan: Observed frames and interval steps of a segment
    EvalReport: Metrics per anticipation interval
    TrainingLog: Event subscriber writing the training log

The trainer publishes TrainingEvent notifications through an EventHandler so
logging and checkpointing stay outside the loop.
"""

from .anticipation import (
    SamplingPlan, anticipation_loss, forward_batch, forward_segment, frame_indices
)
from .metrics import EvalReport, evaluate, mean_topk_recall, topk_accuracy
from .optim import SGD, Adam, build_optimizer, learning_rate
from .trainer import TrainingLog, TrainingResult, train

__all__ = [
    'SamplingPlan', 'anticipation_loss', 'forward_batch', 'forward_segment', 'frame_indices',
    'EvalReport', 'evaluate', 'mean_topk_recall', 'topk_accuracy',
    'SGD', 'Adam', 'build_optimizer', 'learning_rate',
    'TrainingLog', 'TrainingResult', 'train'
]
