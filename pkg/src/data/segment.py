"""Labelled frame-feature sequences"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.utils.constants import DEFAULT_FPS


@dataclass
class Segment:
    """
    Frame features of one recording around an action start.

    Attributes:
        segment_id: Source identifier, unique within a dataset
        frames: Features of shape (T, N, C_in); frame i was taken at time i / fps
        t_start_s: Action start in seconds from the first frame
        verb, noun, action: Class ids
        fps: Frame rate of `frames`
    """
    segment_id: str
    frames: np.ndarray
    t_start_s: float
    verb: int
    noun: int
    action: int
    fps: float = DEFAULT_FPS

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.frames.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.frames.shape[2]

    @property
    def labels(self) -> Tuple[int, int, int]:
        return self.verb, self.noun, self.action
