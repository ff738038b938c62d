"""
Synthetic anticipation segments whose labels are recoverable from the
observed frames.

The noun picks which vertices carry a fixed marker direction; the verb picks
the direction those vertices drift along as the action approaches.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np

from src.data.segment import Segment
from src.utils.config import RunConfig
from src.utils.constants import NUM_FRAMES, SKIP_FRAMES, STRIDE_S
from src.utils.errors import ConfigError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

_LAYOUT_STREAM = 0
_SEGMENT_STREAM = 1


@dataclass(frozen=True)
class SyntheticConfig:
    grid_h: int = 4
    grid_w: int = 4
    feature_dim: int = 32
    num_verbs: int = 5
    num_nouns: int = 5
    noise: float = 0.1
    sequence_length: int = NUM_FRAMES + SKIP_FRAMES
    seed: int = 0
    num_frames: int = NUM_FRAMES
    stride_s: float = STRIDE_S

    @property
    def num_vertices(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def fps(self) -> float:
        return 1.0 / self.stride_s

    @property
    def t_start_s(self) -> float:
        return self.num_frames * self.stride_s

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "SyntheticConfig":
        d = config.data
        return cls(d.grid_h, d.grid_w, d.feature_dim, d.num_verbs, d.num_nouns, d.noise,
                   d.sequence_length, config.run.seed, config.anticipation.num_frames,
                   config.anticipation.stride_s)

    def validate(self) -> "SyntheticConfig":
        if self.num_vertices < 4:
            raise ConfigError(f"needs at least 4 vertices, grid has {self.num_vertices}", "data.grid_h")
        if self.num_verbs * self.num_nouns < 2:
            raise ConfigError("needs at least two verb/noun combinations", "data.num_verbs")
        if self.feature_dim <= self.num_verbs:
            raise ConfigError(f"feature_dim must exceed num_verbs ({self.num_verbs})", "data.feature_dim")
        if self.num_vertices < self.num_nouns:
            raise ConfigError(f"needs at least one vertex per noun ({self.num_nouns})", "data.num_nouns")
        if self.sequence_length < self.num_frames + SKIP_FRAMES:
            raise ConfigError(f"sequence_length must be >= {self.num_frames + SKIP_FRAMES}",
                              "data.sequence_length")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0", "data.noise")
        return self


class SyntheticGenerator:
    """Draws segments from a fixed random feature layout"""

    def __init__(self, cfg: SyntheticConfig):
        self.cfg = cfg.validate()
        layout = np.random.default_rng([cfg.seed, _LAYOUT_STREAM])
        basis, _ = np.linalg.qr(layout.standard_normal((cfg.feature_dim, cfg.feature_dim)))
        self.marker = basis[:, 0]
        self.verb_directions = basis[:, 1:1 + cfg.num_verbs].T
        vertices = np.arange(cfg.num_vertices)
        self.noun_masks = np.stack([(vertices % cfg.num_nouns) == n for n in range(cfg.num_nouns)])

    def ramp(self) -> np.ndarray:
        """Drift strength per frame, reaching 1 at the last observed frame"""
        s = np.arange(self.cfg.sequence_length, dtype=np.float64)
        return np.minimum(1.0, (s + 1.0) / self.cfg.num_frames)

    def clean_frames(self, verb: int, noun: int) -> np.ndarray:
        cfg = self.cfg
        signal = self.marker[None, :] + self.ramp()[:, None] * self.verb_directions[verb][None, :]
        frames = np.zeros((cfg.sequence_length, cfg.num_vertices, cfg.feature_dim))
        frames[:, self.noun_masks[noun], :] = signal[:, None, :]
        return frames

    def segment(self, index: int) -> Segment:
        cfg = self.cfg
        rng = np.random.default_rng([cfg.seed, _SEGMENT_STREAM, index])
        verb = int(rng.integers(cfg.num_verbs))
        noun = int(rng.integers(cfg.num_nouns))
        frames = self.clean_frames(verb, noun)
        if cfg.noise > 0:
            frames = frames + cfg.noise * rng.standard_normal(frames.shape)
        return Segment(
            segment_id=f"syn-{index:06d}",
            frames=frames.astype(np.float32),
            t_start_s=cfg.t_start_s,
            verb=verb,
            noun=noun,
            action=verb * cfg.num_nouns + noun,
            fps=cfg.fps,
        )


def gen_dataset(cfg: SyntheticConfig, count: int, workers: int = 1) -> List[Segment]:
    """
    Generate `count` segments

    Segment i depends only on (seed, i), so the result is the same for any
    worker count.

    Args:
        cfg: Generator settings
        count: Number of segments
        workers: Threads used for generation

    Returns:
        List[Segment]: Segments in index order
    """
    generator = SyntheticGenerator(cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            segments = list(pool.map(generator.segment, range(count)))
    else:
        segments = [generator.segment(i) for i in range(count)]
    logger.info(f"Generated {count} synthetic segments "
                f"(N={cfg.num_vertices}, C_in={cfg.feature_dim}, noise={cfg.noise})")
    return segments
