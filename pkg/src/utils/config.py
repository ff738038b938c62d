"""
Run configuration: typed sections read from and written to flat
`section.key = value` text.

    # comment
    model.width = 32
    anticipation.intervals_s = 2.0, 1.75, 1.5
"""

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union, get_type_hints

from src.utils.constants import (
    ACTION_MODES, ACTION_SEPARATE, ACTION_SOURCE_POOL, ACTION_SOURCE_TOKEN, ACTION_SOURCES,
    ADAM_BETAS, ADAM_EPS, ANNEAL_FRACTION, CTP_VARIANTS, CTP_VERB_NOUN, CTP_VERB_NOUN_ACTION,
    DEFAULT_BANK_SIZE, DEFAULT_FPS, DEFAULT_HEADS, INTERVALS_S, LEARNING_RATE, MIN_LEARNING_RATE,
    MOMENTUM, NUM_FRAMES, OPTIMIZER_ADAM, OPTIMIZERS, PRECISION_SINGLE, PRECISIONS,
    SCALE_INPUT_DIM, SCALE_MODES, SKIP_FRAMES, STRATEGIES, STRATEGY_IMPLICIT, STRIDE_S,
    UPDATE_MESSAGE_HALF, UPDATE_TAKES, WEIGHT_DECAY
)
from src.utils.errors import ConfigError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

# A comment is a whole line, or starts at a `#` preceded by whitespace
_COMMENT = re.compile(r"(^|\s)#.*$")


@dataclass
class ModelConfig:
    width: int = 32
    heads: int = DEFAULT_HEADS
    scale_mode: str = SCALE_INPUT_DIM
    update_take: str = UPDATE_MESSAGE_HALF
    action_mode: str = ACTION_SEPARATE
    action_source: str = ACTION_SOURCE_POOL


@dataclass
class EdgesConfig:
    strategy: str = STRATEGY_IMPLICIT
    bank_size: int = DEFAULT_BANK_SIZE
    ctp_variant: str = CTP_VERB_NOUN


@dataclass
class AnticipationConfig:
    num_frames: int = NUM_FRAMES
    stride_s: float = STRIDE_S
    intervals_s: List[float] = field(default_factory=lambda: list(INTERVALS_S))


@dataclass
class OptimConfig:
    name: str = OPTIMIZER_ADAM
    lr: float = LEARNING_RATE
    min_lr: float = MIN_LEARNING_RATE
    weight_decay: float = WEIGHT_DECAY
    anneal_fraction: float = ANNEAL_FRACTION
    momentum: float = MOMENTUM
    beta1: float = ADAM_BETAS[0]
    beta2: float = ADAM_BETAS[1]
    eps: float = ADAM_EPS


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 8
    max_steps: int = 0            # 0 = no limit
    eval_workers: int = 1
    checkpoint_every: int = 1     # epochs; 0 = final only


@dataclass
class DataConfig:
    """Synthetic generator settings and the feature file location"""
    grid_h: int = 4
    grid_w: int = 4
    feature_dim: int = 32
    num_verbs: int = 5
    num_nouns: int = 5
    num_actions: int = 0          # 0 = num_verbs * num_nouns
    noise: float = 0.1
    sequence_length: int = NUM_FRAMES + SKIP_FRAMES
    count: int = 200
    val_fraction: float = 0.2
    fps: float = DEFAULT_FPS
    path: str = "data/synthetic.urmf"

    @property
    def num_vertices(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def action_count(self) -> int:
        return self.num_actions or self.num_verbs * self.num_nouns


@dataclass
class RunSection:
    seed: int = 0
    deterministic: bool = False
    precision: str = PRECISION_SINGLE
    out: str = "runs/default"
    log_level: str = "INFO"


_SECTIONS = ("model", "edges", "anticipation", "optim", "train", "data", "run")


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    edges: EdgesConfig = field(default_factory=EdgesConfig)
    anticipation: AnticipationConfig = field(default_factory=AnticipationConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    run: RunSection = field(default_factory=RunSection)

    # ------------------------------------------------------------------
    # Access by dotted key

    def keys(self) -> List[str]:
        return [f"{section}.{f.name}" for section in _SECTIONS
                for f in dataclasses.fields(getattr(self, section))]

    def get(self, key: str) -> Any:
        section, name = _split_key(key)
        return getattr(getattr(self, section), name)

    def set(self, key: str, value: Union[str, Any]) -> None:
        """
        Assign one value; strings are parsed according to the field type

        Args:
            key: Dotted key such as 'model.width'
            value: Raw text or an already typed value
        """
        section_name, name = _split_key(key)
        section = getattr(self, section_name, None)
        if section is None or name not in {f.name for f in dataclasses.fields(section)}:
            raise ConfigError("unknown configuration key", key)
        kind = get_type_hints(type(section))[name]
        if isinstance(value, str):
            value = _parse_value(key, kind, value)
        setattr(section, name, value)

    # ------------------------------------------------------------------
    # Text form

    def to_text(self) -> str:
        lines = []
        for section in _SECTIONS:
            for f in dataclasses.fields(getattr(self, section)):
                key = f"{section}.{f.name}"
                lines.append(f"{key} = {_format_value(self.get(key))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        """
        Parse configuration text; keys not present keep their defaults

        Args:
            text: Lines of `section.key = value`, blank lines and `#` comments allowed;
                a `#` inside a value (no whitespace before it) is kept

        Returns:
            RunConfig: Parsed configuration (not yet validated)
        """
        config = cls()
        for number, raw in enumerate(text.splitlines(), start=1):
            line = _COMMENT.sub("", raw).strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {number}: expected 'key = value'", line)
            key, value = (part.strip() for part in line.split("=", 1))
            config.set(key, value)
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        config = cls.from_text(Path(path).read_text(encoding="utf-8"))
        logger.info(f"Loaded configuration from {path}")
        return config

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text(), encoding="utf-8")

    def copy(self) -> "RunConfig":
        return RunConfig.from_text(self.to_text())

    # ------------------------------------------------------------------
    # Cross-field checks

    def validate(self) -> "RunConfig":
        """Raise ConfigError naming the first offending key; returns self"""
        m, e, a, o, t, d, r = (self.model, self.edges, self.anticipation, self.optim,
                               self.train, self.data, self.run)
        _choice("model.scale_mode", m.scale_mode, SCALE_MODES)
        _choice("model.update_take", m.update_take, UPDATE_TAKES)
        _choice("model.action_mode", m.action_mode, ACTION_MODES)
        _choice("model.action_source", m.action_source, ACTION_SOURCES)
        _choice("edges.strategy", e.strategy, STRATEGIES)
        _choice("edges.ctp_variant", e.ctp_variant, CTP_VARIANTS)
        _choice("optim.name", o.name, OPTIMIZERS)
        _choice("run.precision", r.precision, PRECISIONS)
        _require(0 <= r.seed < 2 ** 64, "run.seed", "must be a non-negative 64-bit integer")

        _require(m.width >= 1, "model.width", "must be positive")
        _require(m.heads >= 1 and m.width % m.heads == 0, "model.heads",
                 f"must divide model.width ({m.width})")
        _require(e.bank_size >= 1, "edges.bank_size", "must be >= 1")
        _require(m.action_source != ACTION_SOURCE_TOKEN or
                 (e.strategy == "ctp" and e.ctp_variant == CTP_VERB_NOUN_ACTION),
                 "model.action_source", "'token' needs edges.strategy = ctp with ctp_variant = vna")

        intervals = a.intervals_s
        _require(len(intervals) >= 1, "anticipation.intervals_s", "needs at least one interval")
        _require(all(x > y for x, y in zip(intervals, intervals[1:])),
                 "anticipation.intervals_s", "must be strictly decreasing")
        _require(a.stride_s > 0, "anticipation.stride_s", "must be positive")
        _require(a.num_frames >= len(intervals), "anticipation.num_frames",
                 "must be at least the number of intervals")
        steps = [a.num_frames - round(tau / a.stride_s) for tau in intervals]
        _require(all(0 <= s < a.num_frames for s in steps) and len(set(steps)) == len(steps),
                 "anticipation.intervals_s", "every interval must map to a distinct observed frame")

        _require(o.lr >= 0, "optim.lr", "must be >= 0")
        _require(0 <= o.min_lr, "optim.min_lr", "must be >= 0")
        _require(0 <= o.anneal_fraction <= 1, "optim.anneal_fraction", "must lie in [0, 1]")
        _require(t.epochs >= 1, "train.epochs", "must be >= 1")
        _require(t.batch_size >= 1, "train.batch_size", "must be >= 1")
        _require(t.eval_workers >= 1, "train.eval_workers", "must be >= 1")

        _require(d.grid_h >= 1 and d.grid_w >= 1, "data.grid_h", "grid must be non-empty")
        _require(d.num_verbs >= 1 and d.num_nouns >= 1, "data.num_verbs", "needs >= 1 class")
        _require(0 <= d.val_fraction < 1, "data.val_fraction", "must lie in [0, 1)")
        _require(d.fps > 0, "data.fps", "must be positive")
        _require(m.action_mode != "composed" or d.action_count == d.num_verbs * d.num_nouns,
                 "data.num_actions", "composed actions need num_verbs * num_nouns classes")
        return self


def _split_key(key: str) -> Tuple[str, str]:
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ConfigError("unknown configuration key", key)
    return parts[0], parts[1]


def _parse_value(key: str, kind: Any, text: str) -> Any:
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is str:
            return text
        if kind == List[float]:
            return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse '{text}' as {getattr(kind, '__name__', kind)}", key) from None
    raise ConfigError(f"unsupported field type {kind}", key)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _choice(key: str, value: str, allowed: Tuple[str, ...]) -> None:
    if value not in allowed:
        raise ConfigError(f"'{value}' is not one of {', '.join(allowed)}", key)


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ConfigError(message, key)


def config_summary(config: RunConfig) -> Dict[str, Any]:
    """Headline settings for log lines"""
    return {
        "strategy": config.edges.strategy,
        "vertices": config.data.num_vertices,
        "width": config.model.width,
        "heads": config.model.heads,
        "optimizer": config.optim.name,
        "lr": config.optim.lr,
        "seed": config.run.seed,
    }
