"""
Checkpoint persistence.

Layout (little-endian): magic 'URM1', u32 version, u32 tensor count; per
tensor: u16 name length, name, u8 dtype code, u8 rank, u32 dims, payload.

Tensor names:
    __config__            configuration text as u8
    __step__              step counter as i64
    param/<name>          model parameters
    optim/<slot>/<name>   optimizer buffers (optim/steps for its counter)
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from src.utils.binary_io import BinaryReader, BinaryWriter
from src.utils.config import RunConfig
from src.utils.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION, DTYPE_CODES
from src.utils.errors import ContractError, DimensionError, ParseError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

CONFIG_KEY = "__config__"
STEP_KEY = "__step__"
PARAM_PREFIX = "param/"
OPTIM_PREFIX = "optim/"

_DTYPES_BY_CODE = {code: dtype for dtype, code in DTYPE_CODES.items()}


def write_tensors(path: PathLike, tensors: Mapping[str, np.ndarray]) -> Path:
    """Write named arrays in insertion order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        out = BinaryWriter(handle)
        out.raw(CHECKPOINT_MAGIC)
        out.u32(CHECKPOINT_VERSION)
        out.u32(len(tensors))
        for name, array in tensors.items():
            array = np.asarray(array)
            dtype = array.dtype.newbyteorder("<").str if array.dtype.itemsize > 1 else array.dtype.str
            if dtype not in DTYPE_CODES:
                raise ContractError(f"tensor '{name}' has unsupported dtype {array.dtype}")
            out.text(name)
            out.u8(DTYPE_CODES[dtype])
            out.u8(array.ndim)
            for dim in array.shape:
                out.u32(dim)
            out.array(array, dtype)
    return path


def read_tensors(path: PathLike) -> Dict[str, np.ndarray]:
    """
    Read every named array

    Raises:
        ParseError: Bad magic, version or dtype code, or truncation, with byte offset
    """
    path = Path(path)
    reader = BinaryReader(path.read_bytes(), str(path))
    reader.magic(CHECKPOINT_MAGIC)
    version_at = reader.offset
    version = reader.u32("version")
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}", version_at)
    tensors: Dict[str, np.ndarray] = {}
    for index in range(reader.u32("tensor count")):
        name = reader.text(reader.u16(f"tensor {index} name length"), f"tensor {index} name")
        code_at = reader.offset
        code = reader.u8(f"tensor '{name}' dtype")
        if code not in _DTYPES_BY_CODE:
            raise ParseError(f"{path}: unknown dtype code {code} for '{name}'", code_at)
        rank = reader.u8(f"tensor '{name}' rank")
        dims = [reader.u32(f"tensor '{name}' dims") for _ in range(rank)]
        tensors[name] = reader.array(_DTYPES_BY_CODE[code], dims, f"tensor '{name}' payload")
    if not reader.at_end():
        raise ParseError(f"{path}: {reader.remaining} trailing bytes", reader.offset)
    return tensors


@dataclass
class Checkpoint:
    config: RunConfig
    parameters: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    version: int = CHECKPOINT_VERSION


def save_checkpoint(path: PathLike, model, config: RunConfig, optimizer=None, step: int = 0) -> Path:
    """
    Persist configuration, parameters, optimizer buffers and the step counter

    Args:
        path: Destination file
        model: Any parameter group exposing named_parameters()
        config: Configuration the model was built from
        optimizer: Optional optimizer exposing state_dict()
        step: Steps taken so far

    Returns:
        Path: The written file
    """
    tensors: Dict[str, np.ndarray] = {
        CONFIG_KEY: np.frombuffer(config.to_text().encode("utf-8"), dtype=np.uint8),
        STEP_KEY: np.array([step], dtype=np.int64),
    }
    for name, tensor in model.named_parameters().items():
        tensors[PARAM_PREFIX + name] = tensor.data
    if optimizer is not None:
        for name, buffer in optimizer.state_dict().items():
            tensors[OPTIM_PREFIX + name] = buffer
    written = write_tensors(path, tensors)
    logger.info(f"Saved checkpoint at step {step} to {written}")
    return written


def load_checkpoint(path: PathLike) -> Checkpoint:
    tensors = read_tensors(path)
    if CONFIG_KEY not in tensors:
        raise ParseError(f"{path}: checkpoint carries no configuration")
    config = RunConfig.from_text(tensors[CONFIG_KEY].tobytes().decode("utf-8"))
    step = int(tensors[STEP_KEY].reshape(-1)[0]) if STEP_KEY in tensors else 0
    parameters = {k[len(PARAM_PREFIX):]: v for k, v in tensors.items() if k.startswith(PARAM_PREFIX)}
    optimizer = {k[len(OPTIM_PREFIX):]: v for k, v in tensors.items() if k.startswith(OPTIM_PREFIX)}
    return Checkpoint(config, parameters, optimizer, step)


def apply_parameters(model, parameters: Mapping[str, np.ndarray],
                     strict: bool = True) -> None:
    """
    Copy stored arrays into the model's parameters

    Raises:
        DimensionError: A stored shape differs from the model's
        ContractError: With strict, the names do not match exactly
    """
    own = model.named_parameters()
    if strict:
        missing = sorted(set(own) - set(parameters))
        extra = sorted(set(parameters) - set(own))
        if missing or extra:
            raise ContractError(f"checkpoint parameters do not match the model "
                                f"(missing {missing[:3]}, unexpected {extra[:3]})")
    for name, tensor in own.items():
        if name not in parameters:
            continue
        stored = parameters[name]
        if stored.shape != tensor.shape:
            raise DimensionError(f"parameter '{name}'", stored.shape, tensor.shape)
        tensor.data = np.array(stored, dtype=tensor.data.dtype)
