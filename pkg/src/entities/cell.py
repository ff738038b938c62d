"""
The recurrent cell: vertex encoding, hidden-state fusion, message, update and
readout blocks, stepped over a sequence of frame features.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from src.core import functional as F
from src.core.tensor import Tensor, dtype_for, parameter, zeros
from src.entities.blocks import (
    LinearParams, SABlockParams, init_linear, init_sablock, linear, sablock
)
from src.entities.edges import EdgeEstimate, EdgeStrategy, estimate_edges, initial_tokens
from src.entities.params import ParamGroup, normal_init
from src.utils.constants import (
    DEFAULT_HEADS, INIT_STD, PRECISION_SINGLE, SCALE_INPUT_DIM, UPDATE_MESSAGE_HALF,
    UPDATE_TAKES
)
from src.utils.errors import ConfigError, ContractError, DimensionError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class ModelDims:
    """Sizes shared by the cell, the edge strategy and the heads"""
    num_vertices: int
    input_dim: int
    width: int
    num_heads: int = DEFAULT_HEADS
    scale_mode: str = SCALE_INPUT_DIM
    update_take: str = UPDATE_MESSAGE_HALF


@dataclass
class CellParams(ParamGroup):
    message_mlp: LinearParams
    W_pe: Tensor
    fuse: LinearParams
    msg_block: SABlockParams
    upd_block: SABlockParams
    readout_block: SABlockParams
    readout_proj: LinearParams
    update_take: str = UPDATE_MESSAGE_HALF

    @property
    def num_vertices(self) -> int:
        return self.W_pe.shape[0]

    @property
    def width(self) -> int:
        return self.W_pe.shape[1]

    @property
    def input_dim(self) -> int:
        return self.message_mlp.in_features


@dataclass
class HiddenState:
    """Per-vertex state h of shape (.., N, C) after `t` steps"""
    h: Tensor
    t: int = 0


@dataclass
class StepOutput:
    step: int
    y: Tensor
    cls_out: Optional[Tensor] = None


@dataclass
class StepTrace:
    """What the edge strategy saw and produced at one step"""
    step: int
    edges: Optional[EdgeEstimate]
    tokens: Optional[Tensor] = None


def init_cell(rng: np.random.Generator, dims: ModelDims,
              precision: str = PRECISION_SINGLE) -> CellParams:
    """
    Fresh cell parameters

    Args:
        rng: Random generator
        dims: Vertex count, widths, heads and the update/scale choices
        precision: Parameter precision

    Returns:
        CellParams: Initialized parameters
    """
    if dims.update_take not in UPDATE_TAKES:
        raise ConfigError(f"unknown update half '{dims.update_take}'", "model.update_take")
    C = dims.width
    dtype = dtype_for(precision)
    return CellParams(
        message_mlp=init_linear(rng, dims.input_dim, C, precision=precision),
        W_pe=parameter(normal_init(rng, INIT_STD, (dims.num_vertices, C), dtype)),
        fuse=init_linear(rng, 2 * C, C, precision=precision),
        msg_block=init_sablock(rng, C, dims.num_heads, dims.scale_mode, precision),
        upd_block=init_sablock(rng, C, dims.num_heads, dims.scale_mode, precision),
        readout_block=init_sablock(rng, C, dims.num_heads, dims.scale_mode, precision),
        readout_proj=init_linear(rng, C, C, precision=precision),
        update_take=dims.update_take,
    )


def parameter_budget(dims: ModelDims) -> int:
    """
    Analytic trainable scalar count of the cell without W_pe

    Each SABlock holds 6C² + 9C; with C_in = C the total is 22C² + 30C.
    """
    C, C_in = dims.width, dims.input_dim
    block = 6 * C * C + 9 * C
    return (C_in * C + C) + (2 * C * C + C) + 3 * block + (C * C + C)


def initial_state(p: CellParams, like: Tensor) -> HiddenState:
    """h^0 = 0 with the batch layout of `like` (.., N, *)"""
    return HiddenState(zeros(like.shape[:-1] + (p.width,), like.precision), 0)


def encode_vertices(p: CellParams, x_t: Tensor) -> Tensor:
    """
    Gated vertex encoding with position term

    x̄ = message_mlp(x_t); e = sigmoid(x̄) ⊙ x̄ + W_pe

    Args:
        p: Cell parameters
        x_t: Frame features, shape (.., N, C_in)

    Returns:
        Tensor: e_t of shape (.., N, C)
    """
    if x_t.ndim < 2 or x_t.shape[-2] != p.num_vertices:
        raise DimensionError("frame vertex count differs from the position encoding",
                             x_t.shape, p.W_pe.shape)
    x_bar = linear(p.message_mlp, x_t)
    return F.add(F.mul(F.sigmoid(x_bar), x_bar), p.W_pe)


def message_step(p: CellParams, e_t: Tensor, h_prev: Tensor,
                 A_t: Optional[Tensor] = None) -> Tensor:
    """m = SABlock_msg(fuse([e_t, h_prev]); A_t)"""
    if e_t.shape != h_prev.shape:
        raise DimensionError("encoded vertices and hidden state differ", e_t.shape, h_prev.shape)
    g = linear(p.fuse, F.concat([e_t, h_prev], axis=-1))
    return sablock(p.msg_block, g, A_t)


def update_step(p: CellParams, e_t: Tensor, m_t: Tensor) -> Tensor:
    """
    New hidden state from the stacked [e; m] tokens

    Both halves pass through the update block together (2N tokens); one half
    is kept and squashed with tanh.
    """
    if e_t.shape != m_t.shape:
        raise DimensionError("encoded vertices and messages differ", e_t.shape, m_t.shape)
    N = e_t.shape[-2]
    u = sablock(p.upd_block, F.concat([e_t, m_t], axis=-2))
    if p.update_take == UPDATE_MESSAGE_HALF:
        u = F.slice_along(u, -2, N, 2 * N)
    else:
        u = F.slice_along(u, -2, 0, N)
    return F.tanh(u)


def readout(p: CellParams, h_t: Tensor, cls_tokens: Optional[Tensor] = None):
    """
    Layer output from the hidden state

    Args:
        p: Cell parameters
        h_t: Hidden state, shape (.., N, C)
        cls_tokens: Optional class tokens (.., k, C), prepended as extra rows
            after the projection

    Returns:
        Tuple[Tensor, Optional[Tensor]]: y_t (.., N, C) and the updated tokens (.., k, C)
    """
    z = linear(p.readout_proj, h_t)
    if cls_tokens is None:
        return sablock(p.readout_block, z), None
    k = cls_tokens.shape[-2]
    out = sablock(p.readout_block, F.concat([cls_tokens, z], axis=-2))
    rows = out.shape[-2]
    return F.slice_along(out, -2, k, rows), F.slice_along(out, -2, 0, k)


def cell_step(p: CellParams, strategy: EdgeStrategy, x_t: Tensor, state: HiddenState,
              tokens: Optional[Tensor] = None):
    """Encode, estimate edges, pass messages and update; returns (state, edges)"""
    e_t = encode_vertices(p, x_t)
    edges = estimate_edges(strategy, e_t, tokens)
    A_t = edges.adjacency if edges is not None else None
    m_t = message_step(p, e_t, state.h, A_t)
    return HiddenState(update_step(p, e_t, m_t), state.t + 1), edges


def run_sequence(p: CellParams, frames: Sequence[Tensor], strategy: EdgeStrategy,
                 readout_steps: Iterable[int],
                 trace: Optional[List[StepTrace]] = None) -> List[StepOutput]:
    """
    Step the cell over frames, reading out at the requested steps

    With class-token edges the readout runs every step, since the tokens it
    emits at step t-1 define Â^t.

    Args:
        p: Cell parameters
        frames: Frame features in time order, each (.., N, C_in)
        strategy: Edge strategy
        readout_steps: Step indices whose readout is returned
        trace: Optional list that receives one StepTrace per step

    Returns:
        List[StepOutput]: Readouts in ascending step order
    """
    if not frames:
        raise ContractError("run_sequence needs at least one frame")
    steps = sorted(set(readout_steps))
    if steps and (steps[0] < 0 or steps[-1] >= len(frames)):
        raise ContractError(f"readout steps {steps} out of range for {len(frames)} frames")
    wanted = set(steps)

    state = initial_state(p, frames[0])
    tokens = None
    if strategy.uses_tokens:
        batch = frames[0].shape[0] if frames[0].ndim == 3 else None
        tokens = initial_tokens(strategy.ctp, batch)

    outputs: List[StepOutput] = []
    for t, x_t in enumerate(frames):
        tokens_in = tokens
        state, edges = cell_step(p, strategy, x_t, state, tokens)
        if trace is not None:
            trace.append(StepTrace(t, edges, tokens_in))
        if tokens is not None:
            y_t, tokens = readout(p, state.h, tokens)
            if t in wanted:
                outputs.append(StepOutput(t, y_t, tokens))
        elif t in wanted:
            y_t, _ = readout(p, state.h)
            outputs.append(StepOutput(t, y_t))
    return outputs
