"""
Neural building blocks: linear maps, multi-head self-attention with optional
adjacency fusion, the feed-forward network and the pre-norm SABlock.

Sequences are stored token-major, shape (.., N, C); attention scores are
Q·Kᵀ/√D with shape (.., N, N) so an (N, N) adjacency adds entrywise.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.core import functional as F
from src.core.tensor import Tensor, dtype_for, parameter
from src.entities.params import ParamGroup, uniform_fan_in
from src.utils.constants import (
    LAYER_NORM_EPS, PRECISION_SINGLE, SCALE_INPUT_DIM, SCALE_MODES
)
from src.utils.errors import ConfigError, DimensionError


@dataclass
class LinearParams(ParamGroup):
    """x·W (+ b) with W of shape (in, out)"""
    W: Tensor
    b: Optional[Tensor] = None

    @property
    def in_features(self) -> int:
        return self.W.shape[0]

    @property
    def out_features(self) -> int:
        return self.W.shape[1]


@dataclass
class LayerNormParams(ParamGroup):
    gamma: Tensor
    beta: Tensor
    eps: float = LAYER_NORM_EPS


@dataclass
class HeadParams(ParamGroup):
    """Query/key/value maps of one attention head, each C -> C/n"""
    query: LinearParams
    key: LinearParams
    value: LinearParams


@dataclass
class MHSAParams(ParamGroup):
    heads: List[HeadParams]
    aggregate: LinearParams
    scale_mode: str = SCALE_INPUT_DIM


@dataclass
class FFNParams(ParamGroup):
    fc1: LinearParams
    fc2: LinearParams


@dataclass
class SABlockParams(ParamGroup):
    norm1: LayerNormParams
    mhsa: MHSAParams
    norm2: LayerNormParams
    ffn: FFNParams

    @property
    def width(self) -> int:
        return self.norm1.gamma.shape[0]


# ---------------------------------------------------------------------------
# Initialization

def init_linear(rng: np.random.Generator, in_features: int, out_features: int,
                bias: bool = True, precision: str = PRECISION_SINGLE) -> LinearParams:
    """Fan-in uniform weights, zero bias"""
    dtype = dtype_for(precision)
    W = parameter(uniform_fan_in(rng, in_features, (in_features, out_features), dtype))
    b = parameter(np.zeros(out_features, dtype=dtype)) if bias else None
    return LinearParams(W, b)


def init_layer_norm(width: int, precision: str = PRECISION_SINGLE) -> LayerNormParams:
    dtype = dtype_for(precision)
    return LayerNormParams(parameter(np.ones(width, dtype=dtype)),
                           parameter(np.zeros(width, dtype=dtype)))


def init_mhsa(rng: np.random.Generator, width: int, num_heads: int,
              scale_mode: str = SCALE_INPUT_DIM,
              precision: str = PRECISION_SINGLE) -> MHSAParams:
    """
    Build n head triples of width C/n and the C x C aggregation

    Args:
        rng: Random generator
        width: Channel width C
        num_heads: Head count n, must divide C
        scale_mode: 'input_dim' scales scores by sqrt(C), 'head_dim' by sqrt(C/n)
        precision: Parameter precision

    Returns:
        MHSAParams: Freshly initialized attention parameters
    """
    if num_heads < 1 or width % num_heads:
        raise ConfigError(f"head count {num_heads} must divide width {width}", "model.heads")
    if scale_mode not in SCALE_MODES:
        raise ConfigError(f"unknown scale mode '{scale_mode}'", "model.scale_mode")
    head_width = width // num_heads
    heads = [
        HeadParams(
            query=init_linear(rng, width, head_width, precision=precision),
            key=init_linear(rng, width, head_width, precision=precision),
            value=init_linear(rng, width, head_width, precision=precision),
        )
        for _ in range(num_heads)
    ]
    aggregate = init_linear(rng, width, width, bias=False, precision=precision)
    return MHSAParams(heads, aggregate, scale_mode)


def init_ffn(rng: np.random.Generator, width: int, hidden: Optional[int] = None,
             precision: str = PRECISION_SINGLE) -> FFNParams:
    hidden = hidden or width
    return FFNParams(init_linear(rng, width, hidden, precision=precision),
                     init_linear(rng, hidden, width, precision=precision))


def init_sablock(rng: np.random.Generator, width: int, num_heads: int,
                 scale_mode: str = SCALE_INPUT_DIM,
                 precision: str = PRECISION_SINGLE) -> SABlockParams:
    return SABlockParams(
        norm1=init_layer_norm(width, precision),
        mhsa=init_mhsa(rng, width, num_heads, scale_mode, precision),
        norm2=init_layer_norm(width, precision),
        ffn=init_ffn(rng, width, precision=precision),
    )


# ---------------------------------------------------------------------------
# Forward

def linear(p: LinearParams, x: Tensor) -> Tensor:
    """x·W + b over the last axis"""
    if x.shape[-1] != p.in_features:
        raise DimensionError("linear input width differs from weight rows", x.shape, p.W.shape)
    if x.ndim == 1:
        return F.reshape(linear(p, F.reshape(x, (1, x.shape[0]))), (p.out_features,))
    y = F.matmul(x, p.W)
    if p.b is not None:
        y = F.add(y, p.b)
    return y


def layer_norm(p: LayerNormParams, x: Tensor) -> Tensor:
    return F.layer_norm(x, p.gamma, p.beta, p.eps)


def _check_adjacency(x: Tensor, A: Optional[Tensor]) -> None:
    if A is None:
        return
    tokens = x.shape[-2]
    if A.ndim < 2 or A.shape[-2:] != (tokens, tokens):
        raise DimensionError("adjacency must be (N, N) for N tokens", x.shape, A.shape)


def _scale(head: HeadParams, x: Tensor, scale_mode: str) -> float:
    depth = x.shape[-1] if scale_mode == SCALE_INPUT_DIM else head.query.out_features
    return 1.0 / math.sqrt(depth)


def _weights(head: HeadParams, x: Tensor, edge_weights: Optional[Tensor],
             scale_mode: str) -> Tensor:
    q = linear(head.query, x)
    k = linear(head.key, x)
    scores = F.mul(F.matmul(q, F.transpose(k)), _scale(head, x, scale_mode))
    weights = F.softmax(scores, axis=-1)
    if edge_weights is not None:
        weights = F.add(edge_weights, weights)
    return weights


def attention_weights(head: HeadParams, x: Tensor, A: Optional[Tensor] = None,
                      scale_mode: str = SCALE_INPUT_DIM) -> Tensor:
    """
    Row weights applied to V: softmax(QKᵀ/√D), plus softmax(A) when A is given

    Rows sum to 1 without A and to 2 with it.
    """
    _check_adjacency(x, A)
    edge_weights = F.softmax(A, axis=-1) if A is not None else None
    return _weights(head, x, edge_weights, scale_mode)


def self_attention(head: HeadParams, x: Tensor, A: Optional[Tensor] = None,
                   scale_mode: str = SCALE_INPUT_DIM) -> Tensor:
    """
    One attention head

    Args:
        head: Query/key/value parameters
        x: Tokens, shape (.., N, C)
        A: Optional adjacency, shape (.., N, N), fused after the softmax
        scale_mode: Which width D the scores are scaled by

    Returns:
        Tensor: Head output, shape (.., N, C/n)
    """
    weights = attention_weights(head, x, A, scale_mode)
    return F.matmul(weights, linear(head.value, x))


def mhsa(p: MHSAParams, x: Tensor, A: Optional[Tensor] = None) -> Tensor:
    """Concatenated head outputs followed by the aggregation map; A is shared by all heads"""
    _check_adjacency(x, A)
    edge_weights = F.softmax(A, axis=-1) if A is not None else None
    outputs = [
        F.matmul(_weights(head, x, edge_weights, p.scale_mode), linear(head.value, x))
        for head in p.heads
    ]
    merged = outputs[0] if len(outputs) == 1 else F.concat(outputs, axis=-1)
    return linear(p.aggregate, merged)


def ffn(p: FFNParams, x: Tensor) -> Tensor:
    """gelu(x·W1 + b1)·W2 + b2"""
    return linear(p.fc2, F.gelu(linear(p.fc1, x)))


def sablock(p: SABlockParams, x: Tensor, A: Optional[Tensor] = None) -> Tensor:
    """
    Pre-norm residual block

    y1 = x + MHSA(LN1(x); A); out = y1 + FFN(LN2(y1))
    """
    if x.shape[-1] != p.width:
        raise DimensionError("SABlock width differs from input channels", x.shape, p.norm1.gamma.shape)
    y1 = F.add(x, mhsa(p.mhsa, layer_norm(p.norm1, x), A))
    return F.add(y1, ffn(p.ffn, layer_norm(p.norm2, y1)))
