"""
Edge strategies: how the cell obtains the explicit adjacency Â^t for a step.

- implicit: no adjacency; attention relies on query/key similarity alone
- tb: a bank of S learnable templates soft-selected from pooled vertex features
- ctp: outer products of projected, layer-normalized class tokens
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

import numpy as np

from src.core import functional as F
from src.core.tensor import Tensor, dtype_for, parameter
from src.entities.blocks import (
    LayerNormParams, LinearParams, init_layer_norm, init_linear, layer_norm, linear
)
from src.entities.params import ParamGroup, normal_init
from src.utils.constants import (
    CTP_GLOBAL, CTP_TOKEN_NAMES, CTP_VARIANTS, CTP_VERB_NOUN_ACTION, DEFAULT_BANK_SIZE,
    INIT_STD, PRECISION_SINGLE, STRATEGIES, STRATEGY_CLASS_TOKEN, STRATEGY_IMPLICIT,
    STRATEGY_TEMPLATE_BANK
)
from src.utils.errors import ConfigError, ContractError, DimensionError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)


class EdgeKind(Enum):
    IMPLICIT = STRATEGY_IMPLICIT
    TEMPLATE_BANK = STRATEGY_TEMPLATE_BANK
    CLASS_TOKEN = STRATEGY_CLASS_TOKEN


@dataclass
class BankParams(ParamGroup):
    """S templates of shape (N, N) and the selector MLP C -> C -> S"""
    templates: Tensor
    selector_hidden: LinearParams
    selector_out: LinearParams

    @property
    def size(self) -> int:
        return self.templates.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.templates.shape[1]


@dataclass
class CTPParams(ParamGroup):
    """
    Initial class tokens (k, C) with one projection C -> N and one
    layer norm over N per token name
    """
    variant: str
    tokens: Tensor
    projections: Dict[str, LinearParams]
    norms: Dict[str, LayerNormParams]

    @property
    def token_names(self):
        return CTP_TOKEN_NAMES[self.variant]


@dataclass
class EdgeStrategy(ParamGroup):
    """Exactly one of the three strategies; `bank` or `ctp` is set to match `kind`"""
    kind: EdgeKind
    bank: Optional[BankParams] = None
    ctp: Optional[CTPParams] = None

    @property
    def uses_tokens(self) -> bool:
        return self.kind is EdgeKind.CLASS_TOKEN


@dataclass
class EdgeEstimate:
    """Adjacency for one step plus what produced it"""
    adjacency: Tensor
    selector: Optional[Tensor] = None
    projected: Dict[str, Tensor] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Initialization

def init_bank(rng: np.random.Generator, num_vertices: int, width: int,
              bank_size: int = DEFAULT_BANK_SIZE,
              precision: str = PRECISION_SINGLE) -> BankParams:
    if bank_size < 1:
        raise ConfigError(f"bank size must be >= 1, got {bank_size}", "edges.bank_size")
    dtype = dtype_for(precision)
    templates = parameter(normal_init(rng, INIT_STD, (bank_size, num_vertices, num_vertices), dtype))
    return BankParams(
        templates=templates,
        selector_hidden=init_linear(rng, width, width, precision=precision),
        selector_out=init_linear(rng, width, bank_size, precision=precision),
    )


def init_ctp(rng: np.random.Generator, num_vertices: int, width: int, variant: str,
             precision: str = PRECISION_SINGLE) -> CTPParams:
    if variant not in CTP_VARIANTS:
        raise ConfigError(f"unknown class-token variant '{variant}'", "edges.ctp_variant")
    names = CTP_TOKEN_NAMES[variant]
    dtype = dtype_for(precision)
    tokens = parameter(normal_init(rng, INIT_STD, (len(names), width), dtype))
    projections = {name: init_linear(rng, width, num_vertices, precision=precision) for name in names}
    norms = {name: init_layer_norm(num_vertices, precision) for name in names}
    return CTPParams(variant, tokens, projections, norms)


def init_edge_strategy(rng: np.random.Generator, kind: str, num_vertices: int, width: int,
                       bank_size: int = DEFAULT_BANK_SIZE, ctp_variant: str = "vn",
                       precision: str = PRECISION_SINGLE) -> EdgeStrategy:
    """
    Build the parameters of one edge strategy

    Args:
        rng: Random generator
        kind: 'implicit', 'tb' or 'ctp'
        num_vertices: Vertex count N
        width: Channel width C
        bank_size: Template count S for 'tb'
        ctp_variant: 'global', 'vn' or 'vna' for 'ctp'
        precision: Parameter precision

    Returns:
        EdgeStrategy: Strategy with only its own parameters populated
    """
    if kind not in STRATEGIES:
        raise ConfigError(f"unknown edge strategy '{kind}'", "edges.strategy")
    edge_kind = EdgeKind(kind)
    if edge_kind is EdgeKind.TEMPLATE_BANK:
        strategy = EdgeStrategy(edge_kind, bank=init_bank(rng, num_vertices, width, bank_size, precision))
    elif edge_kind is EdgeKind.CLASS_TOKEN:
        strategy = EdgeStrategy(edge_kind, ctp=init_ctp(rng, num_vertices, width, ctp_variant, precision))
    else:
        strategy = EdgeStrategy(edge_kind)
    logger.debug(f"Edge strategy {kind}: {strategy.num_parameters()} parameters")
    return strategy


def edge_parameter_budget(kind: str, num_vertices: int, width: int,
                          bank_size: int = DEFAULT_BANK_SIZE, ctp_variant: str = "vn") -> int:
    """Analytic trainable scalar count of an edge strategy"""
    N, C = num_vertices, width
    if kind == STRATEGY_TEMPLATE_BANK:
        S = bank_size
        return S * N * N + (C * C + C) + (C * S + S)
    if kind == STRATEGY_CLASS_TOKEN:
        k = len(CTP_TOKEN_NAMES[ctp_variant])
        return k * C + k * (C * N + N) + k * 2 * N
    return 0


# ---------------------------------------------------------------------------
# Template bank

def selector_weights(bank: BankParams, e_t: Tensor) -> Tensor:
    """I = softmax(MLP(mean of vertex rows)), shape (.., S)"""
    if e_t.shape[-2] != bank.num_vertices:
        raise DimensionError("vertex count differs from template size", e_t.shape, bank.templates.shape)
    pooled = F.reduce_mean(e_t, axis=-2)
    hidden = F.gelu(linear(bank.selector_hidden, pooled))
    return F.softmax(linear(bank.selector_out, hidden), axis=-1)


def combine_templates(bank: BankParams, weights: Tensor) -> Tensor:
    """Σ_i I_i · B_i for weights of shape (.., S)"""
    S, N = bank.size, bank.num_vertices
    lead = weights.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    flat = F.matmul(F.reshape(weights, (rows, S)), F.reshape(bank.templates, (S, N * N)))
    return F.reshape(flat, lead + (N, N))


def tb_estimate(bank: BankParams, e_t: Tensor) -> EdgeEstimate:
    weights = selector_weights(bank, e_t)
    return EdgeEstimate(combine_templates(bank, weights), selector=weights)


def tb_adjacency(bank: BankParams, e_t: Tensor) -> Tensor:
    """
    Soft-selected template adjacency

    Args:
        bank: Templates and selector
        e_t: Encoded vertices, shape (.., N, C)

    Returns:
        Tensor: Â of shape (.., N, N), a convex combination of the templates
    """
    return tb_estimate(bank, e_t).adjacency


# ---------------------------------------------------------------------------
# Class-token projection

def initial_tokens(ctp: CTPParams, batch: Optional[int] = None) -> Tensor:
    """Learnable tokens for step 0, broadcast over a batch when given"""
    if batch is None:
        return ctp.tokens
    return F.broadcast_to(ctp.tokens, (batch,) + ctp.tokens.shape)


def token_row(tokens: Tensor, index: int) -> Tensor:
    """Row `index` of (.., k, C) tokens as a (.., C) tensor"""
    row = F.slice_along(tokens, -2, index, index + 1)
    return F.reshape(row, tokens.shape[:-2] + (tokens.shape[-1],))


def project_token(ctp: CTPParams, name: str, token: Tensor) -> Tensor:
    """LN(proj(token)), shape (.., N)"""
    return layer_norm(ctp.norms[name], linear(ctp.projections[name], token))


def ctp_estimate(ctp: CTPParams, tokens: Tensor) -> EdgeEstimate:
    if tokens.shape[-2:] != ctp.tokens.shape:
        raise DimensionError("class tokens do not match the variant", tokens.shape, ctp.tokens.shape)
    projected = {
        name: project_token(ctp, name, token_row(tokens, i))
        for i, name in enumerate(ctp.token_names)
    }
    if ctp.variant == CTP_GLOBAL:
        adjacency = F.outer_product(projected["global"], projected["global"])
    else:
        adjacency = F.outer_product(projected["verb"], projected["noun"])
        if ctp.variant == CTP_VERB_NOUN_ACTION:
            adjacency = F.add(adjacency, F.outer_product(projected["action"], projected["action"]))
    return EdgeEstimate(adjacency, projected=projected)


def ctp_adjacency(ctp: CTPParams, tokens: Tensor) -> Tensor:
    """
    Outer-product adjacency from the current class tokens

    Args:
        ctp: Projection parameters
        tokens: Token rows in variant order, shape (.., k, C); for 'vn' the
            rows are the verb token then the noun token

    Returns:
        Tensor: Â of shape (.., N, N); rank 1 for 'global' and 'vn'
    """
    return ctp_estimate(ctp, tokens).adjacency


# ---------------------------------------------------------------------------
# Dispatch

def estimate_edges(strategy: EdgeStrategy, e_t: Tensor,
                   cls_state: Optional[Tensor] = None) -> Optional[EdgeEstimate]:
    if strategy.kind is EdgeKind.IMPLICIT:
        return None
    if strategy.kind is EdgeKind.TEMPLATE_BANK:
        return tb_estimate(strategy.bank, e_t)
    if cls_state is None:
        raise ContractError("class-token edges need the current class tokens")
    return ctp_estimate(strategy.ctp, cls_state)


def adjacency_for_step(strategy: EdgeStrategy, e_t: Tensor,
                       cls_state: Optional[Tensor] = None) -> Optional[Tensor]:
    """
    Â^t for the message function, or None for implicit edges

    Args:
        strategy: Active edge strategy
        e_t: Encoded vertices of this step
        cls_state: Class tokens carried from the previous readout (ctp only)

    Returns:
        Optional[Tensor]: Adjacency of shape (.., N, N)
    """
    estimate = estimate_edges(strategy, e_t, cls_state)
    return estimate.adjacency if estimate is not None else None
