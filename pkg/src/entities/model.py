"""
The anticipation model: recurrent cell, edge strategy and classifier heads.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.core import functional as F
from src.core.tensor import Tensor
from src.entities.blocks import LinearParams, init_linear, linear
from src.entities.cell import CellParams, ModelDims, StepOutput, init_cell, parameter_budget
from src.entities.edges import (
    EdgeKind, EdgeStrategy, edge_parameter_budget, init_edge_strategy, token_row
)
from src.entities.params import ParamGroup
from src.utils.config import RunConfig
from src.utils.constants import (
    ACTION_COMPOSED, ACTION_SEPARATE, ACTION_SOURCE_POOL, ACTION_SOURCE_TOKEN, CTP_TOKEN_NAMES,
    PRECISION_SINGLE
)
from src.utils.errors import ContractError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

Logits = Tuple[Tensor, Tensor, Tensor]


@dataclass
class ClassifierHeads(ParamGroup):
    """
    Verb, noun and action classifiers shared by every anticipation step.

    With `action_mode = composed` there is no action layer; action logits are
    verb[v] + noun[n] at index v * num_nouns + n.
    """
    verb: LinearParams
    noun: LinearParams
    action: Optional[LinearParams] = None
    action_mode: str = ACTION_SEPARATE
    action_source: str = ACTION_SOURCE_POOL

    @property
    def num_verbs(self) -> int:
        return self.verb.out_features

    @property
    def num_nouns(self) -> int:
        return self.noun.out_features

    @property
    def num_actions(self) -> int:
        if self.action is None:
            return self.num_verbs * self.num_nouns
        return self.action.out_features


@dataclass
class AnticipationModel(ParamGroup):
    dims: ModelDims
    cell: CellParams
    edges: EdgeStrategy
    heads: ClassifierHeads
    precision: str = PRECISION_SINGLE

    @property
    def strategy(self) -> str:
        return self.edges.kind.value


def init_heads(rng: np.random.Generator, width: int, num_verbs: int, num_nouns: int,
               num_actions: int, action_mode: str = ACTION_SEPARATE,
               action_source: str = ACTION_SOURCE_POOL,
               precision: str = PRECISION_SINGLE) -> ClassifierHeads:
    action = None
    if action_mode == ACTION_SEPARATE:
        action = init_linear(rng, width, num_actions, precision=precision)
    elif action_mode == ACTION_COMPOSED and num_actions != num_verbs * num_nouns:
        raise ContractError(f"composed actions need {num_verbs * num_nouns} classes, got {num_actions}")
    return ClassifierHeads(
        verb=init_linear(rng, width, num_verbs, precision=precision),
        noun=init_linear(rng, width, num_nouns, precision=precision),
        action=action,
        action_mode=action_mode,
        action_source=action_source,
    )


def model_dims(config: RunConfig) -> ModelDims:
    return ModelDims(
        num_vertices=config.data.num_vertices,
        input_dim=config.data.feature_dim,
        width=config.model.width,
        num_heads=config.model.heads,
        scale_mode=config.model.scale_mode,
        update_take=config.model.update_take,
    )


def build_model(config: RunConfig, seed: Optional[int] = None) -> AnticipationModel:
    """
    Initialize a model from configuration

    Parameters are drawn in a fixed order (cell, edges, heads) from one
    generator seeded by `seed` or `run.seed`, so equal seeds give equal models.

    Args:
        config: Validated run configuration
        seed: Optional override of run.seed

    Returns:
        AnticipationModel: Freshly initialized model
    """
    config.validate()
    precision = config.run.precision
    rng = np.random.default_rng(config.run.seed if seed is None else seed)
    dims = model_dims(config)
    cell = init_cell(rng, dims, precision)
    edges = init_edge_strategy(rng, config.edges.strategy, dims.num_vertices, dims.width,
                               config.edges.bank_size, config.edges.ctp_variant, precision)
    heads = init_heads(rng, dims.width, config.data.num_verbs, config.data.num_nouns,
                       config.data.action_count, config.model.action_mode,
                       config.model.action_source, precision)
    model = AnticipationModel(dims, cell, edges, heads, precision)
    logger.info(f"Built {config.edges.strategy} model: N={dims.num_vertices}, C={dims.width}, "
                f"heads={dims.num_heads}, {model.num_parameters()} parameters")
    return model


def _token_index(model: AnticipationModel, name: str) -> int:
    names = CTP_TOKEN_NAMES[model.edges.ctp.variant]
    if name in names:
        return names.index(name)
    return names.index("global")


def classify(model: AnticipationModel, output: StepOutput) -> Logits:
    """
    Verb, noun and action logits for one readout

    Verb and noun heads read their class tokens when the model carries them,
    otherwise the vertex-mean of y_t; the action head reads the action token
    only with action_source = token.

    Args:
        model: The model
        output: Readout of one step, y of shape (.., N, C)

    Returns:
        Logits: (verb, noun, action) logits, each (.., classes)
    """
    heads = model.heads
    pooled = F.reduce_mean(output.y, axis=-2)
    if model.edges.kind is EdgeKind.CLASS_TOKEN:
        if output.cls_out is None:
            raise ContractError("class-token model readout carries no tokens")
        verb_in = token_row(output.cls_out, _token_index(model, "verb"))
        noun_in = token_row(output.cls_out, _token_index(model, "noun"))
    else:
        verb_in = noun_in = pooled

    verb_logits = linear(heads.verb, verb_in)
    noun_logits = linear(heads.noun, noun_in)

    if heads.action_mode == ACTION_COMPOSED:
        lead = verb_logits.shape[:-1]
        V, Nn = heads.num_verbs, heads.num_nouns
        grid = F.add(F.reshape(verb_logits, lead + (V, 1)), F.reshape(noun_logits, lead + (1, Nn)))
        action_logits = F.reshape(grid, lead + (V * Nn,))
    else:
        action_in = pooled
        if heads.action_source == ACTION_SOURCE_TOKEN and model.edges.kind is EdgeKind.CLASS_TOKEN:
            action_in = token_row(output.cls_out, CTP_TOKEN_NAMES[model.edges.ctp.variant].index("action"))
        action_logits = linear(heads.action, action_in)
    return verb_logits, noun_logits, action_logits


def count_parameters(model: AnticipationModel, group: Optional[str] = None) -> int:
    """
    Trainable scalars in the whole model or one group

    Args:
        model: The model
        group: None, 'cell', 'cell_core' (cell without W_pe), 'edges' or 'heads'

    Returns:
        int: Scalar count
    """
    if group is None:
        return model.num_parameters()
    if group == "cell_core":
        return model.cell.num_parameters() - model.cell.W_pe.size
    if group in ("cell", "edges", "heads"):
        return getattr(model, group).num_parameters()
    raise ContractError(f"unknown parameter group '{group}'")


def parameter_report(model: AnticipationModel, config: RunConfig) -> Dict[str, int]:
    """Actual counts beside the analytic budget"""
    return {
        "total": count_parameters(model),
        "cell_core": count_parameters(model, "cell_core"),
        "cell_core_budget": parameter_budget(model.dims),
        "edges": count_parameters(model, "edges"),
        "edges_budget": edge_parameter_budget(config.edges.strategy, model.dims.num_vertices,
                                              model.dims.width, config.edges.bank_size,
                                              config.edges.ctp_variant),
        "heads": count_parameters(model, "heads"),
    }
