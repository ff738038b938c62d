"""
Model entities package.

This package contains the parameter groups and forward functions of the
anticipation model, from single layers up to the assembled model.

Modules:
    params.py: ParamGroup mixin naming parameters and initializers
    blocks.py: Linear layers, multi-head self-attention, FFN and SABlock
    edges.py: Implicit, template-bank and class-token edge strategies
    cell.py: The recurrent cell and its sequence driver
    model.py: Cell, edge strategy and classifier heads together

Classes:
    ParamGroup: Mixin collecting named parameter tensors
    SABlockParams: Pre-norm attention block parameters
    EdgeStrategy: One configured edge strategy
    CellParams: Recurrent cell parameters
    AnticipationModel: The full model

Each entity is a dataclass of tensors; behaviour lives in module-level
functions that take the parameters as their first argument.
"""

from .params import ParamGroup
from .blocks import SABlockParams, mhsa, sablock, self_attention
from .edges import EdgeKind, EdgeStrategy, adjacency_for_step, ctp_adjacency, tb_adjacency
from .cell import CellParams, HiddenState, ModelDims, parameter_budget, run_sequence
from .model import AnticipationModel, build_model, classify, count_parameters

__all__ = [
    'ParamGroup',
    'SABlockParams', 'mhsa', 'sablock', 'self_attention',
    'EdgeKind', 'EdgeStrategy', 'adjacency_for_step', 'ctp_adjacency', 'tb_adjacency',
    'CellParams', 'HiddenState', 'ModelDims', 'parameter_budget', 'run_sequence',
    'AnticipationModel', 'build_model', 'classify', 'count_parameters'
]
