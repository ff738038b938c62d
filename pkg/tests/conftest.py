"""Shared fixtures"""

import numpy as np
import pytest

from src.core.tensor import Tensor
from src.entities.cell import ModelDims
from src.utils.config import RunConfig
from src.utils.constants import PRECISION_DOUBLE


def tiny_config(strategy: str = "implicit", **overrides) -> RunConfig:
    """Small dimensions that keep a full forward pass fast"""
    config = RunConfig()
    values = {
        "data.grid_h": 2,
        "data.grid_w": 2,
        "data.feature_dim": 8,
        "data.num_verbs": 3,
        "data.num_nouns": 2,
        "data.count": 16,
        "data.noise": 0.1,
        "model.width": 8,
        "model.heads": 2,
        "edges.strategy": strategy,
        "edges.bank_size": 4,
        "train.epochs": 1,
        "train.batch_size": 8,
        "optim.lr": 1e-3,
    }
    values.update(overrides)
    for key, value in values.items():
        config.set(key, value)
    return config.validate()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def dims():
    return ModelDims(num_vertices=4, input_dim=6, width=8, num_heads=2)


@pytest.fixture
def make_tensor(rng):
    """Random double-precision tensors"""
    def make(*shape, requires_grad=False, scale=1.0):
        return Tensor(rng.standard_normal(shape) * scale, precision=PRECISION_DOUBLE,
                      requires_grad=requires_grad)
    return make
