"""
Named parameter groups shared by every model entity.
"""

import dataclasses
from typing import Any, Dict, Iterator, Tuple

import numpy as np

from src.core.tensor import Tensor


class ParamGroup:
    """
    Mixin for dataclasses whose fields hold parameter tensors.

    Tensor fields, nested groups, lists and dicts of either are walked in
    declaration order, which gives every parameter a stable dotted name.
    """

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        """
        Collect trainable tensors by dotted name

        Args:
            prefix: Name prefix for this group

        Returns:
            Dict[str, Tensor]: Parameters in declaration order
        """
        out: Dict[str, Tensor] = {}
        for field in dataclasses.fields(self):
            _collect(out, _join(prefix, field.name), getattr(self, field.name))
        return out

    def parameters(self) -> Iterator[Tensor]:
        return iter(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.zero_grad()


def _join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


def _collect(out: Dict[str, Tensor], name: str, value: Any) -> None:
    if isinstance(value, Tensor):
        if value.requires_grad:
            out[name] = value
    elif isinstance(value, ParamGroup):
        out.update(value.named_parameters(name))
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _collect(out, _join(name, str(i)), item)
    elif isinstance(value, dict):
        for key, item in value.items():
            _collect(out, _join(name, str(key)), item)


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...],
                   dtype: type) -> np.ndarray:
    """Weights drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))"""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def normal_init(rng: np.random.Generator, std: float, shape: Tuple[int, ...],
                dtype: type) -> np.ndarray:
    return (rng.standard_normal(size=shape) * std).astype(dtype)
