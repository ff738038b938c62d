"""
Optimizers and the learning-rate schedule.
"""

import math
from typing import Dict, Mapping

import numpy as np

from src.core.tensor import Tensor
from src.utils.config import OptimConfig
from src.utils.constants import OPTIMIZER_ADAM, OPTIMIZER_SGD
from src.utils.errors import ConfigError, DimensionError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)


def learning_rate(step: int, total_steps: int, base_lr: float, min_lr: float,
                  anneal_fraction: float) -> float:
    """
    Constant rate, then cosine annealing over the last `anneal_fraction` of steps

    The rate never rises above base_lr, so base_lr = 0 stays 0.

    Args:
        step: Zero-based step index
        total_steps: Planned number of steps
        base_lr: Rate before annealing
        min_lr: Rate reached at the final step
        anneal_fraction: Share of steps spent annealing

    Returns:
        float: Rate for this step
    """
    floor = min(min_lr, base_lr)
    anneal_steps = int(round(total_steps * anneal_fraction))
    start = total_steps - anneal_steps
    if anneal_steps <= 0 or step < start:
        return base_lr
    progress = min(1.0, (step - start) / max(1, anneal_steps - 1))
    return floor + 0.5 * (base_lr - floor) * (1.0 + math.cos(math.pi * progress))


class Optimizer:
    """Updates named parameters in place from their accumulated gradients"""

    slots: tuple = ()

    def __init__(self, params: Mapping[str, Tensor], weight_decay: float = 0.0):
        self.params: Dict[str, Tensor] = dict(params)
        self.weight_decay = weight_decay
        self.state: Dict[str, Dict[str, np.ndarray]] = {slot: {} for slot in self.slots}
        self.steps = 0

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def step(self, lr: float) -> None:
        self.steps += 1
        for name, tensor in self.params.items():
            if tensor.grad is None:
                continue
            delta = self._delta(name, tensor, tensor.grad.astype(tensor.data.dtype, copy=False))
            if lr != 0.0:
                tensor.data -= (lr * delta).astype(tensor.data.dtype, copy=False)

    def _delta(self, name: str, tensor: Tensor, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _slot(self, slot: str, name: str, like: np.ndarray) -> np.ndarray:
        buffers = self.state[slot]
        if name not in buffers:
            buffers[name] = np.zeros_like(like)
        return buffers[name]

    # ------------------------------------------------------------------
    # Persistence

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Flat `<slot>/<param>` buffers plus the step counter under `steps`"""
        out = {f"{slot}/{name}": buf for slot, buffers in self.state.items()
               for name, buf in buffers.items()}
        out["steps"] = np.array([self.steps], dtype=np.int64)
        return out

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        for key, value in state.items():
            if key == "steps":
                self.steps = int(np.asarray(value).reshape(-1)[0])
                continue
            slot, name = key.split("/", 1)
            if slot not in self.state or name not in self.params:
                raise ConfigError("optimizer state does not match the model", key)
            if value.shape != self.params[name].shape:
                raise DimensionError(f"optimizer slot {key}", value.shape, self.params[name].shape)
            self.state[slot][name] = np.array(value, dtype=self.params[name].data.dtype)


class SGD(Optimizer):
    """Momentum SGD with L2 weight decay added to the gradient"""

    slots = ("momentum",)

    def __init__(self, params: Mapping[str, Tensor], momentum: float = 0.9,
                 weight_decay: float = 0.0):
        super().__init__(params, weight_decay)
        self.momentum = momentum

    def _delta(self, name, tensor, grad):
        if self.weight_decay:
            grad = grad + self.weight_decay * tensor.data
        velocity = self._slot("momentum", name, tensor.data)
        velocity *= self.momentum
        velocity += grad
        return velocity


class Adam(Optimizer):
    """Adaptive moments with weight decay applied to the weights directly"""

    slots = ("m", "v")

    def __init__(self, params: Mapping[str, Tensor], betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        super().__init__(params, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps

    def _delta(self, name, tensor, grad):
        m = self._slot("m", name, tensor.data)
        v = self._slot("v", name, tensor.data)
        m *= self.beta1
        m += (1.0 - self.beta1) * grad
        v *= self.beta2
        v += (1.0 - self.beta2) * grad * grad
        m_hat = m / (1.0 - self.beta1 ** self.steps)
        v_hat = v / (1.0 - self.beta2 ** self.steps)
        return m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * tensor.data


def build_optimizer(cfg: OptimConfig, params: Mapping[str, Tensor]) -> Optimizer:
    if cfg.name == OPTIMIZER_SGD:
        return SGD(params, cfg.momentum, cfg.weight_decay)
    if cfg.name == OPTIMIZER_ADAM:
        return Adam(params, (cfg.beta1, cfg.beta2), cfg.eps, cfg.weight_decay)
    raise ConfigError(f"unknown optimizer '{cfg.name}'", "optim.name")
