"""
Central finite-difference gradient checking against the tape's analytic gradients.
"""

from typing import Callable, Dict, Mapping

import numpy as np

from src.core.tensor import Tape, Tensor
from src.utils.constants import GRADCHECK_EPS, PRECISION_DOUBLE
from src.utils.errors import ContractError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

ScalarFn = Callable[[], Tensor]


def _evaluate(f: ScalarFn) -> float:
    out = f()
    if out.size != 1:
        raise ContractError(f"gradient check needs a scalar function, got shape {out.shape}")
    return float(out.data.reshape(()))


def grad_check_leaves(f: ScalarFn, leaves: Mapping[str, Tensor],
                      eps: float = GRADCHECK_EPS) -> Dict[str, float]:
    """
    Compare analytic and central-difference gradients leaf by leaf

    The error of one element is |analytic - numeric| / max(1, |analytic|, |numeric|).

    Args:
        f: Deterministic closure computing a scalar from the leaves
        leaves: Named double-precision tensors that f reads
        eps: Finite-difference step

    Returns:
        Dict[str, float]: Maximum relative error per leaf name
    """
    for name, leaf in leaves.items():
        if leaf.precision != PRECISION_DOUBLE:
            raise ContractError(f"gradient check needs double precision, '{name}' is {leaf.precision}")

    first = _evaluate(f)
    second = _evaluate(f)
    if first != second:
        raise ContractError(f"function is not deterministic ({first!r} != {second!r})")

    saved = {name: leaf.requires_grad for name, leaf in leaves.items()}
    for leaf in leaves.values():
        leaf.requires_grad = True
        leaf.zero_grad()
    try:
        with Tape() as tape:
            out = f()
        tape.backward(out)
        analytic = {name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
                    for name, leaf in leaves.items()}
    finally:
        for name, leaf in leaves.items():
            leaf.zero_grad()
            leaf.requires_grad = saved[name]

    errors: Dict[str, float] = {}
    for name, leaf in leaves.items():
        flat = leaf.data.reshape(-1)
        grad = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            plus = _evaluate(f)
            flat[i] = original - eps
            minus = _evaluate(f)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * eps)
            scale = max(1.0, abs(grad[i]), abs(numeric))
            worst = max(worst, abs(grad[i] - numeric) / scale)
        errors[name] = worst
        logger.debug(f"grad check {name}: {flat.size} elements, max rel error {worst:.3e}")
    return errors


def grad_check(f: ScalarFn, leaves: Mapping[str, Tensor], eps: float = GRADCHECK_EPS) -> float:
    """
    Maximum relative gradient error over every element of every leaf

    Args:
        f: Deterministic closure computing a scalar from the leaves
        leaves: Named double-precision tensors that f reads
        eps: Finite-difference step

    Returns:
        float: Largest relative error found
    """
    errors = grad_check_leaves(f, leaves, eps)
    return max(errors.values()) if errors else 0.0
