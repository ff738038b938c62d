"""
Tensor engine package.

This package holds the numeric core every model component is built on: a
precision-tagged tensor, the tape that records differentiable primitives, and
a finite-difference gradient checker.

Modules:
    tensor.py: Tensor storage, Tape recording and reverse replay
    functional.py: Differentiable primitives (matmul, softmax, layer_norm, ...)
    grad_check.py: Central-difference gradient checking

Classes:
    Tensor: Dense array with precision tag and gradient slot
    Tape: Context manager recording primitive applications

Usage Example:
    ```python
    from src.core import functional as F
    from src.core.tensor import Tape, parameter

    w = parameter(np.ones((3, 2)))
    with Tape() as tape:
        loss = F.reduce_sum(F.matmul(x, w))
    tape.backward(loss)
    print(w.grad)
    ```
"""

from . import functional
from .grad_check import grad_check, grad_check_leaves
from .tensor import Tape, Tensor, backward, current_tape, parameter, zeros

__all__ = [
    'functional',
    'grad_check', 'grad_check_leaves',
    'Tape', 'Tensor', 'backward', 'current_tape', 'parameter', 'zeros'
]
