"""
Dense tensor storage and the tape that records differentiable primitives.

A `Tensor` wraps a numpy array tagged single or double precision. Primitives in
`src.core.functional` record themselves on the tape that is active on the
current thread; `Tape.backward` replays the records in reverse order and
accumulates gradients into every leaf that requires them.
"""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.constants import PRECISION_DOUBLE, PRECISION_SINGLE
from src.utils.errors import ContractError
from src.utils.logger_config import get_logger

logger = get_logger(__name__)

DTYPES = {
    PRECISION_SINGLE: np.float32,
    PRECISION_DOUBLE: np.float64,
}

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


def dtype_for(precision: str) -> type:
    """
    Map a precision tag to its numpy dtype

    Args:
        precision: 'single' or 'double'

    Returns:
        type: numpy scalar type
    """
    try:
        return DTYPES[precision]
    except KeyError:
        raise ContractError(f"unknown precision '{precision}'") from None


class Tensor:
    """
    Dense n-dimensional array with a precision tag and an optional gradient slot.

    The data buffer is treated as immutable once a tensor has been used by a
    primitive; only `grad` changes during a backward pass.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data: ArrayLike, precision: Optional[str] = None,
                 requires_grad: bool = False, name: Optional[str] = None):
        """
        Args:
            data: Array contents; float arrays keep their precision unless one is given
            precision: Optional 'single' or 'double'
            requires_grad: Whether backward should populate `grad`
            name: Optional label used in error messages and checkpoints
        """
        if precision is not None:
            dtype = dtype_for(precision)
        elif isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
            dtype = data.dtype.type
        else:
            dtype = np.float32
        self.data: np.ndarray = np.ascontiguousarray(np.asarray(data, dtype=dtype))
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def precision(self) -> str:
        return PRECISION_DOUBLE if self.data.dtype == np.float64 else PRECISION_SINGLE

    def item(self) -> float:
        """Value of a single-element tensor"""
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Copy of the data buffer"""
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def astype(self, precision: str) -> "Tensor":
        """Copy converted to another precision, keeping requires_grad"""
        return Tensor(self.data.astype(dtype_for(precision)), requires_grad=self.requires_grad,
                      name=self.name)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, precision={self.precision}{label})"

    # Operator sugar; the primitives live in functional.py
    def __add__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.add(self, other)

    def __radd__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.add(other, self)

    def __sub__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.sub(self, other)

    def __rsub__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.sub(other, self)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.mul(self, other)

    def __rmul__(self, other: Union["Tensor", float]) -> "Tensor":
        from src.core import functional as F
        return F.mul(other, self)

    def __neg__(self) -> "Tensor":
        from src.core import functional as F
        return F.negate(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.core import functional as F
        return F.matmul(self, other)


@dataclass
class TapeEntry:
    """One recorded primitive application"""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """
    Ordered record of primitive applications on one thread.

    Use as a context manager; primitives executed inside the block are recorded
    when at least one of their inputs requires a gradient.
    """

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._produced: Dict[int, int] = {}

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor,
               backward: BackwardFn) -> None:
        self._produced[id(output)] = len(self.entries)
        self.entries.append(TapeEntry(op, inputs, output, backward))

    def backward(self, output: Tensor) -> None:
        """
        Populate gradients of `output` with respect to every recorded leaf.

        Gradients accumulate into existing `grad` buffers, so two calls without
        zeroing add up.

        Args:
            output: Scalar tensor produced through recorded primitives
        """
        if output.size != 1:
            raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
        if id(output) not in self._produced:
            if output.requires_grad:
                _accumulate_leaf(output, np.ones_like(output.data))
            return

        grads: Dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        leaves: Dict[int, Tensor] = {}
        last = self._produced[id(output)]
        for entry in reversed(self.entries[:last + 1]):
            g = grads.pop(id(entry.output), None)
            if g is None:
                continue
            input_grads = entry.backward(g)
            for tensor, tensor_grad in zip(entry.inputs, input_grads):
                if tensor_grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + tensor_grad
                else:
                    grads[key] = tensor_grad
                if key not in self._produced:
                    leaves[key] = tensor

        for key, leaf in leaves.items():
            if key in grads:
                _accumulate_leaf(leaf, grads[key])
        logger.debug(f"Backward replayed {last + 1} entries into {len(leaves)} leaves")


def _accumulate_leaf(leaf: Tensor, grad: np.ndarray) -> None:
    grad = np.asarray(grad, dtype=leaf.data.dtype).reshape(leaf.shape)
    leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad


_local = threading.local()


def _stack() -> List[Tape]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def current_tape() -> Optional[Tape]:
    """Innermost active tape on this thread, if any"""
    stack = _stack()
    return stack[-1] if stack else None


def backward(output: Tensor, tape: Tape) -> None:
    """Functional form of `Tape.backward`"""
    tape.backward(output)


def zeros(shape: Sequence[int], precision: str = PRECISION_SINGLE) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype_for(precision)))


def parameter(data: np.ndarray, name: Optional[str] = None) -> Tensor:
    """Leaf tensor that requires a gradient"""
    return Tensor(data, requires_grad=True, name=name)
