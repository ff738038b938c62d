import numpy as np
import pytest

from src.core import functional as F
from src.core.grad_check import grad_check, grad_check_leaves
from src.core.tensor import Tensor
from src.utils.errors import ContractError


def _bad_square(x: Tensor) -> Tensor:
    # derivative off by a factor of two
    return F._make("bad_square", x.data * x.data, (x,), lambda g: (g * x.data,))


def test_correct_gradients_pass(make_tensor):
    x = make_tensor(3, 4)
    w = make_tensor(4, 2)
    error = grad_check(lambda: F.reduce_sum(F.tanh(F.matmul(x, w))), {"x": x, "w": w})
    assert error < 1e-5


def test_wrong_backward_is_detected():
    x = Tensor(np.array([1.0, 2.0, -1.5]))
    errors = grad_check_leaves(lambda: F.reduce_sum(_bad_square(x)), {"x": x})
    assert errors["x"] > 0.1


def test_leaf_flags_and_values_are_restored(make_tensor):
    x = make_tensor(2, 2)
    before = x.data.copy()
    grad_check(lambda: F.reduce_sum(F.mul(x, x)), {"x": x})
    assert not x.requires_grad
    assert x.grad is None
    np.testing.assert_array_equal(x.data, before)


def test_single_precision_is_rejected():
    x = Tensor(np.ones(3, dtype=np.float32))
    with pytest.raises(ContractError):
        grad_check(lambda: F.reduce_sum(x), {"x": x})


def test_non_deterministic_function_is_rejected(make_tensor):
    x = make_tensor(3)
    calls = []

    def noisy():
        calls.append(None)
        return F.reduce_sum(F.mul(x, float(len(calls))))

    with pytest.raises(ContractError):
        grad_check(noisy, {"x": x})


def test_non_scalar_function_is_rejected(make_tensor):
    x = make_tensor(3)
    with pytest.raises(ContractError):
        grad_check(lambda: F.mul(x, 2.0), {"x": x})
