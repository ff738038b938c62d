import math

import numpy as np
import pytest

from src.core.tensor import Tensor
from src.pipeline.optim import SGD, Adam, build_optimizer, learning_rate
from src.utils.config import OptimConfig
from src.utils.errors import ConfigError, DimensionError


def _param(values, grad=None):
    t = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
    if grad is not None:
        t.grad = np.asarray(grad, dtype=np.float64)
    return t


class TestSchedule:
    def test_constant_before_annealing(self):
        assert all(learning_rate(s, 100, 1e-3, 1e-6, 0.25) == 1e-3 for s in range(75))

    def test_anneals_to_the_minimum(self):
        rates = [learning_rate(s, 100, 1e-3, 1e-6, 0.25) for s in range(100)]
        assert rates[-1] == pytest.approx(1e-6)
        assert all(a >= b for a, b in zip(rates[75:], rates[76:]))

    def test_midpoint_is_halfway(self):
        assert learning_rate(62, 84, 1.0, 0.0, 0.25) == 1.0
        assert learning_rate(73, 84, 1.0, 0.0, 0.25) == pytest.approx(0.5)

    def test_zero_fraction_keeps_the_base_rate(self):
        assert learning_rate(99, 100, 0.1, 0.0, 0.0) == 0.1

    def test_zero_base_rate_stays_zero(self):
        assert all(learning_rate(s, 10, 0.0, 1e-7, 0.5) == 0.0 for s in range(10))


class TestSGD:
    def test_momentum_and_coupled_decay(self):
        w = _param([1.0, -2.0], grad=[0.5, 0.5])
        opt = SGD({"w": w}, momentum=0.9, weight_decay=0.1)
        opt.step(0.1)
        v1 = np.array([0.5, 0.5]) + 0.1 * np.array([1.0, -2.0])
        expected = np.array([1.0, -2.0]) - 0.1 * v1
        np.testing.assert_allclose(w.data, expected, rtol=1e-14)

        w.grad = np.array([0.0, 1.0])
        opt.step(0.1)
        v2 = 0.9 * v1 + np.array([0.0, 1.0]) + 0.1 * expected
        np.testing.assert_allclose(w.data, expected - 0.1 * v2, rtol=1e-14)

    def test_parameters_without_gradient_are_untouched(self):
        w = _param([1.0, 2.0])
        SGD({"w": w}, weight_decay=0.5).step(1.0)
        np.testing.assert_array_equal(w.data, [1.0, 2.0])


class TestAdam:
    def test_first_step_moves_by_the_rate(self):
        w = _param([1.0, -1.0, 0.5], grad=[2.0, -3.0, 0.25])
        Adam({"w": w}, eps=0.0).step(0.01)
        np.testing.assert_allclose(w.data, [0.99, -0.99, 0.49], rtol=1e-12)

    def test_bias_corrected_second_step(self):
        w = _param([0.0], grad=[1.0])
        opt = Adam({"w": w}, betas=(0.9, 0.999), eps=1e-8)
        opt.step(0.1)
        w.grad = np.array([3.0])
        opt.step(0.1)
        m = 0.9 * 0.1 * 1.0 + 0.1 * 3.0
        v = 0.999 * 0.001 * 1.0 + 0.001 * 9.0
        m_hat = m / (1 - 0.9 ** 2)
        v_hat = v / (1 - 0.999 ** 2)
        step_one = 1.0 / (1.0 + 1e-8)
        expected = -0.1 * step_one - 0.1 * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert w.data[0] == pytest.approx(expected, rel=1e-12)

    def test_decay_is_decoupled_from_the_moments(self):
        w = _param([2.0, -4.0], grad=[0.0, 0.0])
        opt = Adam({"w": w}, weight_decay=0.1)
        opt.step(0.5)
        np.testing.assert_allclose(w.data, [2.0 * 0.95, -4.0 * 0.95], rtol=1e-12)
        np.testing.assert_array_equal(opt.state["m"]["w"], [0.0, 0.0])


@pytest.mark.parametrize("name", ["sgd", "adam"])
def test_zero_rate_leaves_parameters_unchanged(name):
    w = _param([1.0, 2.0, 3.0], grad=[1.0, -1.0, 5.0])
    opt = build_optimizer(OptimConfig(name=name, weight_decay=0.1), {"w": w})
    for _ in range(3):
        opt.step(0.0)
    np.testing.assert_array_equal(w.data, [1.0, 2.0, 3.0])
    assert opt.steps == 3


@pytest.mark.parametrize("name", ["sgd", "adam"])
def test_state_round_trip_continues_identically(name):
    cfg = OptimConfig(name=name, weight_decay=0.01)
    w = _param([1.0, -1.0], grad=[0.3, 0.7])
    opt = build_optimizer(cfg, {"w": w})
    opt.step(0.1)

    clone = _param(w.data.copy(), grad=[0.3, 0.7])
    restored = build_optimizer(cfg, {"w": clone})
    restored.load_state_dict(opt.state_dict())
    assert restored.steps == 1

    opt.step(0.1)
    restored.step(0.1)
    np.testing.assert_array_equal(clone.data, w.data)


def test_state_dict_keys():
    w = _param([1.0], grad=[1.0])
    opt = Adam({"w": w})
    opt.step(0.1)
    assert sorted(opt.state_dict()) == ["m/w", "steps", "v/w"]


def test_mismatched_state_is_rejected():
    opt = Adam({"w": _param([1.0, 2.0])})
    with pytest.raises(ConfigError):
        opt.load_state_dict({"m/other": np.zeros(2)})
    with pytest.raises(DimensionError):
        opt.load_state_dict({"m/w": np.zeros(3)})


def test_unknown_optimizer():
    with pytest.raises(ConfigError):
        build_optimizer(OptimConfig(name="lbfgs"), {})
