import numpy as np
import pytest

from src.entities.model import build_model
from src.pipeline.optim import build_optimizer
from src.utils.checkpoint import (
    apply_parameters, load_checkpoint, read_tensors, save_checkpoint, write_tensors
)
from src.utils.errors import ContractError, DimensionError, ParseError
from tests.conftest import tiny_config


def test_tensor_round_trip(tmp_path):
    tensors = {
        "a": np.arange(6, dtype=np.float32).reshape(2, 3),
        "b": np.array([1.5, -2.0]),
        "bytes": np.frombuffer(b"hello", dtype=np.uint8),
        "counter": np.array([7], dtype=np.int64),
        "scalar": np.array(3.0, dtype=np.float32),
    }
    path = write_tensors(tmp_path / "t.urm", tensors)
    restored = read_tensors(path)
    assert list(restored) == list(tensors)
    for name, array in tensors.items():
        assert restored[name].dtype == array.dtype
        np.testing.assert_array_equal(restored[name], array)


def test_unsupported_dtype(tmp_path):
    with pytest.raises(ContractError):
        write_tensors(tmp_path / "t.urm", {"c": np.zeros(2, dtype=np.complex64)})


def test_checkpoint_restores_model_and_optimizer(tmp_path):
    config = tiny_config("ctp")
    model = build_model(config)
    params = model.named_parameters()
    for tensor in params.values():
        tensor.grad = np.ones_like(tensor.data)
    optimizer = build_optimizer(config.optim, params)
    optimizer.step(1e-3)

    path = save_checkpoint(tmp_path / "run" / "checkpoint.urm", model, config, optimizer, step=5)
    checkpoint = load_checkpoint(path)
    assert checkpoint.step == 5
    assert checkpoint.config == config
    assert checkpoint.optimizer["steps"].tolist() == [1]
    assert set(checkpoint.optimizer) == set(optimizer.state_dict())

    fresh = build_model(checkpoint.config, seed=99)
    apply_parameters(fresh, checkpoint.parameters)
    for name, tensor in fresh.named_parameters().items():
        np.testing.assert_array_equal(tensor.data, params[name].data)


def test_saving_twice_gives_identical_bytes(tmp_path):
    config = tiny_config("tb")
    model = build_model(config)
    first = save_checkpoint(tmp_path / "a.urm", model, config)
    second = save_checkpoint(tmp_path / "b.urm", model, config)
    assert first.read_bytes() == second.read_bytes()


def test_truncated_checkpoint(tmp_path):
    config = tiny_config()
    path = save_checkpoint(tmp_path / "c.urm", build_model(config), config)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(ParseError) as info:
        load_checkpoint(path)
    assert info.value.offset is not None


def test_bad_magic(tmp_path):
    path = tmp_path / "c.urm"
    path.write_bytes(b"URMF\x01\x00\x00\x00\x00\x00\x00\x00")
    with pytest.raises(ParseError):
        read_tensors(path)


def test_unknown_dtype_code(tmp_path):
    path = write_tensors(tmp_path / "c.urm", {"x": np.zeros(1, dtype=np.float32)})
    raw = bytearray(path.read_bytes())
    raw[12 + 2 + 1] = 9
    path.write_bytes(bytes(raw))
    with pytest.raises(ParseError) as info:
        read_tensors(path)
    assert info.value.offset == 15


def test_missing_configuration(tmp_path):
    path = write_tensors(tmp_path / "c.urm", {"param/x": np.zeros(1, dtype=np.float32)})
    with pytest.raises(ParseError):
        load_checkpoint(path)


def test_shape_mismatch(tmp_path):
    small = tiny_config()
    wide = tiny_config(**{"model.width": 12})
    path = save_checkpoint(tmp_path / "c.urm", build_model(small), small)
    with pytest.raises(DimensionError):
        apply_parameters(build_model(wide), load_checkpoint(path).parameters)


def test_parameter_names_must_match(tmp_path):
    config = tiny_config("tb")
    stored = load_checkpoint(save_checkpoint(tmp_path / "c.urm", build_model(config), config)).parameters
    implicit = build_model(tiny_config("implicit"))
    with pytest.raises(ContractError):
        apply_parameters(implicit, stored)
    apply_parameters(implicit, stored, strict=False)
