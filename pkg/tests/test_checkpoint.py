"""Checkpoint container: round trips, corruption guards, state fidelity."""

import numpy as np
import pytest

from videnoise.checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_tensors,
    save_checkpoint,
    save_tensors,
)
from videnoise.optim import adam_state_for, adam_step
from videnoise.pipeline import (
    pipeline_forward,
    pipeline_init,
    pipeline_named_buffers,
    pipeline_named_parameters,
)
from videnoise.tensor import GradTape, Tensor
from videnoise.train import mse_loss


def trained_a_little(seed=0):
    """Params plus nonzero Adam state after one real training step."""
    params = pipeline_init(seed)
    named = pipeline_named_parameters(params)
    state = adam_state_for(named)
    rng = np.random.default_rng(seed)
    frames = [Tensor(rng.random((3, 8, 8), dtype=np.float32)) for _ in range(5)]
    tape = GradTape()
    out = pipeline_forward(frames, params, mode="train", tape=tape)
    tape.backward(mse_loss(out, frames[2], tape))
    adam_step(named, state, lr=1e-3)
    return params, state


def test_save_load_save_is_byte_identical(tmp_path):
    params, state = trained_a_little()
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_checkpoint(params, first, state)
    loaded_params, loaded_state = load_checkpoint(first)
    save_checkpoint(loaded_params, second, loaded_state)
    assert first.read_bytes() == second.read_bytes()


def test_round_trip_preserves_all_values(tmp_path):
    params, state = trained_a_little(1)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path, state)
    loaded_params, loaded_state = load_checkpoint(path)

    original = pipeline_named_parameters(params)
    restored = pipeline_named_parameters(loaded_params)
    assert list(original) == list(restored)
    for name in original:
        np.testing.assert_array_equal(original[name].data, restored[name].data)
        np.testing.assert_array_equal(state.m[name], loaded_state.m[name])
        np.testing.assert_array_equal(state.v[name], loaded_state.v[name])
    assert loaded_state.t == state.t

    for name, buf in pipeline_named_buffers(params).items():
        np.testing.assert_array_equal(buf, pipeline_named_buffers(loaded_params)[name])


def test_round_trip_preserves_eval_output_bit_exactly(tmp_path):
    params, _ = trained_a_little(2)
    rng = np.random.default_rng(3)
    frames = [Tensor(rng.random((3, 16, 16), dtype=np.float32)) for _ in range(5)]
    before = pipeline_forward(frames, params, mode="eval").data.tobytes()
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, path)
    loaded, state = load_checkpoint(path)
    assert state is None
    after = pipeline_forward(frames, loaded, mode="eval").data.tobytes()
    assert before == after


def test_corrupt_magic_names_path(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(pipeline_init(0), path)
    blob = bytearray(path.read_bytes())
    blob[0:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError) as excinfo:
        load_checkpoint(path)
    assert str(path) in str(excinfo.value)
    assert "magic" in str(excinfo.value)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(pipeline_init(0), path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_unsupported_version_rejected(tmp_path):
    path = tmp_path / "v9.ckpt"
    save_tensors({"x": np.zeros(3, dtype=np.float32)}, path)
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError) as excinfo:
        load_tensors(path)
    assert "version" in str(excinfo.value)


def test_missing_tensor_rejected(tmp_path):
    path = tmp_path / "partial.ckpt"
    params = pipeline_init(0)
    flat = {name: t.data for name, t in pipeline_named_parameters(params).items()}
    flat.pop("stage1.enc0.0.weight")
    save_tensors(flat, path)
    with pytest.raises(CheckpointError) as excinfo:
        load_checkpoint(path)
    assert "stage1.enc0.0.weight" in str(excinfo.value)


def test_tensor_names_and_order_preserved(tmp_path):
    tensors = {
        "zeta": np.arange(6, dtype=np.float32).reshape(2, 3),
        "alpha": np.array([1.0], dtype=np.float32),
        "mid.dotted.name": np.zeros((2, 2, 2), dtype=np.float32),
    }
    path = tmp_path / "names.ckpt"
    save_tensors(tensors, path)
    loaded = load_tensors(path)
    assert list(loaded) == list(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])
        assert loaded[name].dtype == np.float32


def test_atomic_write_leaves_no_temp_file(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(pipeline_init(0), path)
    leftovers = [p for p in tmp_path.iterdir() if p.name != "model.ckpt"]
    assert leftovers == []


def test_loaded_arrays_are_writable(tmp_path):
    path = tmp_path / "model.ckpt"
    save_tensors({"x": np.ones(4, dtype=np.float32)}, path)
    loaded = load_tensors(path)
    loaded["x"][0] = 5.0  # must not raise
    assert loaded["x"][0] == 5.0
