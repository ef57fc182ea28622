"""Binary checkpoint format round-trips and fp16 quantization."""

import numpy as np
import pytest

from rtsfuse.checkpoint import (
    quantize_fp16,
    read_checkpoint,
    restore_layers,
    validate_records,
    write_checkpoint,
)
from rtsfuse.errors import CheckpointError, NumericFailureError
from rtsfuse.nn import GRU, Conv1D, Dense


def _make_layers(seed=0):
    rng = np.random.default_rng(seed)
    return [
        Conv1D(31, 16, 5, rng=rng),
        Dense(320, 128, rng=rng),
        GRU(6, 32, rng=rng),
        Dense(32, 2, rng=rng),
    ]


def test_fp32_roundtrip_exact(tmp_path):
    layers = _make_layers()
    path = tmp_path / "model.rtsf"
    write_checkpoint(path, layers, meta={"modality": "gesture", "n_conv": 1})
    records, meta, precision = read_checkpoint(path)
    assert precision == "fp32"
    assert meta == {"modality": "gesture", "n_conv": 1}
    restored = restore_layers(records)
    for orig, back in zip(layers, restored):
        assert orig.kind == back.kind
        for (_, a), (_, b) in zip(orig.named_parameters(), back.named_parameters()):
            np.testing.assert_array_equal(a, b)


def test_magic_and_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "bad.rtsf"
    path.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(CheckpointError, match="magic"):
        read_checkpoint(path)
    good = tmp_path / "good.rtsf"
    write_checkpoint(good, [Dense(2, 2, rng=np.random.default_rng(0))])
    good.write_bytes(good.read_bytes() + b"xx")
    with pytest.raises(CheckpointError, match="trailing"):
        read_checkpoint(good)


def test_validate_records_against_config(tmp_path):
    path = tmp_path / "m.rtsf"
    write_checkpoint(path, [Dense(4, 3, rng=np.random.default_rng(1))])
    records, _, _ = read_checkpoint(path)
    validate_records(records, [("dense", (3, 4))])
    with pytest.raises(CheckpointError, match="does not match"):
        validate_records(records, [("dense", (3, 5))])
    with pytest.raises(CheckpointError, match="does not match"):
        validate_records(records, [("gru", (3, 4))])


def test_fp16_roundtrip_is_fp16_rounding(tmp_path):
    layers = _make_layers(seed=4)
    src = tmp_path / "fp32.rtsf"
    dst = tmp_path / "fp16.rtsf"
    write_checkpoint(src, layers)
    quantize_fp16(src, dst)
    records16, _, precision = read_checkpoint(dst)
    assert precision == "fp16"
    for orig, (kind, dims, arrays) in zip(layers, records16):
        for (_, a), b in zip(orig.named_parameters(), arrays):
            np.testing.assert_array_equal(b, a.astype(np.float16).astype(np.float32))


def test_fp16_exact_for_representable_values(tmp_path):
    layer = Dense(2, 2)
    layer.W[...] = [[0.5, -0.25], [1.0, 2.0]]  # exactly representable in fp16
    layer.b[...] = [0.125, -8.0]
    src, dst = tmp_path / "a.rtsf", tmp_path / "b.rtsf"
    write_checkpoint(src, [layer])
    quantize_fp16(src, dst)
    (record,) = read_checkpoint(dst)[0]
    np.testing.assert_array_equal(record[2][0], layer.W)
    np.testing.assert_array_equal(record[2][1], layer.b)


def test_fp16_file_size_is_about_half(tmp_path):
    layers = _make_layers(seed=5)
    src, dst = tmp_path / "a.rtsf", tmp_path / "b.rtsf"
    write_checkpoint(src, layers)
    quantize_fp16(src, dst)
    ratio = dst.stat().st_size / src.stat().st_size
    assert 0.45 < ratio < 0.55


def test_fp16_overflow_lists_offending_tensors(tmp_path):
    layer = Dense(2, 2)
    layer.W[...] = [[1e5, 0.0], [0.0, 0.0]]  # exceeds fp16 max 65504
    src, dst = tmp_path / "a.rtsf", tmp_path / "b.rtsf"
    write_checkpoint(src, [layer])
    with pytest.raises(NumericFailureError, match="layer0.W"):
        quantize_fp16(src, dst)


def test_quantize_requires_fp32_source(tmp_path):
    src, mid, dst = tmp_path / "a.rtsf", tmp_path / "b.rtsf", tmp_path / "c.rtsf"
    write_checkpoint(src, [Dense(2, 2, rng=np.random.default_rng(2))])
    quantize_fp16(src, mid)
    with pytest.raises(CheckpointError, match="expected an fp32"):
        quantize_fp16(mid, dst)


def test_write_is_deterministic(tmp_path):
    layers = _make_layers(seed=6)
    a, b = tmp_path / "a.rtsf", tmp_path / "b.rtsf"
    write_checkpoint(a, layers, meta={"x": 1})
    write_checkpoint(b, layers, meta={"x": 1})
    assert a.read_bytes() == b.read_bytes()
