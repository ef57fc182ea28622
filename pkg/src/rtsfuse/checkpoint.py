"""Versioned binary checkpoint format for model weights.

Layout (all integers little-endian):

    magic      4 bytes   b"RTSF"
    version    u16       currently 1
    precision  u8        0 = fp32 storage, 1 = fp16 storage
    n_layers   u8
    meta_len   u32       length of the UTF-8 JSON sidecar that follows
    meta       bytes     free-form config sidecar (modality, window sizes,
                         fusion type, ...)
    layer records, each:
        kind   u8        1 = dense, 2 = conv1d, 3 = gru
        ndims  u8
        dims   ndims*u32
        arrays           raw little-endian scalars in canonical order

Canonical array order per kind: dense ``W, b`` with dims ``(out, in)``;
conv1d ``W, b`` with dims ``(filters, kernel, in_channels)``; gru
``W_ih, W_hh, b_ih, b_hh`` with dims ``(input_dim, hidden_dim)``.

Weights always dequantize to float32 on load; fp16 is a storage format
only.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, NumericFailureError
from .nn import GRU, Conv1D, Dense

MAGIC = b"RTSF"
FORMAT_VERSION = 1

_KIND_CODES = {"dense": 1, "conv1d": 2, "gru": 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_PRECISION_CODES = {"fp32": 0, "fp16": 1}
_CODE_PRECISIONS = {v: k for k, v in _PRECISION_CODES.items()}

FP16_MAX = float(np.finfo(np.float16).max)


def _layer_dims(layer):
    if layer.kind == "dense":
        return (layer.out_dim, layer.in_dim)
    if layer.kind == "conv1d":
        return (layer.filters, layer.kernel, layer.in_channels)
    if layer.kind == "gru":
        return (layer.input_dim, layer.hidden_dim)
    raise CheckpointError(f"unknown layer kind {layer.kind!r}")


def _layer_arrays(layer):
    return [arr for _, arr in layer.named_parameters()]


def _array_shapes(kind, dims):
    if kind == "dense":
        out, inp = dims
        return [(out, inp), (out,)]
    if kind == "conv1d":
        f, k, c = dims
        return [(f, k, c), (f,)]
    if kind == "gru":
        i, h = dims
        return [(3 * h, i), (3 * h, h), (3 * h,), (3 * h,)]
    raise CheckpointError(f"unknown layer kind {kind!r}")


def write_checkpoint(path, layers, meta=None, precision="fp32"):
    """Serialize ``layers`` (nn layer objects) plus a JSON sidecar."""
    if precision not in _PRECISION_CODES:
        raise CheckpointError(f"unknown precision {precision!r}")
    scalar = "<f2" if precision == "fp16" else "<f4"
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<HBB", FORMAT_VERSION, _PRECISION_CODES[precision], len(layers)),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
    ]
    for layer in layers:
        dims = _layer_dims(layer)
        parts.append(struct.pack("<BB", _KIND_CODES[layer.kind], len(dims)))
        parts.append(struct.pack(f"<{len(dims)}I", *dims))
        for arr in _layer_arrays(layer):
            parts.append(np.ascontiguousarray(arr).astype(scalar).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_checkpoint(path):
    """Read a checkpoint into ``(records, meta, precision)``.

    ``records`` is a list of ``(kind, dims, arrays)`` with float32 arrays
    regardless of the storage precision.
    """
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    version, prec_code, n_layers = struct.unpack_from("<HBB", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if prec_code not in _CODE_PRECISIONS:
        raise CheckpointError(f"{path}: unknown precision code {prec_code}")
    precision = _CODE_PRECISIONS[prec_code]
    scalar = np.dtype("<f2" if precision == "fp16" else "<f4")
    (meta_len,) = struct.unpack_from("<I", blob, 8)
    off = 12
    meta = json.loads(blob[off : off + meta_len].decode("utf-8"))
    off += meta_len

    records = []
    for _ in range(n_layers):
        kind_code, ndims = struct.unpack_from("<BB", blob, off)
        off += 2
        if kind_code not in _CODE_KINDS:
            raise CheckpointError(f"{path}: unknown layer kind code {kind_code}")
        kind = _CODE_KINDS[kind_code]
        dims = struct.unpack_from(f"<{ndims}I", blob, off)
        off += 4 * ndims
        arrays = []
        for shape in _array_shapes(kind, dims):
            count = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype=scalar, count=count, offset=off)
            off += count * scalar.itemsize
            arrays.append(arr.astype(np.float32).reshape(shape))
        records.append((kind, tuple(int(d) for d in dims), arrays))
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return records, meta, precision


def restore_layers(records, dtype=np.float32):
    """Materialize nn layer objects from checkpoint records."""
    layers = []
    for kind, dims, arrays in records:
        if kind == "dense":
            layer = Dense(dims[1], dims[0], dtype=dtype)
        elif kind == "conv1d":
            layer = Conv1D(dims[2], dims[0], dims[1], dtype=dtype)
        else:
            layer = GRU(dims[0], dims[1], dtype=dtype)
        for (_, param), arr in zip(layer.named_parameters(), arrays):
            param[...] = arr.astype(dtype)
        layers.append(layer)
    return layers


def validate_records(records, expected):
    """Check record kinds/dims against ``expected`` ``[(kind, dims), ...]``."""
    got = [(kind, dims) for kind, dims, _ in records]
    if got != [(k, tuple(d)) for k, d in expected]:
        raise CheckpointError(
            f"checkpoint layout {got} does not match declared model config "
            f"{[(k, tuple(d)) for k, d in expected]}"
        )


def quantize_fp16(src_path, dst_path):
    """Round-trip an fp32 checkpoint through fp16 storage.

    Raises NumericFailureError listing every tensor whose magnitude
    exceeds the fp16 range.
    """
    records, meta, precision = read_checkpoint(src_path)
    if precision != "fp32":
        raise CheckpointError(f"{src_path}: expected an fp32 checkpoint, got {precision}")
    offenders = []
    for li, (kind, dims, arrays) in enumerate(records):
        names = _array_names(kind)
        for arr, name in zip(arrays, names):
            if arr.size and float(np.max(np.abs(arr))) > FP16_MAX:
                offenders.append(f"layer{li}.{name} ({kind}{dims})")
    if offenders:
        raise NumericFailureError(
            "fp16 overflow in tensors: " + ", ".join(offenders)
        )
    layers = restore_layers(records)
    write_checkpoint(dst_path, layers, meta=meta, precision="fp16")
    return dst_path


def _array_names(kind):
    if kind == "gru":
        return ["W_ih", "W_hh", "b_ih", "b_hh"]
    return ["W", "b"]
