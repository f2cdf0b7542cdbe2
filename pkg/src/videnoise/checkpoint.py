"""Binary checkpoint container for model parameters and optimizer state.

Layout (all little-endian): magic "STNC", u32 format version (1), u32
tensor count, then per tensor: u16 name length, UTF-8 name, u8 dtype code
(0 = float32), u8 rank, one u64 per dimension, raw float32 payload.

Adam moments ride along under the parameter name suffixed ".adam.m" /
".adam.v"; the step counter is a 1-element tensor named "adam.t".  Batch
norm running statistics are stored as plain tensors under their dotted
buffer names and carry no optimizer state.  Writes go to a temp file that
is atomically renamed into place.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .optim import AdamState
from .pipeline import (
    PipelineParams,
    pipeline_from_arrays,
    pipeline_named_buffers,
    pipeline_named_parameters,
)

__all__ = [
    "CheckpointError",
    "save_tensors",
    "load_tensors",
    "save_checkpoint",
    "load_checkpoint",
]

MAGIC = b"STNC"
VERSION = 1
DTYPE_F32 = 0


class CheckpointError(Exception):
    """Raised when a checkpoint file is malformed or incomplete."""


def save_tensors(tensors: dict[str, np.ndarray], path: Union[str, Path]) -> None:
    """Write named float32 arrays in dict order, atomically."""
    path = Path(path)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(tensors))
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<BB", DTYPE_F32, data.ndim)
        blob += struct.pack(f"<{data.ndim}Q", *data.shape)
        blob += data.tobytes()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_tensors(path: Union[str, Path]) -> dict[str, np.ndarray]:
    """Read a checkpoint back as name -> writable float32 array, in file order."""
    path = Path(path)
    blob = path.read_bytes()
    offset = 0

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CheckpointError(f"truncated checkpoint: {path}")
        piece = blob[offset : offset + n]
        offset += n
        return piece

    if take(4) != MAGIC:
        raise CheckpointError(f"bad magic bytes (not a checkpoint): {path}")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}: {path}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2))
        if dtype_code != DTYPE_F32:
            raise CheckpointError(f"unknown dtype code {dtype_code} for {name!r}: {path}")
        dims = struct.unpack(f"<{rank}Q", take(8 * rank))
        n_elems = 1
        for d in dims:
            n_elems *= d
        payload = take(4 * n_elems)
        arr = np.frombuffer(payload, dtype="<f4", count=n_elems).reshape(dims)
        out[name] = arr.astype(np.float32)
    if offset != len(blob):
        raise CheckpointError(f"trailing bytes after last tensor: {path}")
    return out


def _flatten(params: PipelineParams, state: Optional[AdamState]) -> dict[str, np.ndarray]:
    named = pipeline_named_parameters(params)
    flat: dict[str, np.ndarray] = {name: p.data for name, p in named.items()}
    for name, buf in pipeline_named_buffers(params).items():
        flat[name] = buf
    if state is not None:
        for name in named:
            flat[name + ".adam.m"] = state.m[name]
            flat[name + ".adam.v"] = state.v[name]
        flat["adam.t"] = np.array([state.t], dtype=np.float32)
    return flat


def save_checkpoint(
    params: PipelineParams,
    path: Union[str, Path],
    state: Optional[AdamState] = None,
) -> None:
    """Persist the pipeline (and optionally Adam state) in canonical order."""
    save_tensors(_flatten(params, state), path)


def load_checkpoint(path: Union[str, Path]) -> tuple[PipelineParams, Optional[AdamState]]:
    """Rebuild the pipeline, plus Adam state when the file carries one."""
    arrays = load_tensors(path)
    try:
        params = pipeline_from_arrays(arrays)
    except KeyError as missing:
        raise CheckpointError(f"checkpoint missing tensor {missing}: {path}") from None
    state: Optional[AdamState] = None
    if "adam.t" in arrays:
        state = AdamState(t=int(arrays["adam.t"][0]))
        for name in pipeline_named_parameters(params):
            try:
                state.m[name] = arrays[name + ".adam.m"]
                state.v[name] = arrays[name + ".adam.v"]
            except KeyError as missing:
                raise CheckpointError(
                    f"checkpoint missing optimizer tensor {missing}: {path}"
                ) from None
    return params, state
