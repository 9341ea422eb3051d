"""Versioned binary weight checkpoints.

Layout (all integers little-endian u32)::

    magic b"CRKW" | version | num_branches | num_classes | num_blobs
    per blob: name_len | name (utf-8) | ndim | dims... | float32 data (little-endian)

Conv weights are stored as ``(3, 3, c_in, c_out)``, so the architecture can be
recovered from the blob shapes alone.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpoint
from .model import ArchitectureSpec, Model

MAGIC = b"CRKW"
VERSION = 1


def encode(model: Model) -> bytes:
    state = model.state_dict()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIII", VERSION, model.n_branches, model.num_classes, len(state)))
    for name, value in state.items():
        raw = name.encode()
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", value.ndim))
        buf.write(struct.pack(f"<{value.ndim}I", *value.shape))
        buf.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return buf.getvalue()


def decode(data: bytes) -> tuple[dict, int, int]:
    """Return ``(state, num_branches, num_classes)``."""
    if data[:4] != MAGIC:
        raise IncompatibleCheckpoint("not a weight checkpoint (bad magic)")
    try:
        version, n_branches, n_classes, n_blobs = struct.unpack_from("<IIII", data, 4)
        if version != VERSION:
            raise IncompatibleCheckpoint(f"unsupported checkpoint version {version}")
        pos = 20
        state = {}
        for _ in range(n_blobs):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos : pos + n].decode()
            pos += n
            (ndim,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            count = int(np.prod(shape))
            if pos + 4 * count > len(data):
                raise IncompatibleCheckpoint(f"checkpoint truncated inside blob {name!r}")
            state[name] = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape).astype(np.float32)
            pos += 4 * count
    except struct.error as exc:
        raise IncompatibleCheckpoint(f"checkpoint truncated: {exc}") from exc
    return state, n_branches, n_classes


def infer_architecture(state: dict, branch: int = 0) -> ArchitectureSpec:
    channels = []
    for i in range(1, 8):
        key = f"b{branch}.block{i}.conv.weight"
        if key not in state:
            raise IncompatibleCheckpoint(f"checkpoint lacks {key}")
        channels.append(state[key].shape[3])
    in_channels = state[f"b{branch}.block1.conv.weight"].shape[2]
    return ArchitectureSpec(channels=tuple(channels), in_channels=in_channels)


def save(model: Model, path) -> None:
    Path(path).write_bytes(encode(model))


def load(path) -> Model:
    state, n_branches, n_classes = decode(Path(path).read_bytes())
    arch = infer_architecture(state)
    model = Model(arch, n_branches=n_branches, num_classes=n_classes, seed=0)
    try:
        model.load_state_dict(state)
    except ValueError as exc:
        raise IncompatibleCheckpoint(str(exc)) from exc
    return model
