"""Binary checkpoint files.

Layout (all integers little-endian)::

    b"CMU1"
    u32 version
    u32 n, n bytes of UTF-8 header text (config, grid and training state)
    repeated until EOF:
        u32 n, n bytes of UTF-8 tensor name
        u32 rank
        rank x u64 dims
        prod(dims) x float32 values

Parameters come first in model order, then Adam moments named
``adam.m.<param>`` and ``adam.v.<param>``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from ..gridmap import GridSpec
from ..nn.unet import UNet, build_unet
from .config import ConfigError, format_train_config, parse_lines, parse_train_config, TrainConfig

MAGIC = b"CMU1"
VERSION = 1


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    grid: GridSpec
    params: dict[str, np.ndarray]
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    step: int = 0

    @property
    def param_count(self) -> int:
        return sum(int(a.size) for a in self.params.values())

    def model(self) -> UNet:
        net = build_unet(self.config.net, self.config.seed)
        net.load_state_dict(self.params)
        return net

    def header_text(self) -> str:
        g = self.grid
        return format_train_config(self.config) + (
            f"grid.L = {g.L}\ngrid.v = {g.v}\ngrid.side = {g.side}\ngrid.depth = {g.depth}\n"
            f"state.step = {self.step}\n"
            f"param_count = {self.param_count}\n"
            f"tensor_count = {len(self.params) + 2 * len(self.moments)}\n"
        )

    def tensors(self):
        yield from self.params.items()
        for name, (m, v) in self.moments.items():
            yield f"adam.m.{name}", m
            yield f"adam.v.{name}", v


def to_bytes(ckpt: Checkpoint) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    header = ckpt.header_text().encode("utf-8")
    out.write(struct.pack("<I", len(header)))
    out.write(header)
    for name, arr in ckpt.tensors():
        raw = name.encode("utf-8")
        out.write(struct.pack("<I", len(raw)))
        out.write(raw)
        out.write(struct.pack("<I", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return out.getvalue()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(f"truncated checkpoint while reading {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    @property
    def done(self) -> bool:
        return self.pos >= len(self.data)


def _parse_header(text: str):
    entries = parse_lines(text)
    state_keys = [
        k for k in entries
        if k.startswith(("grid.", "state.")) or k in ("param_count", "tensor_count")
    ]
    extra = {k: entries.pop(k) for k in state_keys}
    cfg_text = "\n".join(f"{k} = {v}" for k, (v, _) in entries.items())
    try:
        cfg = parse_train_config(cfg_text)
        ints = {k: int(v) for k, (v, _) in extra.items()}
        grid = GridSpec(ints["grid.L"], ints["grid.v"], ints["grid.side"], ints["grid.depth"])
        return cfg, grid, ints["state.step"], ints["param_count"], ints["tensor_count"]
    except (ConfigError, KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from None


def from_bytes(data: bytes) -> Checkpoint:
    r = _Reader(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("bad magic")
    r.pos = 4
    version = r.u32("version")
    if version != VERSION:
        raise VersionMismatchError(f"version mismatch: file has {version}, expected {VERSION}")
    n = r.u32("header length")
    cfg, grid, step, param_count, tensor_count = _parse_header(r.take(n, "header").decode("utf-8"))
    tensors = {}
    while not r.done:
        name = r.take(r.u32("tensor name length"), "tensor name").decode("utf-8")
        rank = r.u32("tensor rank")
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank, "tensor dims"))
        count = int(np.prod(dims, dtype=np.int64))
        arr = np.frombuffer(r.take(4 * count, f"tensor {name}"), dtype="<f4").reshape(dims)
        tensors[name] = arr.astype(np.float32)
    if len(tensors) != tensor_count:
        raise TruncatedCheckpointError(
            f"truncated checkpoint: header lists {tensor_count} tensors, found {len(tensors)}"
        )
    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    moments = {
        k: (tensors[f"adam.m.{k}"], tensors[f"adam.v.{k}"]) for k in params if f"adam.m.{k}" in tensors
    }
    ckpt = Checkpoint(cfg, grid, params, moments, step)
    if ckpt.param_count != param_count:
        raise CheckpointError(f"parameter count {ckpt.param_count} != header {param_count}")
    return ckpt


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
