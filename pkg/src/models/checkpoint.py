"""
AFGN checkpoint files.

Layout (little-endian throughout):

    b"AFGN" | u32 version | u32 len + kind tag (UTF-8) | u32 parameter count
    per parameter: u32 len + name (UTF-8) | u32 rank | rank x u64 extents | float32 values

Values are stored as float32; float64 models round-trip through a float32 cast.
"""
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from models.layers import Module

logger = logging.getLogger(__name__)

MAGIC = b"AFGN"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_VALUE_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    version: int
    kind: str
    params: List[Tuple[str, np.ndarray]] = field(default_factory=list)

    def as_dict(self) -> Dict[str, np.ndarray]:
        return dict(self.params)


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def encode_checkpoint(model: Module) -> bytes:
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _pack_str(model.kind)]
    named = model.named_parameters()
    chunks.append(_U32.pack(len(named)))
    for name, p in named:
        chunks.append(_pack_str(name))
        chunks.append(_U32.pack(p.ndim))
        chunks.extend(_U64.pack(extent) for extent in p.shape)
        chunks.append(np.ascontiguousarray(p.data, dtype=_VALUE_DTYPE).tobytes())
    return b"".join(chunks)


def save_checkpoint(model: Module, path: Union[str, Path]) -> Path:
    """Write atomically: a temp file in the target directory is renamed over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_checkpoint(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(f"saved {model.kind} checkpoint ({model.parameter_count()} values) to {path}")
    return path


class _Reader:

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise ValueError(f"truncated checkpoint {self.source}: needed {n} bytes for {what} "
                             f"at offset {self.pos}, only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return _U64.unpack(self.take(8, what))[0]

    def text(self, what: str) -> str:
        n = self.u32(f"{what} length")
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ValueError(f"corrupt {what} in checkpoint {self.source}: {e}") from None


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> Checkpoint:
    reader = _Reader(data, source)
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise ValueError(f"not an AFGN checkpoint: {source} starts with {magic!r}")
    version = reader.u32("format version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version} in {source}, expected {FORMAT_VERSION}")
    ckpt = Checkpoint(version=version, kind=reader.text("kind tag"))
    count = reader.u32("parameter count")
    for _ in range(count):
        name = reader.text("parameter name")
        rank = reader.u32(f"rank of {name}")
        shape = tuple(reader.u64(f"extent of {name}") for _ in range(rank))
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(n * _VALUE_DTYPE.itemsize, f"values of {name}")
        ckpt.params.append((name, np.frombuffer(raw, dtype=_VALUE_DTYPE).reshape(shape).copy()))
    if reader.pos != len(data):
        raise ValueError(f"trailing {len(data) - reader.pos} bytes after the last parameter in {source}")
    return ckpt


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))


def load_checkpoint(path: Union[str, Path], model: Module) -> Module:
    """
    Copy stored values into `model` in place.

    Raises:
        ValueError: bad magic, version, truncation, or a parameter whose name or
            shape disagrees with the model (the message names the parameter)
    """
    ckpt = read_checkpoint(path)
    expected = model.named_parameters()
    for i, (name, p) in enumerate(expected):
        if i >= len(ckpt.params):
            raise ValueError(f"checkpoint {path} has no value for parameter '{name}' "
                             f"({len(ckpt.params)} stored, model has {len(expected)})")
        stored_name, values = ckpt.params[i]
        if stored_name != name or values.shape != p.shape:
            raise ValueError(f"checkpoint {path} does not fit {model.kind}: parameter '{name}' {p.shape} "
                             f"vs stored '{stored_name}' {values.shape}")
    if len(ckpt.params) != len(expected):
        extra = ckpt.params[len(expected)][0]
        raise ValueError(f"checkpoint {path} has extra parameter '{extra}' not present in {model.kind}")
    if ckpt.kind != model.kind:
        raise ValueError(f"checkpoint {path} holds a '{ckpt.kind}' model, cannot load into '{model.kind}'")
    for (_, p), (_, values) in zip(expected, ckpt.params):
        p.data[...] = values.astype(p.dtype)
    logger.debug(f"loaded {ckpt.kind} checkpoint from {path}")
    return model
