"""Named trainable parameters and the on-disk checkpoint container.

Parameters live in a :class:`ParameterStore` keyed by unique slash-separated
paths (for example ``visual/block0/attn/wq``).  Initialization draws from a
single seeded generator in allocation order, so a fixed seed reproduces the
whole model bitwise.

Checkpoint files are flat binary containers: a magic/version line, a UTF-8
text index describing each record (name, offset, element count, shape) plus
optional metadata, then the concatenated 32-bit little-endian payloads.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ConfigError
from .tensor import Tensor

CHECKPOINT_MAGIC = b"TVPR1\n"
META_PREFIX = "#meta\t"

INIT_KINDS = ("trunc_normal", "zeros", "ones")


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...],
                     std: float) -> np.ndarray:
    """Normal(0, std) with draws beyond two standard deviations redrawn."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2.0 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2.0 * std
    return out.astype(np.float32)


class Parameter:
    """A named tensor with gradients enabled and its init descriptor."""

    __slots__ = ("name", "value", "init_spec")

    def __init__(self, name: str, value: Tensor, init_spec: str):
        self.name = name
        self.value = value
        self.init_spec = init_spec

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape}, init={self.init_spec!r})"


class ParameterStore:
    """Registry of uniquely named parameters with seeded initialization."""

    def __init__(self, seed: int, std: float = 0.02):
        self._rng = np.random.default_rng(seed)
        self._std = std
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, shape: tuple[int, ...], init: str = "trunc_normal") -> Tensor:
        if name in self._params:
            raise ConfigError(f"parameter name {name!r} already registered")
        if init == "trunc_normal":
            data = truncated_normal(self._rng, tuple(shape), self._std)
        elif init == "zeros":
            data = np.zeros(shape, dtype=np.float32)
        elif init == "ones":
            data = np.ones(shape, dtype=np.float32)
        else:
            raise ConfigError(f"unknown init kind {init!r}; expected one of {INIT_KINDS}")
        value = Tensor(data, requires_grad=True)
        self._params[name] = Parameter(name, value, init)
        return value

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return [p.value for p in self._params.values()]

    def get(self, name: str) -> Tensor:
        return self._params[name].value

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.value.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.value.data for name, p in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise CheckpointError(
                f"parameter names disagree with checkpoint: missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}")
        for name, p in self._params.items():
            arr = arrays[name]
            if tuple(arr.shape) != p.value.shape:
                raise CheckpointError(
                    f"shape of {name!r} is {tuple(arr.shape)} in checkpoint, "
                    f"expected {p.value.shape}")
            p.value.data = np.ascontiguousarray(arr.astype(np.float32))
            p.value.grad = None


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray],
                    metadata: dict[str, str] | None = None) -> None:
    """Write arrays and string metadata to a single binary container."""
    index_lines = []
    if metadata:
        index_lines.append(META_PREFIX + json.dumps(metadata, sort_keys=True))
    payloads = []
    offset = 0
    for name, arr in arrays.items():
        if "\t" in name or "\n" in name:
            raise CheckpointError(f"parameter name {name!r} contains index delimiters")
        buf = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        shape_txt = ",".join(str(d) for d in arr.shape)
        index_lines.append(f"{name}\t{offset}\t{arr.size}\t{shape_txt}")
        payloads.append(buf)
        offset += len(buf)
    index_blob = ("\n".join(index_lines) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(index_blob)))
        fh.write(index_blob)
        for buf in payloads:
            fh.write(buf)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Read a container written by :func:`save_checkpoint`."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(
            f"{path}: bad magic {raw[:6]!r}; expected {CHECKPOINT_MAGIC!r}")
    header_end = len(CHECKPOINT_MAGIC) + 8
    if len(raw) < header_end:
        raise CheckpointError(f"{path}: truncated header")
    (index_len,) = struct.unpack("<Q", raw[len(CHECKPOINT_MAGIC):header_end])
    index_blob = raw[header_end:header_end + index_len]
    payload = raw[header_end + index_len:]
    arrays: dict[str, np.ndarray] = {}
    metadata: dict[str, str] = {}
    for line in index_blob.decode("utf-8").splitlines():
        if not line:
            continue
        if line.startswith(META_PREFIX):
            metadata = json.loads(line[len(META_PREFIX):])
            continue
        try:
            name, offset_txt, count_txt, shape_txt = line.split("\t")
            offset, count = int(offset_txt), int(count_txt)
            shape = tuple(int(d) for d in shape_txt.split(",")) if shape_txt else ()
        except ValueError as exc:
            raise CheckpointError(f"{path}: malformed index line {line!r}") from exc
        nbytes = count * 4
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: record {name!r} overruns the payload")
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays[name] = arr.reshape(shape).copy()
    return arrays, metadata
