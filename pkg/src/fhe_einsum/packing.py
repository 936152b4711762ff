"""Row-major packing of tensors into slot vectors, with power-of-two padding."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .equation import next_pow2
from .errors import DoesNotFit


def pad_shape(shape: Sequence[int]) -> tuple[int, ...]:
    return tuple(next_pow2(int(d)) for d in shape)


@dataclass(frozen=True)
class PackedTensor:
    """A tensor living in the leading slots of a slot vector.

    ``vector`` is either a backend ``SlotVector`` or a raw cleartext slot
    array (before encoding).
    """

    logical_shape: tuple[int, ...]
    padded_shape: tuple[int, ...]
    vector: Any
    slot_count: int

    @property
    def is_cipher(self) -> bool:
        return getattr(self.vector, "kind", None) == "cipher"


def pack(tensor, slot_count: int) -> tuple[np.ndarray, PackedTensor]:
    """Flatten ``tensor`` row-major over its padded shape into ``slot_count`` slots.

    >>> pack([[1, 2], [3, 4]], 8)[0].tolist()
    [1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0]
    """
    arr = np.asarray(tensor, dtype=np.float64)
    padded = pad_shape(arr.shape)
    need = math.prod(padded)
    if need > slot_count:
        raise DoesNotFit(
            f"padded shape {padded} needs {need} slots, only {slot_count} available"
        )
    slots = np.zeros(slot_count)
    block = np.zeros(padded)
    block[tuple(slice(0, d) for d in arr.shape)] = arr
    slots[:need] = block.ravel()
    return slots, PackedTensor(tuple(arr.shape), padded, slots, slot_count)


def unpack(vector, logical_shape: Sequence[int], padded_shape: Sequence[int]) -> np.ndarray:
    vec = np.asarray(vector, dtype=np.float64)
    padded = tuple(padded_shape)
    block = vec[: math.prod(padded)].reshape(padded)
    return block[tuple(slice(0, d) for d in logical_shape)].copy()


# Tensor file format: {"shape": [...], "data": [flat row-major values]}


def load_tensor(path: str | Path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    shape = tuple(int(d) for d in doc["shape"])
    data = np.asarray(doc["data"], dtype=np.float64)
    if data.size != math.prod(shape):
        raise ValueError(
            f"{path}: {data.size} values do not fill shape {shape}"
        )
    return data.reshape(shape)


def dump_tensor(tensor, path: str | Path | None = None) -> dict:
    arr = np.asarray(tensor, dtype=np.float64)
    doc = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    if path is not None:
        Path(path).write_text(json.dumps(doc))
    return doc
