"""Logarithmic rotate-and-add broadcasting and reduction, and the output mask."""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .backend import Backend, SlotVector
from .equation import is_pow2


def _steps(size: int) -> int:
    if not is_pow2(size):
        raise ValueError(f"dimension size must be a power of two, got {size}")
    return size.bit_length() - 1


def broadcast_dim(backend: Backend, x: SlotVector, stride: int, size: int) -> SlotVector:
    """Copy the index-0 slice of a dimension to all ``size`` indices.

    Rotates down by ``stride * 2**t`` and adds, doubling the filled range
    each step.
    """
    if stride * size > backend.slot_count:
        raise ValueError(f"stride {stride} x size {size} exceeds {backend.slot_count} slots")
    for t in range(_steps(size)):
        x = backend.add(x, backend.rotate(x, -stride * (1 << t)))
    return x


def reduce_dims(backend: Backend, x: SlotVector, dims: Iterable[tuple[int, int]]) -> SlotVector:
    """Sum over outer dimensions given as ``(stride, size)`` pairs.

    The sums land in the leading slots; everything above the inner block is
    wrap-around garbage until masked.
    """
    for stride, size in dims:
        for t in range(_steps(size)):
            x = backend.add(x, backend.rotate(x, stride * (1 << t)))
    return x


def mask_top(backend: Backend, x: SlotVector, count: int) -> SlotVector:
    if not 0 <= count <= backend.slot_count:
        raise ValueError(f"mask count {count} outside [0, {backend.slot_count}]")
    mask = np.zeros(backend.slot_count)
    mask[:count] = 1.0
    return backend.mul_pt(x, backend.encode(mask), mask=count)
