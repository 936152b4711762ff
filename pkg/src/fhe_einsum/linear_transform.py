"""Slot permutations as diagonal-form matrix-vector products.

A permutation of slots is a 0/1 matrix ``M`` applied to an encrypted vector.
Its generalized diagonals ``d_k[i] = M[i, (i + k) % S]`` turn the product into
``sum_k d_k * rotate(x, k)`` (Halevi-Shoup). The baby-step giant-step form
splits ``k = n1*j + i`` and pre-rotates the cleartext diagonals so that only
``O(sqrt(S))`` ciphertext rotations remain.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .backend import Backend, SlotVector, bsgs_split
from .equation import LayoutPlan


@dataclass(frozen=True)
class PermutationPlan:
    """Partial map dest slot -> src slot; dests outside the map end up zero."""

    size: int
    dests: tuple[int, ...]
    srcs: tuple[int, ...]

    @classmethod
    def from_map(cls, size: int, mapping: Mapping[int, int]) -> "PermutationPlan":
        items = sorted(mapping.items())
        return cls(size, tuple(d for d, _ in items), tuple(s for _, s in items))

    @property
    def map(self) -> dict[int, int]:
        return dict(zip(self.dests, self.srcs))

    @property
    def domain(self) -> frozenset[int]:
        return frozenset(self.dests)

    def apply_clear(self, values) -> np.ndarray:
        """Apply the permutation to a cleartext slot array."""
        values = np.asarray(values, dtype=np.float64)
        out = np.zeros(self.size)
        out[list(self.dests)] = values[list(self.srcs)]
        return out

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        m[list(self.dests), list(self.srcs)] = 1.0
        return m


def build_expansion_permutation(
    operand_labels: Sequence[str],
    operand_padded_shape: Sequence[int],
    layout: LayoutPlan,
) -> PermutationPlan:
    """Move a packed operand to its broadcast-layout positions.

    Each logical element goes from its row-major offset in the operand's
    padded shape to ``sum(index * stride)`` in the broadcast layout, with the
    operand's missing labels held at index 0. Transposition falls out of
    operand labels appearing in a different order than the broadcast order.
    """
    labels = tuple(operand_labels)
    padded = tuple(operand_padded_shape)
    extents = tuple(layout.spec.sizes[l] for l in labels)
    if not labels:
        return PermutationPlan(layout.slot_count, (0,), (0,))
    idx = np.indices(extents).reshape(len(labels), -1)
    src = np.ravel_multi_index(idx, padded)
    strides = np.array([layout.strides[l] for l in labels])
    dest = strides @ idx
    order = np.argsort(dest, kind="stable")
    return PermutationPlan(
        layout.slot_count,
        tuple(int(d) for d in dest[order]),
        tuple(int(s) for s in src[order]),
    )


def is_identity(plan: PermutationPlan) -> bool:
    return plan.dests == plan.srcs


@dataclass(frozen=True, eq=False)
class DiagonalSet:
    """Nonzero generalized diagonals, stored sparsely.

    ``diagonals[k] = (rows, values)`` lists the nonzero entries of ``d_k``.
    """

    size: int
    diagonals: Mapping[int, tuple[np.ndarray, np.ndarray]]

    @property
    def offsets(self) -> list[int]:
        return sorted(self.diagonals)

    def dense(self, k: int) -> np.ndarray:
        out = np.zeros(self.size)
        if k in self.diagonals:
            rows, vals = self.diagonals[k]
            out[rows] = vals
        return out

    def as_dict(self) -> dict[int, list[float]]:
        return {k: self.dense(k).tolist() for k in self.offsets}

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        for k, (rows, vals) in self.diagonals.items():
            m[rows, (rows + k) % self.size] = vals
        return m

    @classmethod
    def from_matrix(cls, matrix) -> "DiagonalSet":
        m = np.asarray(matrix, dtype=np.float64)
        n = m.shape[0]
        rows = np.arange(n)
        diags = {}
        for k in range(n):
            d = m[rows, (rows + k) % n]
            nz = np.flatnonzero(d)
            if nz.size:
                diags[k] = (nz, d[nz])
        return cls(n, diags)


@functools.lru_cache(maxsize=128)
def extract_diagonals(plan: PermutationPlan) -> DiagonalSet:
    S = plan.size
    dests = np.asarray(plan.dests, dtype=np.int64)
    offsets = (np.asarray(plan.srcs, dtype=np.int64) - dests) % S
    diags = {}
    for k in np.unique(offsets):
        rows = dests[offsets == k]
        diags[int(k)] = (rows, np.ones(rows.size))
    return DiagonalSet(S, diags)


def _plain(backend: Backend, diags: DiagonalSet, k: int, shift: int = 0) -> SlotVector:
    rows, vals = diags.diagonals[k]
    out = np.zeros(diags.size)
    # roll(d, -shift) moves entry r to r + shift
    out[(rows + shift) % diags.size] = vals
    return backend.encode(out)


def _accumulate(backend: Backend, acc: SlotVector | None, term: SlotVector) -> SlotVector:
    return term if acc is None else backend.add(acc, term)


def _empty_product(backend: Backend, x: SlotVector) -> SlotVector:
    # An all-zero matrix still costs its level, keeping depth data-independent.
    return backend.mul_pt(x, backend.encode(np.zeros(backend.slot_count)))


def apply_halevi_shoup(backend: Backend, x: SlotVector, diags: DiagonalSet) -> SlotVector:
    acc = None
    for k in diags.offsets:
        term = backend.mul_pt(backend.rotate(x, k), _plain(backend, diags, k))
        acc = _accumulate(backend, acc, term)
    return acc if acc is not None else _empty_product(backend, x)


def apply_bsgs(backend: Backend, x: SlotVector, diags: DiagonalSet) -> SlotVector:
    S = backend.slot_count
    if diags.size != S:
        raise ValueError(f"diagonal set is for {diags.size} slots, backend has {S}")
    n1, _ = bsgs_split(S)
    groups: dict[int, list[int]] = {}
    for k in diags.offsets:
        groups.setdefault(k // n1, []).append(k % n1)
    if not groups:
        return _empty_product(backend, x)

    babies = sorted({i for members in groups.values() for i in members if i})
    rotated = backend.rotate_hoisted(x, babies)
    rotated[0] = x

    acc = None
    for j in sorted(groups):
        block = None
        for i in groups[j]:
            term = backend.mul_pt(rotated[i], _plain(backend, diags, n1 * j + i, n1 * j))
            block = _accumulate(backend, block, term)
        if j:
            block = backend.rotate(block, n1 * j)
        acc = _accumulate(backend, acc, block)
    return acc


def bsgs_rotation_bound(diags: DiagonalSet) -> int:
    """Upper bound on rotations issued by ``apply_bsgs``."""
    n1, _ = bsgs_split(diags.size)
    giants = {k // n1 for k in diags.offsets} - {0}
    return (n1 - 1) + len(giants)


def apply_permutation(backend: Backend, x: SlotVector, plan: PermutationPlan,
                      method: str = "bsgs") -> SlotVector:
    diags = extract_diagonals(plan)
    if method == "bsgs":
        return apply_bsgs(backend, x, diags)
    if method == "hs":
        return apply_halevi_shoup(backend, x, diags)
    raise ValueError(f"unknown method {method!r}")


__all__ = [
    "PermutationPlan",
    "DiagonalSet",
    "build_expansion_permutation",
    "is_identity",
    "extract_diagonals",
    "apply_halevi_shoup",
    "apply_bsgs",
    "apply_permutation",
    "bsgs_rotation_bound",
]
