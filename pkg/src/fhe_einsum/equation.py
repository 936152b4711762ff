"""Einsum equation parsing and broadcast layout planning.

The broadcast layout puts every contraction label outermost and the output
labels innermost, in output order. Reducing over outer dimensions leaves
the sums in the leading contiguous slots, so no permutation is needed after
the reduction.
"""
from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import (
    DoesNotFit,
    ImplicitOutput,
    MalformedEquation,
    RankMismatch,
    RepeatedLabel,
    SizeConflict,
    UnknownOutputLabel,
)

MAX_OPERANDS = 8
_LABELS = frozenset(string.ascii_letters)


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    if n < 1:
        raise ValueError(f"extent must be >= 1, got {n}")
    return 1 << (n - 1).bit_length()


def is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class EinsumSpec:
    inputs: tuple[tuple[str, ...], ...]
    output: tuple[str, ...]
    sizes: Mapping[str, int]
    contraction: tuple[str, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        """All input labels in first-appearance order."""
        seen: dict[str, None] = {}
        for labels in self.inputs:
            for label in labels:
                seen.setdefault(label, None)
        return tuple(seen)

    def shape_of(self, operand: int) -> tuple[int, ...]:
        return tuple(self.sizes[label] for label in self.inputs[operand])

    @property
    def output_shape(self) -> tuple[int, ...]:
        return tuple(self.sizes[label] for label in self.output)

    @property
    def equation(self) -> str:
        lhs = ",".join("".join(labels) for labels in self.inputs)
        return f"{lhs}->{''.join(self.output)}"


def _split_labels(term: str, equation: str) -> tuple[str, ...]:
    if "." in term:
        raise MalformedEquation(f"ellipsis is not supported: {equation!r}")
    bad = [c for c in term if c not in _LABELS]
    if bad:
        raise MalformedEquation(
            f"labels must be single ASCII letters, found {bad[0]!r} in {equation!r}"
        )
    return tuple(term)


def parse(equation: str, shapes: Sequence[Sequence[int]]) -> EinsumSpec:
    """Parse ``equation`` and bind label extents from ``shapes``.

    >>> spec = parse("ij,jk->ik", [(4, 5), (5, 2)])
    >>> dict(spec.sizes), spec.contraction
    ({'i': 4, 'j': 5, 'k': 2}, ('j',))
    """
    if not isinstance(equation, str):
        raise MalformedEquation(f"equation must be a string, got {type(equation).__name__}")
    eq = equation.replace(" ", "")
    arrows = eq.count("->")
    if arrows == 0:
        raise ImplicitOutput(f"equation needs an explicit '->' output: {equation!r}")
    if arrows > 1:
        raise MalformedEquation(f"equation has more than one '->': {equation!r}")
    lhs, rhs = eq.split("->")

    inputs = tuple(_split_labels(term, equation) for term in lhs.split(","))
    output = _split_labels(rhs, equation)
    if len(inputs) > MAX_OPERANDS:
        raise MalformedEquation(
            f"at most {MAX_OPERANDS} operands are supported, got {len(inputs)}"
        )
    if len(inputs) != len(shapes):
        raise RankMismatch(
            f"equation has {len(inputs)} operands but {len(shapes)} shapes were given"
        )

    sizes: dict[str, int] = {}
    for n, (labels, shape) in enumerate(zip(inputs, shapes)):
        shape = tuple(int(d) for d in shape)
        if len(labels) != len(shape):
            raise RankMismatch(
                f"operand {n}: subscript {''.join(labels)!r} has rank {len(labels)} "
                f"but shape {shape} has rank {len(shape)}"
            )
        if len(set(labels)) != len(labels):
            raise RepeatedLabel(f"operand {n}: repeated label in {''.join(labels)!r}")
        for label, extent in zip(labels, shape):
            if extent < 1:
                raise SizeConflict(f"label {label!r} has non-positive extent {extent}")
            if sizes.setdefault(label, extent) != extent:
                raise SizeConflict(
                    f"label {label!r} bound to both {sizes[label]} and {extent}"
                )

    if len(set(output)) != len(output):
        raise RepeatedLabel(f"repeated label in output {rhs!r}")
    for label in output:
        if label not in sizes:
            raise UnknownOutputLabel(f"output label {label!r} does not appear in any input")

    out = set(output)
    contraction: dict[str, None] = {}
    for labels in inputs:
        for label in labels:
            if label not in out:
                contraction.setdefault(label, None)
    return EinsumSpec(inputs, output, dict(sizes), tuple(contraction))


@dataclass(frozen=True)
class AlignmentPlan:
    """How one operand gets into the broadcast layout.

    ``identity`` means the packed operand already sits at the broadcast
    strides (its labels are a contiguous suffix of the broadcast order).
    """

    labels: tuple[str, ...]
    padded_shape: tuple[int, ...]
    identity: bool

    @property
    def kind(self) -> str:
        return "identity" if self.identity else "permute"


@dataclass(frozen=True)
class LayoutPlan:
    spec: EinsumSpec
    broadcast_order: tuple[str, ...]
    padded: Mapping[str, int]
    strides: Mapping[str, int]
    broadcast_count: int
    output_count: int
    per_operand: tuple[AlignmentPlan, ...]
    slot_count: int
    output_padded_shape: tuple[int, ...] = field(default=())

    def missing_labels(self, operand: int) -> tuple[str, ...]:
        """Broadcast labels the operand lacks, in broadcast order."""
        have = set(self.per_operand[operand].labels)
        return tuple(l for l in self.broadcast_order if l not in have)

    def reduce_dims(self) -> list[tuple[int, int]]:
        """(stride, padded size) for each contraction label, outermost first."""
        return [(self.strides[l], self.padded[l]) for l in self.spec.contraction]


def plan_layout(spec: EinsumSpec, slot_count: int) -> LayoutPlan:
    if not is_pow2(slot_count):
        raise ValueError(f"slot count must be a power of two, got {slot_count}")
    order = tuple(spec.contraction) + tuple(spec.output)
    padded = {label: next_pow2(spec.sizes[label]) for label in order}

    strides: dict[str, int] = {}
    running = 1
    for label in reversed(order):
        strides[label] = running
        running *= padded[label]
    broadcast_count = running
    if broadcast_count > slot_count:
        raise DoesNotFit(
            f"broadcast layout {''.join(order)!r} needs {broadcast_count} slots, "
            f"only {slot_count} available"
        )

    per_operand = []
    for labels in spec.inputs:
        suffix = order[len(order) - len(labels):] if labels else ()
        per_operand.append(
            AlignmentPlan(
                labels=labels,
                padded_shape=tuple(padded[l] for l in labels),
                identity=tuple(labels) == suffix,
            )
        )
    out_padded = tuple(padded[l] for l in spec.output)
    return LayoutPlan(
        spec=spec,
        broadcast_order=order,
        padded=padded,
        strides={l: strides[l] for l in order},
        broadcast_count=broadcast_count,
        output_count=math.prod(out_padded),
        per_operand=tuple(per_operand),
        slot_count=slot_count,
        output_padded_shape=out_padded,
    )
