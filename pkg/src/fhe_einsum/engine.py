"""End-to-end einsum over slot vectors.

parse -> plan layout -> align (BSGS permutation or nop) -> broadcast ->
tree multiply -> reduce -> mask. A multi-operand expression always runs as
one broadcast-multiply-reduce; it is never split into pairwise contractions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import PHASES, Backend, CostReport, Op, ReferenceBackend, SlotVector, _decompress
from .equation import EinsumSpec, LayoutPlan, parse, plan_layout
from .errors import DoesNotFit
from .linear_transform import (
    apply_bsgs,
    apply_halevi_shoup,
    build_expansion_permutation,
    extract_diagonals,
    is_identity,
)
from .packing import PackedTensor, pack, pad_shape, unpack
from .rotate_sum import broadcast_dim, mask_top, reduce_dims


@dataclass
class PhaseRecord:
    name: str
    ops: list[Op]
    cost: CostReport
    level: int | None

    def rotation_amounts(self) -> list[int]:
        return [op.arg for op in self.ops if op.name == "rotate"]

    def mask_counts(self) -> list[int]:
        return [op.arg for op in self.ops if op.name == "mul_pt" and op.arg is not None]


@dataclass
class ExecutionTrace:
    """Primitive ops per pipeline phase, replayable on a fresh backend.

    ``inputs`` holds (slots, level, kind) for the vectors that existed
    before the call; ``output`` is the id of the result vector.
    """

    equation: str
    slot_count: int
    start_level: int
    phases: list[PhaseRecord] = field(default_factory=list)
    inputs: dict[int, tuple[np.ndarray, int, str]] = field(default_factory=dict)
    output: int | None = None

    def phase(self, name: str) -> PhaseRecord:
        for p in self.phases:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def ops(self) -> list[Op]:
        return [op for p in self.phases for op in p.ops]

    def listing(self) -> str:
        lines = [f"# {self.equation}  (S={self.slot_count}, start level {self.start_level})"]
        for p in self.phases:
            rots = p.rotation_amounts()
            lines.append(
                f"[{p.name}] {len(p.ops)} ops, rotations={rots}"
                + (f", masks={p.mask_counts()}" if p.mask_counts() else "")
                + ("" if p.level is None else f", level -> {p.level}")
            )
            lines.extend(f"    {op.describe()}" for op in p.ops)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "slot_count": self.slot_count,
            "start_level": self.start_level,
            "phases": [
                {
                    "name": p.name,
                    "level": p.level,
                    "rotations": p.rotation_amounts(),
                    "masks": p.mask_counts(),
                    "ops": [op.describe() for op in p.ops],
                    "cost": p.cost.counters(),
                }
                for p in self.phases
            ],
        }


@dataclass
class EinsumResult:
    output: PackedTensor
    trace: ExecutionTrace
    cost: CostReport
    depth: int
    layout: LayoutPlan


def multiply_tree(backend: Backend, cts: Sequence[SlotVector]) -> SlotVector:
    """Slotwise product in ceil(log2 k) levels, pairing (0,1), (2,3), ..."""
    if not cts:
        raise ValueError("multiply_tree needs at least one operand")
    layer = list(cts)
    while len(layer) > 1:
        nxt = [backend.mul(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
        if len(layer) % 2:
            nxt.append(layer[-1])
        layer = nxt
    return layer[0]


def expected_depth(permuted: bool, ciphers: int, plains: int = 0) -> int:
    """Alignment level (if any) + tree-multiply levels + mask level."""
    leaves = ciphers + (1 if plains else 0)
    return int(permuted) + math.ceil(math.log2(leaves)) + 1


def _clear_broadcast(values: np.ndarray, stride: int, size: int) -> np.ndarray:
    t = 1
    while t < size:
        values = values + np.roll(values, stride * t)
        t *= 2
    return values


def _as_operand(op, slot_count: int) -> tuple[tuple[int, ...], PackedTensor]:
    if isinstance(op, PackedTensor):
        if op.slot_count != slot_count:
            raise DoesNotFit(
                f"operand packed for {op.slot_count} slots, backend has {slot_count}"
            )
        if tuple(op.padded_shape) != pad_shape(op.logical_shape):
            raise ValueError(f"operand padded shape {op.padded_shape} is not the power-of-two "
                             f"padding of {op.logical_shape}")
        return tuple(op.logical_shape), op
    slots, packed = pack(op, slot_count)
    return packed.logical_shape, packed


def encrypt_tensor(backend: Backend, tensor) -> PackedTensor:
    slots, packed = pack(tensor, backend.slot_count)
    ct = backend.encrypt(backend.encode(slots))
    return PackedTensor(packed.logical_shape, packed.padded_shape, ct, backend.slot_count)


def decrypt_tensor(backend: Backend, packed: PackedTensor) -> np.ndarray:
    vec = packed.vector
    slots = backend.decrypt(vec) if isinstance(vec, SlotVector) else np.asarray(vec)
    return unpack(slots, packed.logical_shape, packed.padded_shape)


def einsum(
    equation: str,
    operands: Sequence,
    backend: Backend | None = None,
    *,
    method: str = "bsgs",
) -> EinsumResult:
    """Run ``equation`` over packed operands.

    Operands are ``PackedTensor`` objects holding ciphertexts, or raw
    tensors / plaintext ``PackedTensor`` objects which are aligned in the
    clear and join only at the multiply step. If no operand is encrypted,
    the first one is encrypted so the result is a ciphertext.
    """
    if backend is None:
        backend = ReferenceBackend()
    if not operands:
        raise ValueError("einsum needs at least one operand")
    S = backend.slot_count

    shaped = [_as_operand(op, S) for op in operands]
    spec: EinsumSpec = parse(equation, [shape for shape, _ in shaped])
    layout = plan_layout(spec, S)
    packed = [p for _, p in shaped]

    is_cipher = [isinstance(p.vector, SlotVector) and p.vector.kind == "cipher" for p in packed]
    if not any(is_cipher):
        p = packed[0]
        vec = p.vector if isinstance(p.vector, SlotVector) else backend.encode(p.vector)
        packed[0] = PackedTensor(p.logical_shape, p.padded_shape, backend.encrypt(vec), S)
        is_cipher[0] = True

    trace = ExecutionTrace(spec.equation, S, 0)
    for p, c in zip(packed, is_cipher):
        if c:
            v = p.vector
            trace.inputs[v.id] = (np.array(v.slots), v.level, v.kind)
    start_level = max(p.vector.level for p, c in zip(packed, is_cipher) if c)
    trace.start_level = start_level

    plans = [
        build_expansion_permutation(a.labels, a.padded_shape, layout) for a in layout.per_operand
    ]
    needs_perm = [
        not (a.identity or is_identity(plan)) for a, plan in zip(layout.per_operand, plans)
    ]
    apply = {"bsgs": apply_bsgs, "hs": apply_halevi_shoup}[method]

    current: list = [None] * len(packed)

    def run_phase(name, body):
        before = backend.cost.snapshot()
        with backend.phase(name), backend.recording() as ops:
            level = body()
        trace.phases.append(PhaseRecord(name, ops, backend.cost.minus(before), level))

    def permute():
        for n, p in enumerate(packed):
            if is_cipher[n]:
                x = p.vector
                if needs_perm[n]:
                    x = apply(backend, x, extract_diagonals(plans[n]))
                current[n] = x
            else:
                raw = p.vector.slots if isinstance(p.vector, SlotVector) else np.asarray(p.vector)
                current[n] = plans[n].apply_clear(raw)
        return _min_level(current)

    def broadcast():
        for n in range(len(packed)):
            for label in layout.missing_labels(n):
                stride, size = layout.strides[label], layout.padded[label]
                if is_cipher[n]:
                    current[n] = broadcast_dim(backend, current[n], stride, size)
                else:
                    current[n] = _clear_broadcast(current[n], stride, size)
        return _min_level(current)

    result: dict[str, SlotVector] = {}

    def multiply():
        leaves = [current[n] for n in range(len(packed)) if is_cipher[n]]
        plains = [current[n] for n in range(len(packed)) if not is_cipher[n]]
        if plains:
            leaves.append(backend.encode(np.prod(plains, axis=0)))
        result["x"] = multiply_tree(backend, leaves)
        return result["x"].level

    def reduce():
        result["x"] = reduce_dims(backend, result["x"], layout.reduce_dims())
        return result["x"].level

    def mask():
        result["x"] = mask_top(backend, result["x"], layout.output_count)
        return result["x"].level

    for name, body in zip(PHASES, (permute, broadcast, multiply, reduce, mask)):
        run_phase(name, body)

    out = result["x"]
    trace.output = out.id
    cost = CostReport()
    for p in trace.phases:
        for k, v in p.cost.counters().items():
            if k != "levels_consumed":
                setattr(cost, k, getattr(cost, k) + v)
        cost.phases[p.name] = {k: v for k, v in p.cost.counters().items() if k != "levels_consumed"}
    depth = start_level - out.level
    cost.levels_consumed = depth
    tensor = PackedTensor(spec.output_shape, layout.output_padded_shape, out, S)
    return EinsumResult(tensor, trace, cost, depth, layout)


def _min_level(vs) -> int | None:
    levels = [v.level for v in vs if isinstance(v, SlotVector) and v.kind == "cipher"]
    return min(levels) if levels else None


def replay(trace: ExecutionTrace, max_level: int | None = None) -> np.ndarray:
    """Re-run a trace on a fresh reference backend; returns the output slots."""
    backend = ReferenceBackend(trace.slot_count, max_level if max_level is not None
                               else trace.start_level)
    env: dict[int, SlotVector] = {
        vid: SlotVector(vid, slots, level, kind) for vid, (slots, level, kind) in trace.inputs.items()
    }
    for op in trace.ops:
        args = [env[i] for i in op.inputs]
        if op.name == "encode":
            v = backend.encode(_decompress(op.arg))
        elif op.name == "encrypt":
            v = backend.encrypt(*args)
        elif op.name == "rotate":
            v = backend.rotate(args[0], op.arg)
        elif op.name == "add":
            v = backend.add(*args)
        elif op.name == "mul_ct":
            v = backend.mul_ct(*args)
        elif op.name == "mul_pt":
            v = backend.mul_pt(*args, mask=op.arg)
        else:
            raise ValueError(f"cannot replay op {op.name!r}")
        env[op.output] = v
    return backend.decrypt(env[trace.output])
