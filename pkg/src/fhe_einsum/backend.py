"""Slot-vector backends.

Everything above this module is written against five primitives: encode,
encrypt/decrypt, rotate, add, and multiply (cipher x cipher or
cipher x plain). ``ReferenceBackend`` evaluates them exactly on float64
arrays. ``MeteredBackend`` produces the same slot values but additionally
models rotation-key availability (power-of-two keys, optionally the
baby-step/giant-step keys), hoisted baby-step rotations and encryption
noise.

Rotation convention: ``rotate(x, k)[i] == x[(i + k) % S]``; positive ``k``
moves data toward slot 0.
"""
from __future__ import annotations

import itertools
import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from typing import Iterator, Sequence

import numpy as np

from .equation import is_pow2
from .errors import LengthMismatch, LevelExhausted

DEFAULT_SLOTS = 16384
DEFAULT_LEVEL = 4

POW2 = "pow2"
POW2_BSGS = "pow2+bsgs"
KEY_MODES = (POW2, POW2_BSGS)


def bsgs_split(slot_count: int) -> tuple[int, int]:
    """(n1, n2) with n1 * n2 == slot_count; n1 = 2**ceil(log2(S) / 2)."""
    log = int(math.log2(slot_count))
    n1 = 1 << -(-log // 2)
    return n1, slot_count // n1


def roll_slots(values: np.ndarray, k: int) -> np.ndarray:
    """Cleartext cyclic shift with the same convention as ``rotate``."""
    return np.roll(values, -k)


@dataclass(frozen=True, eq=False)
class SlotVector:
    id: int
    slots: np.ndarray
    level: int
    kind: str  # "cipher" | "plain"

    @property
    def size(self) -> int:
        return self.slots.shape[0]


@dataclass(frozen=True)
class KeyConfig:
    """Which rotation amounts have a dedicated key.

    Power-of-two keys count once per magnitude and serve both directions
    (``k`` and ``k - S`` are the same rotation). The BSGS key set holds one
    key per baby step ``0..n1-1`` and one per giant step ``n1*j``,
    ``j = 0..n2-1``, as a key generator enumerating both ranges produces
    them; at S = 16384 that is 128 + 128 = 256 keys on top of 14.
    """

    mode: str = POW2
    slot_count: int = DEFAULT_SLOTS

    def __post_init__(self):
        if self.mode not in KEY_MODES:
            raise ValueError(f"unknown key mode {self.mode!r}; expected one of {KEY_MODES}")
        if not is_pow2(self.slot_count) or self.slot_count < 2:
            raise ValueError(f"slot count must be a power of two >= 2, got {self.slot_count}")

    @property
    def pow2_keys(self) -> tuple[int, ...]:
        return tuple(1 << t for t in range(int(math.log2(self.slot_count))))

    @property
    def bsgs_keys(self) -> tuple[int, ...]:
        if self.mode != POW2_BSGS:
            return ()
        n1, n2 = bsgs_split(self.slot_count)
        return tuple(range(n1)) + tuple(n1 * j for j in range(n2))

    @property
    def key_count(self) -> int:
        return len(self.pow2_keys) + len(self.bsgs_keys)

    @property
    def available_rotations(self) -> frozenset[int]:
        """Rotation amounts (mod S) executable with a single key switch."""
        S = self.slot_count
        amounts = {k % S for k in self.pow2_keys} | {-k % S for k in self.pow2_keys}
        amounts |= {k % S for k in self.bsgs_keys}
        amounts.discard(0)
        return frozenset(amounts)

    def hops(self, k: int) -> int:
        """Physical rotations needed to rotate by ``k``.

        Unavailable amounts are split into power-of-two steps along the
        shorter direction: popcount(k mod S) going up, or popcount(-k mod S)
        going down.
        """
        S = self.slot_count
        k %= S
        if k == 0:
            return 0
        if k in self.available_rotations:
            return 1
        return min(bin(k).count("1"), bin(S - k).count("1"))


_COUNTERS = (
    "rotations_total",
    "rotations_logical",
    "rotations_decomposed",
    "key_switches",
    "hoisted_decompositions",
    "ct_ct_mults",
    "pt_ct_mults",
    "adds",
    "masks",
    "encodes",
    "encrypts",
)

PHASES = ("permute", "broadcast", "multiply", "reduce", "mask")


@dataclass
class CostReport:
    """Primitive-operation counters.

    ``rotations_total`` counts physical rotations after key decomposition;
    ``rotations_logical`` counts requested rotations; their difference is
    ``rotations_decomposed``. ``hoisted_decompositions`` counts key-switch
    decompositions saved by hoisting baby-step rotations.
    """

    rotations_total: int = 0
    rotations_logical: int = 0
    rotations_decomposed: int = 0
    key_switches: int = 0
    hoisted_decompositions: int = 0
    ct_ct_mults: int = 0
    pt_ct_mults: int = 0
    adds: int = 0
    masks: int = 0
    encodes: int = 0
    encrypts: int = 0
    levels_consumed: int = 0
    phases: dict[str, dict[str, int]] = field(default_factory=dict)

    def bump(self, phase: str | None, name: str, n: int = 1) -> None:
        setattr(self, name, getattr(self, name) + n)
        if phase is not None:
            bucket = self.phases.setdefault(phase, dict.fromkeys(_COUNTERS, 0))
            bucket[name] += n

    def counters(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "phases"}

    def to_dict(self) -> dict:
        d = self.counters()
        d["phases"] = {p: dict(c) for p, c in self.phases.items()}
        return d

    def minus(self, before: "CostReport") -> "CostReport":
        """Counter deltas since a ``snapshot()``."""
        out = CostReport(**{k: v - getattr(before, k) for k, v in self.counters().items()})
        for p, c in self.phases.items():
            prev = before.phases.get(p, {})
            out.phases[p] = {k: v - prev.get(k, 0) for k, v in c.items()}
        return out

    def snapshot(self) -> "CostReport":
        out = CostReport(**self.counters())
        out.phases = {p: dict(c) for p, c in self.phases.items()}
        return out


@dataclass(frozen=True)
class Op:
    """One primitive issued to a backend."""

    phase: str | None
    name: str
    inputs: tuple[int, ...]
    output: int | None
    arg: object = None
    level: int | None = None

    def describe(self) -> str:
        args = ", ".join(f"#{i}" for i in self.inputs)
        if self.name in ("rotate", "hoisted_rotate"):
            args += f", k={self.arg}"
        elif self.name == "mul_pt" and self.arg is not None:
            args += f", mask={self.arg}"
        out = "" if self.output is None else f" -> #{self.output}"
        lvl = "" if self.level is None else f" (level {self.level})"
        return f"{self.name}({args}){out}{lvl}"


class Backend:
    """Exact float64 slot-vector machine with level bookkeeping.

    Thread safety: handles are immutable and every counter update happens
    under one lock, so primitives on distinct vectors may run concurrently.
    """

    name = "ref"

    def __init__(
        self,
        slot_count: int = DEFAULT_SLOTS,
        level: int = DEFAULT_LEVEL,
        noise: float = 0.0,
        seed: int | None = None,
    ):
        if not is_pow2(slot_count) or slot_count < 2:
            raise ValueError(f"slot count must be a power of two >= 2, got {slot_count}")
        if level < 0:
            raise ValueError(f"starting level must be >= 0, got {level}")
        self.slot_count = slot_count
        self.max_level = level
        self.noise = float(noise)
        self.cost = CostReport()
        self._rng = np.random.default_rng(seed)
        self._ids = itertools.count()
        self._lock = threading.Lock()
        self._local = threading.local()
        self._recorders: list[list[Op]] = []
        self._min_level = level

    # -- bookkeeping -------------------------------------------------------

    @property
    def current_phase(self) -> str | None:
        return getattr(self._local, "phase", None)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        prev = self.current_phase
        self._local.phase = name
        try:
            yield
        finally:
            self._local.phase = prev

    @contextmanager
    def recording(self) -> Iterator[list[Op]]:
        ops: list[Op] = []
        with self._lock:
            self._recorders.append(ops)
        try:
            yield ops
        finally:
            with self._lock:
                self._recorders.remove(ops)

    def _bump(self, name: str, n: int = 1) -> None:
        self.cost.bump(self.current_phase, name, n)

    def _new(self, slots: np.ndarray, level: int, kind: str, op: str,
             inputs: Sequence[SlotVector] = (), arg=None, **counts) -> SlotVector:
        slots = np.asarray(slots, dtype=np.float64)
        slots.setflags(write=False)
        with self._lock:
            vid = next(self._ids)
            for cname, n in counts.items():
                self._bump(cname, n)
            if kind == "cipher" and level < self._min_level:
                self._min_level = level
                self.cost.levels_consumed = self.max_level - level
            if self._recorders:
                rec = Op(self.current_phase, op, tuple(v.id for v in inputs), vid, arg, level)
                for ops in self._recorders:
                    ops.append(rec)
        return SlotVector(vid, slots, level, kind)

    def _check(self, *vs: SlotVector) -> None:
        for v in vs:
            if v.size != self.slot_count:
                raise LengthMismatch(f"vector has {v.size} slots, backend has {self.slot_count}")

    def _noisy(self, slots: np.ndarray) -> np.ndarray:
        if self.noise:
            return slots + self._rng.normal(0.0, self.noise, self.slot_count)
        return slots

    # -- primitives --------------------------------------------------------

    def encode(self, values) -> SlotVector:
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (self.slot_count,):
            raise LengthMismatch(
                f"expected {self.slot_count} slot values, got shape {arr.shape}"
            )
        return self._new(arr, self.max_level, "plain", "encode",
                         arg=_compress(arr), encodes=1)

    def encrypt(self, plain: SlotVector) -> SlotVector:
        self._check(plain)
        return self._new(self._noisy(plain.slots), self.max_level, "cipher", "encrypt",
                         (plain,), encrypts=1)

    def decrypt(self, x: SlotVector) -> np.ndarray:
        self._check(x)
        return np.array(x.slots)

    def _hops(self, k: int) -> int:
        return 0 if k % self.slot_count == 0 else 1

    def rotate(self, x: SlotVector, k: int) -> SlotVector:
        self._check(x)
        k = int(k)
        if k % self.slot_count == 0:
            return x
        hops = self._hops(k)
        return self._new(np.roll(x.slots, -k), x.level, x.kind, "rotate", (x,), arg=k,
                         rotations_logical=1, rotations_total=hops,
                         rotations_decomposed=hops - 1, key_switches=hops)

    def rotate_hoisted(self, x: SlotVector, amounts: Sequence[int]) -> dict[int, SlotVector]:
        """Rotate one vector by several amounts sharing a single decomposition."""
        return {k: self.rotate(x, k) for k in amounts}

    def add(self, x: SlotVector, y: SlotVector) -> SlotVector:
        self._check(x, y)
        kind = "cipher" if "cipher" in (x.kind, y.kind) else "plain"
        level = _aligned_level(x, y)
        return self._new(x.slots + y.slots, level, kind, "add", (x, y), adds=1)

    def mul_ct(self, x: SlotVector, y: SlotVector) -> SlotVector:
        self._check(x, y)
        if x.kind != "cipher" or y.kind != "cipher":
            raise TypeError("mul_ct needs two ciphertexts")
        level = min(x.level, y.level)
        if level < 1:
            raise LevelExhausted("ciphertext multiplication at level 0 needs a bootstrap")
        return self._new(self._noisy(x.slots * y.slots), level - 1, "cipher", "mul_ct",
                         (x, y), ct_ct_mults=1)

    def mul_pt(self, x: SlotVector, p: SlotVector, mask: int | None = None) -> SlotVector:
        self._check(x, p)
        if x.kind != "cipher" or p.kind != "plain":
            raise TypeError("mul_pt needs a ciphertext and a plaintext")
        if x.level < 1:
            raise LevelExhausted("plaintext multiplication at level 0 needs a bootstrap")
        counts = {"pt_ct_mults": 1}
        if mask is not None:
            counts["masks"] = 1
        return self._new(self._noisy(x.slots * p.slots), x.level - 1, "cipher", "mul_pt",
                         (x, p), arg=mask, **counts)

    def mul(self, x: SlotVector, y: SlotVector) -> SlotVector:
        """Dispatch to mul_ct / mul_pt; plain x plain multiplies in the clear."""
        if x.kind == "cipher" and y.kind == "cipher":
            return self.mul_ct(x, y)
        if x.kind == "cipher":
            return self.mul_pt(x, y)
        if y.kind == "cipher":
            return self.mul_pt(y, x)
        return self.encode(x.slots * y.slots)

    def zeros_like(self, x: SlotVector) -> SlotVector:
        return self.encode(np.zeros(self.slot_count))


ReferenceBackend = Backend


class MeteredBackend(Backend):
    """Same values as the reference backend, plus rotation-key and hoisting accounting."""

    name = "metered"

    def __init__(
        self,
        slot_count: int = DEFAULT_SLOTS,
        level: int = DEFAULT_LEVEL,
        keys: KeyConfig | str = POW2,
        noise: float = 0.0,
        seed: int | None = None,
    ):
        super().__init__(slot_count, level, noise, seed)
        if isinstance(keys, str):
            keys = KeyConfig(keys, slot_count)
        if keys.slot_count != slot_count:
            raise ValueError("key config slot count differs from backend slot count")
        self.keys = keys

    def _hops(self, k: int) -> int:
        return self.keys.hops(k)

    def rotate_hoisted(self, x: SlotVector, amounts: Sequence[int]) -> dict[int, SlotVector]:
        out = super().rotate_hoisted(x, amounts)
        issued = sum(1 for k in amounts if k % self.slot_count)
        # Single hoisting needs dedicated keys for each amount.
        if self.keys.mode == POW2_BSGS and issued > 1:
            with self._lock:
                self._bump("hoisted_decompositions", issued - 1)
        return out


def make_backend(kind: str = "ref", slot_count: int = DEFAULT_SLOTS, level: int = DEFAULT_LEVEL,
                 keys: str = POW2, noise: float = 0.0, seed: int | None = None) -> Backend:
    if kind == "ref":
        return ReferenceBackend(slot_count, level, noise=noise, seed=seed)
    if kind == "metered":
        return MeteredBackend(slot_count, level, keys=keys, noise=noise, seed=seed)
    raise ValueError(f"unknown backend {kind!r}; expected 'ref' or 'metered'")


def _aligned_level(x: SlotVector, y: SlotVector) -> int:
    # Plaintexts can be encoded at any level, so only ciphertext levels bind.
    levels = [v.level for v in (x, y) if v.kind == "cipher"] or [x.level, y.level]
    return min(levels)


def _compress(arr: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    idx = np.flatnonzero(arr)
    return arr.shape[0], idx, arr[idx]


def _decompress(packed) -> np.ndarray:
    n, idx, vals = packed
    out = np.zeros(n)
    out[idx] = vals
    return out
