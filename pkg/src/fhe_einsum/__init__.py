"""Einsum over packed slot vectors using only SIMD add, multiply and rotation."""

from .backend import (
    Backend,
    CostReport,
    KeyConfig,
    MeteredBackend,
    ReferenceBackend,
    SlotVector,
    make_backend,
)
from .engine import (
    EinsumResult,
    ExecutionTrace,
    decrypt_tensor,
    einsum,
    encrypt_tensor,
    multiply_tree,
    replay,
)
from .equation import EinsumSpec, LayoutPlan, parse, plan_layout
from .errors import (
    CapacityError,
    DoesNotFit,
    EinsumError,
    ImplicitOutput,
    LengthMismatch,
    LevelExhausted,
    MalformedEquation,
    RankMismatch,
    RepeatedLabel,
    SizeConflict,
    UnknownOutputLabel,
)
from .oracle import naive_einsum_oracle
from .packing import PackedTensor, pack, pad_shape, unpack

__version__ = "0.1.0"
