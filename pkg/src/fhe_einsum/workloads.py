"""The fifteen benchmark expressions, at desk scale and at full scale.

Desk shapes fit in 1024 slots and use non-power-of-two extents where they
can, so padding is exercised. Full shapes fill a 16384-slot vector.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Workload:
    name: str
    equation: str
    desk_shapes: tuple[tuple[int, ...], ...]
    full_shapes: tuple[tuple[int, ...], ...]
    full_level: int = 3


TABLE = (
    Workload("matrix transpose", "ij->ji", ((6, 12),), ((128, 128),)),
    Workload("matrix sum", "ij->", ((12, 20),), ((128, 128),)),
    Workload("column sum", "ij->j", ((12, 20),), ((128, 128),)),
    Workload("row sum", "ij->i", ((12, 20),), ((128, 128),)),
    Workload("matrix x vector", "ik,k->i", ((12, 10), (10,)), ((128, 128), (128,))),
    Workload("matrix x matrix", "ik,kj->ij", ((4, 5), (5, 6)), ((16, 32), (32, 32))),
    Workload("dot product", "i,i->", ((300,), (300,)), ((16384,), (16384,))),
    Workload("inner product", "ij,ij->", ((12, 20), (12, 20)), ((128, 128), (128, 128))),
    Workload("hadamard product", "ij,ij->ij", ((12, 20), (12, 20)), ((128, 128), (128, 128))),
    Workload("outer product", "i,j->ij", ((12,), (20,)), ((128,), (128,))),
    Workload("batched matrix x matrix", "ijk,ikl->ijl", ((3, 4, 3), (3, 3, 4)),
             ((16, 8, 8), (16, 8, 8))),
    Workload("3-way hadamard", "ij,ij,ij->ij", ((12, 20), (12, 20), (12, 20)),
             ((128, 128), (128, 128), (128, 128))),
    Workload("chained matrix x matrix", "ij,jk,kl->il", ((3, 4), (4, 5), (5, 2)),
             ((16, 8), (8, 8), (8, 16)), full_level=4),
    Workload("bilinear transform", "ik,jkl,il->ij", ((2, 3), (3, 3, 4), (2, 4)),
             ((8, 16), (8, 16, 16), (8, 16)), full_level=4),
    Workload("tensor contraction", "pqrs,tuqvr->pstuv", ((2, 3, 4, 2), (1, 2, 3, 2, 4)),
             ((2, 4, 8, 8), (1, 4, 4, 2, 8))),
)

ATTENTION = Workload(
    "attention scores", "bthd,bThd->bhtT",
    ((2, 5, 8, 16), (2, 5, 8, 16)), ((2, 5, 8, 16), (2, 5, 8, 16)),
)
