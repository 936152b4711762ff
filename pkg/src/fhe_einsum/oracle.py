"""Brute-force einsum used as ground truth.

Deliberately self-contained: its own equation parsing and plain nested
loops over every label assignment. Only the exception classes are shared.
"""
from __future__ import annotations

import itertools
import string

import numpy as np

from .errors import (
    ImplicitOutput,
    MalformedEquation,
    RankMismatch,
    RepeatedLabel,
    SizeConflict,
    UnknownOutputLabel,
)


def naive_einsum_oracle(equation: str, tensors) -> np.ndarray:
    """Evaluate ``equation`` by summing products over all index assignments.

    >>> naive_einsum_oracle("ij->", [[[1, 2], [3, 4]]]).item()
    10.0
    """
    eq = equation.replace(" ", "")
    if "->" not in eq:
        raise ImplicitOutput(equation)
    lhs, sep, rhs = eq.partition("->")
    if "->" in rhs:
        raise MalformedEquation(equation)
    terms = lhs.split(",")
    for term in terms + [rhs]:
        for c in term:
            if c not in string.ascii_letters:
                raise MalformedEquation(f"bad label {c!r} in {equation!r}")
        if len(set(term)) != len(term):
            raise RepeatedLabel(term)

    arrays = [np.asarray(t, dtype=np.float64) for t in tensors]
    if len(arrays) != len(terms):
        raise RankMismatch(f"{len(terms)} subscripts, {len(arrays)} tensors")
    extent: dict[str, int] = {}
    for term, arr in zip(terms, arrays):
        if arr.ndim != len(term):
            raise RankMismatch(f"{term!r} vs shape {arr.shape}")
        for c, n in zip(term, arr.shape):
            if n < 1 or extent.setdefault(c, n) != n:
                raise SizeConflict(f"label {c!r}")
    for c in rhs:
        if c not in extent:
            raise UnknownOutputLabel(c)

    summed = [c for c in extent if c not in rhs]
    result = np.zeros(tuple(extent[c] for c in rhs))
    for out_idx in itertools.product(*(range(extent[c]) for c in rhs)):
        binding = dict(zip(rhs, out_idx))
        total = 0.0
        for red_idx in itertools.product(*(range(extent[c]) for c in summed)):
            binding.update(zip(summed, red_idx))
            prod = 1.0
            for term, arr in zip(terms, arrays):
                prod *= arr[tuple(binding[c] for c in term)]
            total += prod
        result[out_idx] = total
    return result
