"""Command-line front end.

    fhe-einsum run "ij,jk->ik" --shapes 4x5,5x2 [--backend ref|metered] [--keys pow2|pow2+bsgs]
    fhe-einsum trace "ij,jk->ik" --shapes 4x5,5x2
    fhe-einsum keys --slots 16384 --keys pow2+bsgs

Exit codes: 0 success, 2 validation error, 3 capacity/level error, 4 oracle mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .backend import DEFAULT_LEVEL, KEY_MODES, POW2, KeyConfig, make_backend
from .engine import decrypt_tensor, einsum, encrypt_tensor
from .equation import is_pow2
from .errors import CapacityError, EinsumError
from .oracle import naive_einsum_oracle
from .packing import load_tensor, pack

EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_MISMATCH = 0, 2, 3, 4
DEFAULT_CLI_SLOTS = 64
NOISE_TOLERANCE = 1e-4
EXACT_TOLERANCE = 1e-12


class UsageError(ValueError):
    pass


def parse_shapes(text: str) -> list[tuple[int, ...]]:
    """'4x5,5x2' -> [(4, 5), (5, 2)]; '()' is a scalar."""
    shapes = []
    for token in text.split(","):
        token = token.strip()
        if token in ("()", ""):
            shapes.append(())
            continue
        try:
            shapes.append(tuple(int(d) for d in token.lower().split("x")))
        except ValueError:
            raise UsageError(f"bad shape {token!r}; expected e.g. 4x5") from None
    return shapes


def random_inputs(shapes, seed: int) -> list[np.ndarray]:
    """Uniform [-1, 1) draws from numpy's PCG64 generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    return [rng.uniform(-1.0, 1.0, size=shape) for shape in shapes]


def _inputs(args) -> list[np.ndarray]:
    if bool(args.shapes) == bool(args.input):
        raise UsageError("give exactly one of --shapes or --input")
    if args.input:
        return [load_tensor(p) for p in args.input]
    return random_inputs(parse_shapes(args.shapes), args.seed)


def _check_slots(slots: int) -> None:
    if not is_pow2(slots) or slots < 2:
        raise UsageError(f"--slots must be a power of two >= 2, got {slots}")


def _plain_indices(text: str | None) -> set[int]:
    if not text:
        return set()
    return {int(t) for t in text.split(",")}


def build_report(args, tensors) -> tuple[dict, int]:
    _check_slots(args.slots)
    backend = make_backend(args.backend, args.slots, args.level, keys=args.keys,
                           noise=args.noise, seed=args.seed)
    plain = _plain_indices(args.plain)
    operands = [
        pack(t, args.slots)[1] if n in plain else encrypt_tensor(backend, t)
        for n, t in enumerate(tensors)
    ]
    t0 = time.perf_counter()
    res = einsum(args.equation, operands, backend, method=args.method)
    wall = (time.perf_counter() - t0) * 1e3

    got = decrypt_tensor(backend, res.output)
    want = naive_einsum_oracle(args.equation, tensors)
    err = float(np.max(np.abs(got - want))) if want.size else 0.0
    tol = NOISE_TOLERANCE if args.noise else EXACT_TOLERANCE
    match = err <= tol
    report = {
        "equation": args.equation,
        "shapes": [list(t.shape) for t in tensors],
        "slot_count": args.slots,
        "key_mode": args.keys if args.backend == "metered" else None,
        "key_count": KeyConfig(args.keys, args.slots).key_count if args.backend == "metered" else None,
        "backend": args.backend,
        "start_level": args.level,
        "noise": args.noise,
        "seed": args.seed,
        "correctness": {"max_abs_error": err, "tolerance": tol, "oracle_match": match},
        "cost": res.cost.to_dict(),
        "depth": res.depth,
        "wall_time_ms": wall,
        "trace": res.trace.to_dict() if args.trace else None,
        "error": None,
    }
    return report, EXIT_OK if match else EXIT_MISMATCH


def _error_report(args, exc: Exception) -> dict:
    return {
        "equation": getattr(args, "equation", None),
        "error": {"type": type(exc).__name__, "message": str(exc)},
    }


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def _guard(args, fn) -> int:
    try:
        return fn()
    except CapacityError as exc:
        _emit(_error_report(args, exc), getattr(args, "json", None))
        return EXIT_CAPACITY
    except (EinsumError, UsageError, ValueError, OSError) as exc:
        _emit(_error_report(args, exc), getattr(args, "json", None))
        return EXIT_VALIDATION


def cmd_run(args) -> int:
    def go():
        report, code = build_report(args, _inputs(args))
        _emit(report, args.json)
        return code

    return _guard(args, go)


def cmd_trace(args) -> int:
    def go():
        _check_slots(args.slots)
        backend = make_backend("ref", args.slots, args.level)
        operands = [encrypt_tensor(backend, t) for t in _inputs(args)]
        res = einsum(args.equation, operands, backend, method=args.method)
        if args.json:
            Path(args.json).write_text(json.dumps(res.trace.to_dict(), indent=2) + "\n")
        print(res.trace.listing())
        print(f"# depth {res.depth}, rotations {res.cost.rotations_total}")
        return EXIT_OK

    return _guard(args, go)


def cmd_keys(args) -> int:
    def go():
        _check_slots(args.slots)
        cfg = KeyConfig(args.keys, args.slots)
        doc = {
            "slot_count": cfg.slot_count,
            "mode": cfg.mode,
            "pow2_keys": list(cfg.pow2_keys),
            "bsgs_keys": list(cfg.bsgs_keys),
            "count": cfg.key_count,
        }
        if args.json:
            Path(args.json).write_text(json.dumps(doc, indent=2) + "\n")
        print(f"power-of-two keys ({len(cfg.pow2_keys)}, each serves +k and -k): "
              f"{' '.join(map(str, cfg.pow2_keys))}")
        if cfg.bsgs_keys:
            print(f"bsgs keys ({len(cfg.bsgs_keys)}): {' '.join(map(str, cfg.bsgs_keys))}")
        print(f"count: {cfg.key_count}")
        return EXIT_OK

    return _guard(args, go)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fhe-einsum", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("equation")
        sp.add_argument("--shapes", help="operand shapes, e.g. 4x5,5x2")
        sp.add_argument("--input", action="append", metavar="FILE",
                        help='tensor JSON {"shape": [...], "data": [...]}, once per operand')
        sp.add_argument("--slots", type=int, default=DEFAULT_CLI_SLOTS)
        sp.add_argument("--level", type=int, default=DEFAULT_LEVEL)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--method", choices=("bsgs", "hs"), default="bsgs")
        sp.add_argument("--json", metavar="OUT")

    run = sub.add_parser("run", help="execute an expression and compare with the oracle")
    common(run)
    run.add_argument("--backend", choices=("ref", "metered"), default="metered")
    run.add_argument("--keys", choices=KEY_MODES, default=POW2)
    run.add_argument("--noise", type=float, default=0.0, help="Gaussian noise stddev")
    run.add_argument("--plain", help="comma-separated operand indices left unencrypted")
    run.add_argument("--trace", action="store_true", help="include the op trace in the report")
    run.set_defaults(func=cmd_run)

    tr = sub.add_parser("trace", help="print the phase-annotated op listing")
    common(tr)
    tr.set_defaults(func=cmd_trace)

    keys = sub.add_parser("keys", help="list the rotation keys of a key configuration")
    keys.add_argument("--slots", type=int, default=DEFAULT_CLI_SLOTS)
    keys.add_argument("--keys", choices=KEY_MODES, default=POW2)
    keys.add_argument("--json", metavar="OUT")
    keys.set_defaults(func=cmd_keys)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
