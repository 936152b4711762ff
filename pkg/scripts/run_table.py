"""Cost table for the fifteen benchmark expressions and the attention case.

For each expression: depth, rotations under power-of-two keys only and with
the extra BSGS keys, multiplications, and max error against the oracle.

    python scripts/run_table.py                 # desk shapes, S=1024
    python scripts/run_table.py --full          # full shapes, S=16384 (slow)
    python scripts/run_table.py --csv out.csv
"""
import argparse
import csv
import sys
import time

import numpy as np

from fhe_einsum import MeteredBackend, decrypt_tensor, einsum, encrypt_tensor, naive_einsum_oracle
from fhe_einsum.backend import POW2, POW2_BSGS
from fhe_einsum.cli import random_inputs
from fhe_einsum.workloads import ATTENTION, TABLE


def measure(workload, shapes, slots, keys, seed, check):
    backend = MeteredBackend(slots, level=workload.full_level + 1, keys=keys)
    tensors = random_inputs(shapes, seed)
    operands = [encrypt_tensor(backend, t) for t in tensors]
    t0 = time.perf_counter()
    res = einsum(workload.equation, operands, backend)
    elapsed = time.perf_counter() - t0
    err = float("nan")
    if check:
        got = decrypt_tensor(backend, res.output)
        want = naive_einsum_oracle(workload.equation, tensors) if check == "naive" else \
            np.einsum(workload.equation, *tensors)
        err = float(np.max(np.abs(got - want)))
    return res, elapsed, err


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--full", action="store_true", help="full shapes at S=16384")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    args = p.parse_args(argv)

    slots = 16384 if args.full else 1024
    # the nested-loop oracle is too slow at full scale; numpy's einsum stands in there
    check = "numpy" if args.full else "naive"
    rows = []
    workloads = list(TABLE) + [ATTENTION]
    header = f"{'operation':26s} {'equation':20s} {'depth':>5s} {'rot pow2':>9s} " \
             f"{'rot +keys':>9s} {'hoisted':>7s} {'ct*ct':>5s} {'pt*ct':>6s} {'err':>9s} {'s':>6s}"
    print(header)
    for w in workloads:
        shapes = w.full_shapes if args.full else w.desk_shapes
        slots_w = 16384 if w is ATTENTION else slots
        r1, t1, err = measure(w, shapes, slots_w, POW2, args.seed, check)
        r2, t2, _ = measure(w, shapes, slots_w, POW2_BSGS, args.seed, None)
        row = {
            "operation": w.name,
            "equation": w.equation,
            "shapes": "x".join(map(str, shapes[0])) + ("..." if len(shapes) > 1 else ""),
            "depth": r1.depth,
            "rotations_pow2": r1.cost.rotations_total,
            "rotations_bsgs_keys": r2.cost.rotations_total,
            "hoisted_decompositions": r2.cost.hoisted_decompositions,
            "ct_ct_mults": r1.cost.ct_ct_mults,
            "pt_ct_mults": r1.cost.pt_ct_mults,
            "max_abs_error": err,
            "seconds": t1 + t2,
        }
        rows.append(row)
        print(f"{w.name:26s} {w.equation:20s} {row['depth']:5d} {row['rotations_pow2']:9d} "
              f"{row['rotations_bsgs_keys']:9d} {row['hoisted_decompositions']:7d} "
              f"{row['ct_ct_mults']:5d} {row['pt_ct_mults']:6d} {err:9.1e} {row['seconds']:6.2f}")
        sys.stdout.flush()

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)


if __name__ == "__main__":
    main()
