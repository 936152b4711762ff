import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhe_einsum.backend import (
    POW2,
    POW2_BSGS,
    KeyConfig,
    MeteredBackend,
    ReferenceBackend,
    bsgs_split,
    make_backend,
)
from fhe_einsum.errors import LengthMismatch, LevelExhausted
from fhe_einsum.packing import pack


def enc(backend, values):
    return backend.encrypt(backend.encode(values))


def test_encode_values():
    b = ReferenceBackend(8)
    p = b.encode(np.zeros(8))
    assert p.kind == "plain" and p.level == b.max_level
    assert b.decrypt(p).tolist() == [0] * 8
    p = b.encode(pack([[1, 2], [3, 4]], 8)[0])
    assert b.decrypt(p).tolist() == [1, 2, 3, 4, 0, 0, 0, 0]


def test_encode_length_mismatch():
    with pytest.raises(LengthMismatch):
        ReferenceBackend(8).encode(np.zeros(7))


def test_encrypt_round_trip_exact():
    b = ReferenceBackend(64)
    v = np.random.default_rng(0).uniform(-1, 1, 64)
    ct = enc(b, v)
    assert ct.kind == "cipher"
    np.testing.assert_array_equal(b.decrypt(ct), v)


def test_encrypt_round_trip_noisy():
    b = MeteredBackend(16384, noise=2.0**-30, seed=1)
    v = np.random.default_rng(0).uniform(-1, 1, 16384)
    err = np.abs(b.decrypt(enc(b, v)) - v)
    assert 0 < err.max() < 1e-4


def test_handles_are_immutable():
    b = ReferenceBackend(4)
    ct = enc(b, [1, 2, 3, 4])
    with pytest.raises(ValueError):
        ct.slots[0] = 9


def test_rotate_convention():
    b = ReferenceBackend(4)
    assert b.decrypt(b.rotate(enc(b, [0, 1, 2, 3]), 1)).tolist() == [1, 2, 3, 0]


def test_rotate_down_by_four():
    b = ReferenceBackend(8)
    x = enc(b, [1, 2, 3, 4, 0, 0, 0, 0])
    assert b.decrypt(b.rotate(x, -4)).tolist() == [0, 0, 0, 0, 1, 2, 3, 4]


def test_rotate_zero_is_free():
    b = ReferenceBackend(8)
    x = enc(b, np.arange(8.0))
    assert b.rotate(x, 8) is x
    assert b.cost.rotations_total == 0


def test_rotate_by_three_pow2_only():
    b = MeteredBackend(16384, keys=POW2)
    b.rotate(enc(b, np.zeros(16384)), 3)
    assert b.cost.rotations_logical == 1
    assert b.cost.rotations_total == 2
    assert b.cost.rotations_decomposed == 1
    assert b.cost.key_switches == 2


@given(st.integers(-40, 40), st.integers(-40, 40))
@settings(max_examples=50, deadline=None)
def test_rotation_composes(a, c):
    b = ReferenceBackend(16)
    x = enc(b, np.arange(16.0))
    np.testing.assert_array_equal(
        b.decrypt(b.rotate(b.rotate(x, a), c)), b.decrypt(b.rotate(x, a + c))
    )


@given(st.integers(1, 16383))
@settings(max_examples=200, deadline=None)
def test_pow2_decomposition_count(k):
    cfg = KeyConfig(POW2, 16384)
    assert cfg.hops(k) == min(bin(k).count("1"), bin(16384 - k).count("1"))
    assert cfg.hops(k) <= bin(k).count("1")
    if k < 16384 // 2 and bin(k).count("1") <= 2:
        assert cfg.hops(k) == bin(k).count("1")


def test_pow2_keys_serve_both_directions():
    cfg = KeyConfig(POW2, 16384)
    assert cfg.hops(-1) == 1 and cfg.hops(-4096) == 1 and cfg.hops(0) == 0


def test_key_counts():
    assert KeyConfig(POW2, 16384).key_count == 14
    assert KeyConfig(POW2_BSGS, 16384).key_count == 14 + 256
    assert KeyConfig(POW2, 1024).key_count == 10


def test_bsgs_keys_make_bsgs_amounts_single_hop():
    cfg = KeyConfig(POW2_BSGS, 256)
    n1, n2 = bsgs_split(256)
    for i in range(1, n1):
        assert cfg.hops(i) == 1
    for j in range(1, n2):
        assert cfg.hops(n1 * j) == 1


@pytest.mark.parametrize("S, split", [(16384, (128, 128)), (256, (16, 16)), (128, (16, 8)), (2, (2, 1))])
def test_bsgs_split(S, split):
    assert bsgs_split(S) == split


def test_add_keeps_level():
    b = ReferenceBackend(4)
    x, y = enc(b, [1, 2, 3, 4]), enc(b, [1, 1, 1, 1])
    z = b.add(x, y)
    assert b.decrypt(z).tolist() == [2, 3, 4, 5]
    assert z.level == x.level


def test_mul_levels_and_exhaustion():
    b = ReferenceBackend(4, level=1)
    x = enc(b, [1, 2, 3, 4])
    y = b.mul_ct(x, x)
    assert y.level == 0
    assert b.decrypt(y).tolist() == [1, 4, 9, 16]
    with pytest.raises(LevelExhausted):
        b.mul_ct(y, y)
    with pytest.raises(LevelExhausted):
        b.mul_pt(y, b.encode([1, 1, 1, 1]))


def test_mul_pt_mask():
    b = MeteredBackend(8)
    x = enc(b, np.arange(1.0, 9.0))
    mask = np.array([1, 0, 1, 0, 1, 1, 0, 0], dtype=float)
    y = b.mul_pt(x, b.encode(mask))
    np.testing.assert_array_equal(b.decrypt(y), np.arange(1.0, 9.0) * mask)
    assert y.level == x.level - 1
    assert b.cost.pt_ct_mults == 1


def test_level_alignment_by_mod_drop():
    b = MeteredBackend(4, level=3)
    x = enc(b, [1, 2, 3, 4])
    low = b.mul_pt(x, b.encode([1, 1, 1, 1]))
    assert b.add(x, low).level == 2
    assert b.mul_ct(x, low).level == 1
    assert b.cost.levels_consumed == 2


def test_decrypt_plain_is_readable():
    b = ReferenceBackend(4)
    assert b.decrypt(b.encode([1, 2, 3, 4])).tolist() == [1, 2, 3, 4]


def random_program(backend, seed):
    rng = np.random.default_rng(seed)
    x = enc(backend, rng.uniform(-1, 1, backend.slot_count))
    y = enc(backend, rng.uniform(-1, 1, backend.slot_count))
    for _ in range(6):
        op = rng.integers(4)
        if op == 0:
            x = backend.rotate(x, int(rng.integers(-40, 40)))
        elif op == 1:
            x = backend.add(x, y)
        elif op == 2 and x.level > 1:
            x = backend.mul_ct(x, y)
        else:
            x = backend.mul_pt(x, backend.encode(rng.uniform(-1, 1, backend.slot_count)))
    return backend.decrypt(x)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("keys", [POW2, POW2_BSGS])
def test_metered_matches_reference(seed, keys):
    ref = random_program(ReferenceBackend(32, level=10), seed)
    met = random_program(MeteredBackend(32, level=10, keys=keys), seed)
    np.testing.assert_array_equal(ref, met)


def test_hoisting_recorded_only_with_bsgs_keys():
    for keys, saved in ((POW2, 0), (POW2_BSGS, 3)):
        b = MeteredBackend(16, keys=keys)
        b.rotate_hoisted(enc(b, np.zeros(16)), [1, 2, 3, 0, 5])
        assert b.cost.hoisted_decompositions == saved


def test_counters_are_thread_safe():
    b = ReferenceBackend(64)
    x = enc(b, np.arange(64.0))

    def work():
        for k in range(1, 201):
            b.rotate(x, k)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # amounts that are multiples of 64 are no-ops: 3 per thread
    assert b.cost.rotations_logical == 8 * (200 - 3)


def test_phase_breakdown():
    b = ReferenceBackend(8)
    x = enc(b, np.arange(8.0))
    with b.phase("reduce"):
        b.rotate(x, 1)
    with b.phase("broadcast"):
        b.add(x, x)
    assert b.cost.phases["reduce"]["rotations_total"] == 1
    assert b.cost.phases["broadcast"]["adds"] == 1


def test_make_backend():
    assert isinstance(make_backend("ref", 8), ReferenceBackend)
    m = make_backend("metered", 8, keys=POW2_BSGS)
    assert isinstance(m, MeteredBackend) and m.keys.mode == POW2_BSGS
    with pytest.raises(ValueError):
        make_backend("gpu")
    with pytest.raises(ValueError):
        ReferenceBackend(12)
