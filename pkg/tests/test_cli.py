import json

import pytest

from fhe_einsum.cli import main, parse_shapes, random_inputs
from fhe_einsum.packing import dump_tensor


def run_json(capsys, *argv):
    code = main(list(argv))
    return code, json.loads(capsys.readouterr().out)


def test_parse_shapes():
    assert parse_shapes("4x5,5x2") == [(4, 5), (5, 2)]
    assert parse_shapes("8,()") == [(8,), ()]


def test_random_inputs_reproducible():
    a = random_inputs([(3, 2)], 7)[0]
    b = random_inputs([(3, 2)], 7)[0]
    assert (a == b).all() and (a >= -1).all() and (a < 1).all()


def test_run_matmul_reference(capsys, tmp_path):
    out = tmp_path / "report.json"
    code, doc = run_json(capsys, "run", "ij,jk->ik", "--shapes", "4x5,5x2",
                         "--backend", "ref", "--json", str(out))
    assert code == 0
    assert doc["correctness"]["oracle_match"] is True
    assert doc["depth"] == 3
    assert json.loads(out.read_text()) == doc
    expected = {"equation", "shapes", "slot_count", "key_mode", "key_count", "backend",
                "start_level", "noise", "seed", "correctness", "cost", "depth",
                "wall_time_ms", "trace", "error"}
    assert set(doc) == expected


def test_bsgs_keys_reduce_rotations(capsys):
    _, pow2 = run_json(capsys, "run", "ij,jk->ik", "--shapes", "4x5,5x2", "--keys", "pow2")
    _, both = run_json(capsys, "run", "ij,jk->ik", "--shapes", "4x5,5x2", "--keys", "pow2+bsgs")
    assert both["cost"]["rotations_total"] < pow2["cost"]["rotations_total"]
    assert both["correctness"]["oracle_match"] and pow2["correctness"]["oracle_match"]


def test_reports_stable_apart_from_wall_time(capsys):
    argv = ("run", "ik,k->i", "--shapes", "6x5,5", "--seed", "3", "--trace")
    _, a = run_json(capsys, *argv)
    _, b = run_json(capsys, *argv)
    a.pop("wall_time_ms"), b.pop("wall_time_ms")
    assert a == b


def test_run_noise(capsys):
    code, doc = run_json(capsys, "run", "ij,jk->ik", "--shapes", "4x5,5x2",
                         "--noise", str(2.0**-30), "--seed", "1")
    assert code == 0
    assert doc["correctness"]["tolerance"] == 1e-4
    assert 0 < doc["correctness"]["max_abs_error"] < 1e-4


def test_run_from_files(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    dump_tensor([[1, 2], [3, 4]], a)
    dump_tensor([[1, 0], [0, 1]], b)
    code, doc = run_json(capsys, "run", "ij,jk->ik", "--input", str(a), "--input", str(b))
    assert code == 0 and doc["shapes"] == [[2, 2], [2, 2]]


def test_run_plain_operand(capsys):
    code, doc = run_json(capsys, "run", "ik,k->i", "--shapes", "6x5,5", "--plain", "0")
    assert code == 0 and doc["cost"]["ct_ct_mults"] == 0


def test_does_not_fit_exit_3(capsys):
    code, doc = run_json(capsys, "run", "ij->ji", "--shapes", "128x128", "--slots", "8")
    assert code == 3
    assert doc["error"]["type"] == "DoesNotFit"


def test_level_exhausted_exit_3(capsys):
    code, doc = run_json(capsys, "run", "ij,jk,kl->il", "--shapes", "3x4,4x5,5x2", "--slots", "256",
                         "--level", "3")
    assert code == 3 and doc["error"]["type"] == "LevelExhausted"


@pytest.mark.parametrize(
    "argv",
    [
        ("run", "ij,jk->ik", "--shapes", "4x5,6x2"),
        ("run", "ij,jk", "--shapes", "4x5,5x2"),
        ("run", "ij->ji", "--shapes", "4x5", "--slots", "12"),
        ("run", "ij->ji"),
    ],
)
def test_validation_errors_exit_2(capsys, argv):
    code, doc = run_json(capsys, *argv)
    assert code == 2 and doc["error"]["type"]


def test_mismatch_exit_4(capsys, monkeypatch):
    import fhe_einsum.cli as cli

    monkeypatch.setattr(cli, "naive_einsum_oracle", lambda eq, ts: ts[0].T * 0 + 1e9)
    code, doc = run_json(capsys, "run", "ij->ji", "--shapes", "2x3")
    assert code == 4 and doc["correctness"]["oracle_match"] is False


def test_trace_matmul(capsys):
    assert main(["trace", "ij,jk->ik", "--shapes", "4x5,5x2", "--slots", "64"]) == 0
    text = capsys.readouterr().out
    reduce_line = next(l for l in text.splitlines() if l.startswith("[reduce]"))
    assert "rotations=[8, 16, 32]" in reduce_line


def test_trace_dot_has_empty_permute(capsys):
    assert main(["trace", "i,i->", "--shapes", "8,8"]) == 0
    assert "[permute] 0 ops" in capsys.readouterr().out


def test_trace_transpose_has_empty_multiply(capsys, tmp_path):
    out = tmp_path / "trace.json"
    assert main(["trace", "ij->ji", "--shapes", "3x5", "--json", str(out)]) == 0
    assert "[multiply] 0 ops" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert [p["name"] for p in doc["phases"]][2] == "multiply"


@pytest.mark.parametrize(
    "slots, mode, count", [(16384, "pow2", 14), (16384, "pow2+bsgs", 270), (1024, "pow2", 10)]
)
def test_keys(capsys, slots, mode, count):
    assert main(["keys", "--slots", str(slots), "--keys", mode]) == 0
    assert capsys.readouterr().out.strip().endswith(f"count: {count}")
