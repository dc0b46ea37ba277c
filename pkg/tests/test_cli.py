"""Command-line surface: artifacts, exit codes, generators, bench."""

import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from qtvm.cli import generate_benchmark_program, main, parse_seed, parse_size
from qtvm.compiler import compile_file, emit
from qtvm.statevector import load_state

BELL = "qubits 2\nh(0)\ncnot(0, 1)\nmeas(0, 0)\nmeas(1, 1)\n"


def load_schema(name: str) -> dict:
    text = resources.files("qtvm.schemas").joinpath(name).read_text()
    return json.loads(text)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


# --------------------------------------------------------------------------
# option parsing


def test_parse_size_accepts_binary_suffixes():
    assert parse_size("1024") == 1024
    assert parse_size("64k") == 64 * 1024
    assert parse_size("512mb") == 512 << 20
    assert parse_size("8G") == 8 << 30
    assert parse_size("2t") == 2 << 40


@pytest.mark.parametrize("bad", ["", "12q", "-4k", "0", "k"])
def test_parse_size_rejects_junk(bad):
    with pytest.raises(Exception):
        parse_size(bad)


def test_parse_seed_formats():
    assert parse_seed("42") == 42
    assert parse_seed("0x10") == 16
    drawn = parse_seed("random")
    assert 0 <= drawn < (1 << 63)


def test_version_and_missing_command_exit_via_argparse(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


# --------------------------------------------------------------------------
# gen -> run round trips


def test_gen_teleport_then_run_writes_valid_histogram(workdir, capsys):
    assert main(["gen", "teleport", "-o", "tp.qtasm"]) == 0
    assert main(["run", "tp.qtasm", "--shots", "100", "--seed", "11"]) == 0

    payload = json.loads(Path("tp.hist.json").read_text())
    jsonschema.validate(payload, load_schema("histogram.schema.json"))
    assert payload["shots"] == 100
    assert payload["num_qubits"] == 3
    assert sum(payload["counts"].values()) == 100
    assert set(payload["counts"]) <= {"00", "01", "10", "11"}

    csv_lines = Path("tp.hist.csv").read_text().splitlines()
    assert csv_lines[0] == "outcome,count"
    assert len(csv_lines) == len(payload["counts"]) + 1

    out = capsys.readouterr().out
    assert "wrote tp.hist.json" in out
    assert "3 qubits" in out


def test_run_is_reproducible_for_a_fixed_seed(workdir):
    Path("bell.qtasm").write_text(BELL)
    assert main(["run", "bell.qtasm", "--shots", "64", "--seed", "3", "-o", "a"]) == 0
    assert main(["run", "bell.qtasm", "--shots", "64", "--seed", "3", "-o", "b"]) == 0
    first = json.loads(Path("a.hist.json").read_text())["counts"]
    second = json.loads(Path("b.hist.json").read_text())["counts"]
    assert first == second
    assert set(first) <= {"00", "11"}


def test_gen_tfim_then_run_writes_snapshot_series(workdir):
    assert main([
        "gen", "tfim", "--l", "4", "--g1", "2.0", "--dt", "0.05", "--steps", "4",
        "-o", "quench.qtasm",
    ]) == 0
    assert main(["run", "quench.qtasm", "--seed", "1", "-o", "quench"]) == 0

    payload = json.loads(Path("quench.hist.json").read_text())
    lines = Path("quench.snapshots.csv").read_text().splitlines()
    assert lines[0] == "tag,mz,mx,rate"
    assert len(lines) == payload["snapshot_count"] + 1
    tag0 = lines[1].split(",")
    # Fully polarized start: <Z> = 1, overlap 1 so the rate term is exactly 0.
    assert float(tag0[1]) == pytest.approx(1.0, abs=1e-12)
    assert float(tag0[3]) == 0.0
    assert all(float(row.split(",")[3]) >= 0.0 for row in lines[1:])


def test_run_dump_states_writes_loadable_snapshots(workdir):
    assert main([
        "gen", "tfim", "--l", "3", "--g1", "1.0", "--dt", "0.1", "--steps", "2",
        "-o", "q.qtasm",
    ]) == 0
    assert main(["run", "q.qtasm", "--seed", "9", "--dump-states", "states"]) == 0
    dumps = sorted(Path("states").glob("snap*.state"))
    assert dumps
    with open(dumps[0], "rb") as fh:
        state = load_state(fh)
    assert state.num_qubits == 3
    assert state.norm_sq() == pytest.approx(1.0, abs=1e-12)


def test_gen_shor_source_compiles(workdir):
    assert main(["gen", "shor", "--n", "15", "--phase-bits", "4", "-o", "s.qtasm"]) == 0
    program = compile_file("s.qtasm")
    assert program.num_qubits == 16


def test_gen_teleport_rejects_partial_prep(workdir, capsys):
    assert main(["gen", "teleport", "--theta", "0.4"]) == 2
    assert "--theta/--phi/--lam" in capsys.readouterr().err


# --------------------------------------------------------------------------
# state


def test_state_command_dumps_the_final_vector(workdir, capsys):
    Path("bell.qtasm").write_text("qubits 2\nh(0)\ncnot(0, 1)\n")
    assert main(["state", "bell.qtasm"]) == 0
    raw = Path("bell.state").read_bytes()
    assert len(raw) == 9 + 2 * 4 * 8
    assert raw[:4] == b"QTVM"
    with open("bell.state", "rb") as fh:
        state = load_state(fh)
    amps = state.to_complex()
    assert amps[0] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert amps[3] == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert "wrote bell.state" in capsys.readouterr().out


# --------------------------------------------------------------------------
# exit codes


def test_missing_file_is_a_usage_error(workdir, capsys):
    assert main(["run", "absent.qtasm"]) == 2
    assert "no such file" in capsys.readouterr().err


def test_compile_error_is_a_usage_error(workdir, capsys):
    Path("bad.qtasm").write_text("qubits 2\nfrobnicate(0)\n")
    assert main(["run", "bad.qtasm"]) == 2
    assert "compile error" in capsys.readouterr().err


def test_capacity_overflow_maps_to_exit_3(workdir, capsys):
    Path("big.qtasm").write_text("qubits 26\nh(25)\n")
    assert main(["state", "big.qtasm", "--mem", "1m"]) == 3
    assert "capacity" in capsys.readouterr().err


def test_exhausted_debug_budget_maps_to_exit_1(workdir, capsys):
    Path("two.qtasm").write_text("qubits 2\nh(0)\nh(1)\nmeas(0, 0)\nmeas(1, 1)\n")
    assert main(["debug", "two.qtasm", "--max-meas", "1"]) == 1
    assert "budget" in capsys.readouterr().err


# --------------------------------------------------------------------------
# debug output


def test_debug_json_matches_the_tree_schema(workdir):
    Path("bell.qtasm").write_text(BELL)
    assert main(["debug", "bell.qtasm", "--json", "--tree"]) == 0


def test_debug_json_payload(workdir, capsys):
    Path("bell.qtasm").write_text(BELL)
    main(["debug", "bell.qtasm", "--json"])
    payload = json.loads(capsys.readouterr().out)
    jsonschema.validate(payload, load_schema("tree.schema.json"))
    leaves = payload["tree"]["children"]
    probs = sorted(child["probability"] for child in leaves)
    assert probs == pytest.approx([0.5, 0.5], abs=1e-12)


def test_debug_text_lists_branches(workdir, capsys):
    Path("bell.qtasm").write_text(BELL)
    main(["debug", "bell.qtasm"])
    out = capsys.readouterr().out
    assert "0.5" in out


# --------------------------------------------------------------------------
# asm


def test_asm_summary_counts_instructions(workdir, capsys):
    Path("fuse.qtasm").write_text("qubits 1\nrz(0, 0.1)\nrz(0, 0.2)\nrz(0, 0.3)\n")
    assert main(["asm", "fuse.qtasm"]) == 0
    assert "1 qubits, 3 instructions" in capsys.readouterr().out
    assert main(["asm", "fuse.qtasm", "-O1"]) == 0
    out = capsys.readouterr().out
    assert "1 instructions" in out
    assert "(optimized from 3)" in out


def test_asm_emit_round_trips(workdir):
    assert main(["gen", "teleport", "-o", "tp.qtasm"]) == 0
    assert main(["asm", "tp.qtasm", "--emit", "-o", "canon.qtasm"]) == 0
    original = compile_file("tp.qtasm")
    reparsed = compile_file("canon.qtasm")
    assert emit(reparsed) == emit(original)


# --------------------------------------------------------------------------
# bench


def test_bench_writes_a_csv_table(workdir, warm_engine):
    assert main([
        "bench", "--min-qubits", "3", "--max-qubits", "4",
        "--gates", "8", "--shots", "2", "--seed", "5", "-o", "bench.csv",
    ]) == 0
    lines = Path("bench.csv").read_text().splitlines()
    assert lines[0] == "L,gates,shots,seconds"
    assert [row.split(",")[0] for row in lines[1:]] == ["3", "4"]
    for row in lines[1:]:
        _, gates, shots, seconds = row.split(",")
        assert gates == "8" and shots == "2"
        assert float(seconds) >= 0.0


def test_bench_rejects_inverted_range(workdir, capsys):
    assert main(["bench", "--min-qubits", "6", "--max-qubits", "4"]) == 2
    assert "min-qubits" in capsys.readouterr().err


def test_benchmark_program_is_seed_stable():
    a = generate_benchmark_program(4, 10, 6, seed=7)
    b = generate_benchmark_program(4, 10, 6, seed=7)
    c = generate_benchmark_program(4, 10, 6, seed=8)
    assert emit(a) == emit(b)
    assert emit(a) != emit(c)
    kinds = [instr.op for instr in a.instructions]
    assert kinds.count("cnot") == 6
    assert kinds.count("meas") == 4
    assert len(kinds) == 10 + 6 + 4
