"""Command-line front end tying together compiler, machine, circuits, and debugger.

Subcommands
-----------
run    compile and execute a program, writing histogram JSON/CSV artifacts
state  execute once and dump the final statevector in the binary format
bench  time random gate workloads over a range of machine sizes
gen    write a generated circuit (tfim | shor | teleport) as assembly text
debug  enumerate the program's measurement-branch tree
asm    compile (optionally optimize) and emit canonical assembly text

Exit codes: 0 success, 1 runtime fault, 2 usage or compile error,
3 capacity refusal (state would exceed the memory budget).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .compiler import compile_file, emit
from .errors import CapacityError, CompileError, QtvmError
from .isa import Instruction, Program
from .statevector import dump_state
from .vm import Machine, run_shot, run_shots

DEFAULT_SEED = 7  # fixed so documented runs reproduce exactly; --seed random opts out
DEFAULT_MEMORY_BUDGET = 8 << 30  # 8 GiB, enough for a dense 28-qubit state

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CAPACITY = 3

_SIZE_SUFFIXES = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}


def parse_size(text: str) -> int:
    """Byte count from '268435456', '256M', '8G', ... (binary suffixes)."""
    raw = text.strip().lower().removesuffix("b")
    if raw and raw[-1] in _SIZE_SUFFIXES:
        scale = _SIZE_SUFFIXES[raw[-1]]
        raw = raw[:-1]
    else:
        scale = 1
    try:
        value = int(float(raw) * scale)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unreadable size '{text}'") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return value


def parse_seed(text: str) -> int:
    if text == "random":
        return int(np.random.SeedSequence().entropy) & ((1 << 63) - 1)
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'random', got '{text}'") from None


def _thread_count(args: argparse.Namespace) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("QTVM_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            print(f"qtvm: ignoring unreadable QTVM_THREADS='{env}'", file=sys.stderr)
    return 1


def _add_engine_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--engine", choices=("single", "paged"), default="single",
                        help="statevector backend (default: single)")
    parser.add_argument("--sector-bits", type=int, default=None, metavar="S",
                        help="amplitudes per sector = 2^S (paged engine only)")
    parser.add_argument("--mem", type=parse_size, default=DEFAULT_MEMORY_BUDGET, metavar="BYTES",
                        help="memory budget, e.g. 8G (default); exceeding it exits 3")
    parser.add_argument("--seed", type=parse_seed, default=DEFAULT_SEED,
                        help=f"RNG seed, or 'random' (default: {DEFAULT_SEED})")


def _add_opt_option(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-O", dest="level", type=int, choices=(0, 1), default=0,
                        help="optimization level (-O1 enables the peephole pass)")


def _engine_kwargs(args: argparse.Namespace) -> dict:
    return dict(engine=args.engine, sector_bits=args.sector_bits, memory_budget=args.mem)


def _probe_qubit(num_qubits: int) -> int:
    # Snapshot series track one bulk qubit; index 1 unless the machine is tiny.
    return 1 if num_qubits >= 2 else 0


# --------------------------------------------------------------------------
# run


def _write_histogram(hist, args, program: Program, stem: Path) -> list[Path]:
    paths = []
    payload = {
        "source": str(args.source),
        "num_qubits": program.num_qubits,
        "shots": hist.shots,
        "seed": args.seed,
        "engine": args.engine,
        "sector_bits": args.sector_bits,
        "registers": list(hist.registers),
        "counts": hist.counts,
        "snapshot_count": len(hist.snapshots),
    }
    json_path = Path(str(stem) + ".hist.json")
    json_path.write_text(json.dumps(payload, indent=2) + "\n")
    paths.append(json_path)

    csv_path = Path(str(stem) + ".hist.csv")
    rows = ["outcome,count"]
    rows += [f"{key},{count}" for key, count in hist.counts.items()]
    csv_path.write_text("\n".join(rows) + "\n")
    paths.append(csv_path)
    return paths


def _write_snapshot_series(hist, program: Program, stem: Path) -> Path:
    q = _probe_qubit(program.num_qubits)
    lines = ["tag,mz,mx,rate"]
    for snap in hist.snapshots:
        overlap = abs(snap.amplitude0)
        rate = math.inf if overlap == 0.0 else -2.0 * math.log(overlap) / program.num_qubits + 0.0
        lines.append(
            f"{snap.tag},{snap.expectation_z[q]:.17g},{snap.expectation_x[q]:.17g},{rate:.17g}"
        )
    path = Path(str(stem) + ".snapshots.csv")
    path.write_text("\n".join(lines) + "\n")
    return path


def _dump_snapshot_states(program: Program, args, out_dir: Path) -> list[Path]:
    # Re-run shot 0 keeping state copies; artifacts use the binary dump format.
    result = run_shot(program, args.seed, 0, record_states=True, **_engine_kwargs(args))
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in result.snapshots:
        path = out_dir / f"snap{snap.tag:06d}.state"
        with open(path, "wb") as fh:
            dump_state(snap.state, fh)
        paths.append(path)
    return paths


def cmd_run(args: argparse.Namespace) -> int:
    program = compile_file(args.source, level=args.level)
    hist = run_shots(
        program, args.shots, args.seed, workers=_thread_count(args), **_engine_kwargs(args)
    )
    stem = Path(args.out) if args.out else Path(Path(args.source).stem)
    artifacts = _write_histogram(hist, args, program, stem)
    if hist.snapshots:
        artifacts.append(_write_snapshot_series(hist, program, stem))
    if args.dump_states is not None:
        artifacts += _dump_snapshot_states(program, args, Path(args.dump_states))

    print(f"{args.source}: {program.num_qubits} qubits, {len(program.instructions)} instructions")
    print(f"shots: {hist.shots}   seed: {args.seed}   engine: {args.engine}")
    top = sorted(hist.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    for key, count in top[:8]:
        print(f"  {key or '(none)'}  {count:6d}  ({count / hist.shots:.3f})")
    if len(top) > 8:
        print(f"  ... {len(top) - 8} more outcomes")
    for path in artifacts:
        print(f"wrote {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# state


def cmd_state(args: argparse.Namespace) -> int:
    program = compile_file(args.source, level=args.level)
    machine = Machine(program, seed=args.seed, **_engine_kwargs(args))
    machine.run()
    final = machine.state.dense_copy()
    out = Path(args.out) if args.out else Path(Path(args.source).stem + ".state")
    with open(out, "wb") as fh:
        written = dump_state(final, fh)
    print(f"wrote {out} ({written} bytes, {final.num_qubits} qubits)")
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


_BENCH_SINGLE_GATES = ("x", "y", "z", "h", "s", "sdg", "rx", "ry", "rz", "u")


def generate_benchmark_program(num_qubits: int, single_gates: int, cnot_gates: int, seed: int) -> Program:
    """Random workload: a shuffled mix of single-qubit gates and CNOTs, then
    one measurement per qubit.  Pure function of its arguments."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(num_qubits,)))
    kinds = ["1q"] * single_gates + ["2q"] * cnot_gates
    rng.shuffle(kinds)
    instructions = []
    for kind in kinds:
        if kind == "1q":
            op = _BENCH_SINGLE_GATES[rng.integers(len(_BENCH_SINGLE_GATES))]
            q = int(rng.integers(num_qubits))
            if op in ("rx", "ry", "rz"):
                params = (float(rng.uniform(0.0, 2.0 * math.pi)),)
            elif op == "u":
                params = tuple(float(a) for a in rng.uniform(0.0, 2.0 * math.pi, size=3))
            else:
                params = ()
            instructions.append(Instruction(op, qubits=(q,), params=params))
        else:
            control, target = rng.choice(num_qubits, size=2, replace=False)
            instructions.append(Instruction("cnot", qubits=(int(control), int(target))))
    for q in range(num_qubits):
        instructions.append(Instruction("meas", qubits=(q,), regs=(q,)))
    return Program(num_qubits=num_qubits, instructions=tuple(instructions), labels={})


def benchmark_table(
    min_qubits: int,
    max_qubits: int,
    *,
    single_gates: int = 100,
    cnot_gates: int = 100,
    shots: int = 100,
    seed: int = DEFAULT_SEED,
    engine: str = "single",
    sector_bits: int | None = None,
    memory_budget: int | None = DEFAULT_MEMORY_BUDGET,
) -> list[tuple[int, float]]:
    """(num_qubits, wall_seconds) rows for the random workload at each size."""
    rows = []
    for num_qubits in range(min_qubits, max_qubits + 1):
        program = generate_benchmark_program(num_qubits, single_gates, cnot_gates, seed)
        start = time.perf_counter()
        run_shots(program, shots, seed, engine=engine, sector_bits=sector_bits,
                  memory_budget=memory_budget)
        rows.append((num_qubits, time.perf_counter() - start))
    return rows


def cmd_bench(args: argparse.Namespace) -> int:
    if args.min_qubits < 1 or args.max_qubits < args.min_qubits:
        print("qtvm: bench needs 1 <= --min-qubits <= --max-qubits", file=sys.stderr)
        return EXIT_USAGE
    single = args.gates // 2
    rows = benchmark_table(
        args.min_qubits,
        args.max_qubits,
        single_gates=single,
        cnot_gates=args.gates - single,
        shots=args.shots,
        seed=args.seed,
        engine=args.engine,
        sector_bits=args.sector_bits,
        memory_budget=args.mem,
    )
    lines = ["L,gates,shots,seconds"]
    lines += [f"{L},{args.gates},{args.shots},{seconds:.6f}" for L, seconds in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# gen


def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "tfim":
        from .circuits.tfim import TfimQuenchSpec, tfim_quench_source

        spec = TfimQuenchSpec(
            num_qubits=args.l, g0=args.g0, g1=args.g1, dt=args.dt,
            steps=args.steps, snapshot_every=args.snapshot_every,
        )
        text = tfim_quench_source(spec)
        default_name = f"tfim_l{args.l}.qtasm"
    elif args.kind == "shor":
        from .circuits.shor import ShorSpec, build_shor_order_finding

        spec = ShorSpec(modulus_n=args.n, phase_bits=args.phase_bits)
        text = emit(build_shor_order_finding(spec))
        default_name = f"shor{args.n}.qtasm"
    else:  # teleport
        from .circuits.teleport import build_teleportation

        prep_flags = (args.theta, args.phi, args.lam)
        if any(v is not None for v in prep_flags) and None in prep_flags:
            print("qtvm: gen teleport needs all of --theta/--phi/--lam or none", file=sys.stderr)
            return EXIT_USAGE
        prep = prep_flags if args.theta is not None else None
        text = emit(build_teleportation(prep))
        default_name = "teleport.qtasm"

    out = Path(args.out) if args.out else Path(default_name)
    out.write_text(text)
    print(f"wrote {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# debug


def cmd_debug(args: argparse.Namespace) -> int:
    from .debugger import enumerate_branches, tree_as_json, tree_as_text

    program = compile_file(args.source, level=args.level)
    root = enumerate_branches(
        program, max_measurements=args.max_meas, **_engine_kwargs(args)
    )
    sys.stdout.write(tree_as_json(root) if args.json else tree_as_text(root))
    return EXIT_OK


# --------------------------------------------------------------------------
# asm


def cmd_asm(args: argparse.Namespace) -> int:
    unoptimized = compile_file(args.source, level=0)
    program = compile_file(args.source, level=args.level) if args.level else unoptimized
    if args.emit:
        text = emit(program)
        if args.out:
            Path(args.out).write_text(text)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
    else:
        before = len(unoptimized.instructions)
        after = len(program.instructions)
        note = f" (optimized from {before})" if args.level and after != before else ""
        print(f"{args.source}: {program.num_qubits} qubits, {after} instructions{note}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtvm", description="Quantum virtual machine with an assembly front end."
    )
    parser.add_argument("--version", action="version", version=f"qtvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a program and write histogram artifacts")
    run.add_argument("source", help="assembly source file")
    run.add_argument("--shots", type=int, default=1)
    run.add_argument("--threads", type=int, default=None,
                     help="parallel shot workers (QTVM_THREADS as fallback)")
    run.add_argument("-o", "--out", default=None, metavar="STEM",
                     help="artifact name stem (default: source stem)")
    run.add_argument("--dump-states", default=None, metavar="DIR",
                     help="also write each snapshot's statevector (shot 0) into DIR")
    _add_engine_options(run)
    _add_opt_option(run)
    run.set_defaults(handler=cmd_run)

    state = sub.add_parser("state", help="execute once and dump the final statevector")
    state.add_argument("source")
    state.add_argument("-o", "--out", default=None, metavar="FILE")
    _add_engine_options(state)
    _add_opt_option(state)
    state.set_defaults(handler=cmd_state)

    bench = sub.add_parser("bench", help="time random workloads across machine sizes")
    bench.add_argument("--min-qubits", type=int, default=4)
    bench.add_argument("--max-qubits", type=int, default=16)
    bench.add_argument("--gates", type=int, default=200,
                       help="total gate count, half single-qubit and half CNOT (default 200)")
    bench.add_argument("--shots", type=int, default=100)
    bench.add_argument("-o", "--out", default=None, metavar="FILE")
    _add_engine_options(bench)
    bench.set_defaults(handler=cmd_bench)

    gen = sub.add_parser("gen", help="write a generated circuit as assembly text")
    gen_sub = gen.add_subparsers(dest="kind", required=True)

    gen_tfim = gen_sub.add_parser("tfim", help="transverse-field Ising quench")
    gen_tfim.add_argument("--l", type=int, required=True, help="number of sites")
    gen_tfim.add_argument("--g0", type=float, default=0.0, help="initial field (must be 0)")
    gen_tfim.add_argument("--g1", type=float, required=True, help="post-quench field")
    gen_tfim.add_argument("--dt", type=float, required=True, help="step size")
    gen_tfim.add_argument("--steps", type=int, required=True)
    gen_tfim.add_argument("--snapshot-every", type=int, default=1)
    gen_tfim.add_argument("-o", "--out", default=None)
    gen_tfim.set_defaults(handler=cmd_gen)

    gen_shor = gen_sub.add_parser("shor", help="iterative order finding for base 2")
    gen_shor.add_argument("--n", type=int, required=True, help="odd modulus, e.g. 15 or 35")
    gen_shor.add_argument("--phase-bits", type=int, required=True,
                          help="phase-estimate resolution (measurement rounds)")
    gen_shor.add_argument("-o", "--out", default=None)
    gen_shor.set_defaults(handler=cmd_gen)

    gen_tp = gen_sub.add_parser("teleport", help="single-qubit teleportation protocol")
    gen_tp.add_argument("--theta", type=float, default=None)
    gen_tp.add_argument("--phi", type=float, default=None)
    gen_tp.add_argument("--lam", type=float, default=None)
    gen_tp.add_argument("-o", "--out", default=None)
    gen_tp.set_defaults(handler=cmd_gen)

    debug = sub.add_parser("debug", help="enumerate the measurement branch tree")
    debug.add_argument("source")
    debug.add_argument("--tree", action="store_true",
                       help="print the branch tree (the default and only mode)")
    debug.add_argument("--json", action="store_true", help="emit the tree as JSON")
    debug.add_argument("--max-meas", type=int, default=24, metavar="M",
                       help="refuse programs with more than M measurements per path")
    _add_engine_options(debug)
    _add_opt_option(debug)
    debug.set_defaults(handler=cmd_debug)

    asm = sub.add_parser("asm", help="compile and emit canonical assembly text")
    asm.add_argument("source")
    asm.add_argument("--emit", action="store_true", help="print the compiled program")
    asm.add_argument("-o", "--out", default=None, metavar="FILE")
    _add_opt_option(asm)
    asm.set_defaults(handler=cmd_asm)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CompileError as exc:
        print(f"qtvm: compile error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"qtvm: no such file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except IsADirectoryError as exc:
        print(f"qtvm: not a file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"qtvm: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except QtvmError as exc:
        print(f"qtvm: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"qtvm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qtvm: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
