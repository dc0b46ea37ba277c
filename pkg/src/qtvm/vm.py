"""Program execution: machine state, stepping, shot orchestration, histograms.

A :class:`Machine` owns one quantum engine plus the classical side (register
file, program counter, snapshot log).  Programs are precompiled into a flat
dispatch plan once, then reused across shots; per-shot randomness comes from a
counter-style derivation so any shot can be reproduced in isolation:

    rng(seed, shot_index) = Generator(SeedSequence(entropy=seed,
                                                   spawn_key=(shot_index,)))

Classical registers are unsigned 64-bit and wrap; reading a never-written
register yields 0.  ``cif`` and ``cjmp`` take the branch iff the register is
nonzero.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ExecutionError
from .isa import (
    GATE_OPS,
    MASK64,
    Instruction,
    Program,
    gate_controls_target,
    instruction_matrix,
    validate_program,
)
from .statevector import StateVector, init_state

# dispatch-plan entry kinds, roughly ordered by execution frequency
_K_GATE = 0
_K_SWAP = 1
_K_MEAS = 2
_K_CIF = 3
_K_CSET = 4
_K_CBIN = 5
_K_JMP = 6
_K_CJMP = 7
_K_SNAP = 8
_K_HALT = 9

_CBIN_FUNCS = {
    "cadd": lambda a, b: (a + b) & MASK64,
    "csub": lambda a, b: (a - b) & MASK64,
    "cmul": lambda a, b: (a * b) & MASK64,
    "cxor": lambda a, b: a ^ b,
}


def _plan_entry(instr: Instruction, labels: dict[str, int]) -> tuple:
    op = instr.op
    if op == "swap":
        return (_K_SWAP, instr.qubits[0], instr.qubits[1], None)
    if op in GATE_OPS:
        controls, target = gate_controls_target(instr)
        return (_K_GATE, controls, target, instruction_matrix(instr))
    if op == "meas":
        return (_K_MEAS, instr.qubits[0], instr.regs[0], None)
    if op == "cif":
        return (_K_CIF, instr.regs[0], _plan_entry(instr.inner, labels), None)
    if op == "cset":
        return (_K_CSET, instr.regs[0], instr.imm, None)
    if op in _CBIN_FUNCS:
        return (_K_CBIN, instr.regs[0], instr.regs[1:], _CBIN_FUNCS[op])
    if op == "jmp":
        return (_K_JMP, labels[instr.label], None, None)
    if op == "cjmp":
        return (_K_CJMP, instr.regs[0], labels[instr.label], None)
    if op == "snap":
        return (_K_SNAP, instr.tag, None, None)
    if op == "halt":
        return (_K_HALT, None, None, None)
    raise ExecutionError(f"no execution rule for opcode '{op}'")


def _compile_plan(program: Program) -> list[tuple]:
    return [_plan_entry(instr, program.labels) for instr in program.instructions]


def _max_register(program: Program) -> int:
    top = -1
    for instr in program.instructions:
        for target in (instr, instr.inner) if instr.inner else (instr,):
            if target.regs:
                top = max(top, max(target.regs))
    return top


def derive_rng(seed: int, shot_index: int) -> np.random.Generator:
    """The documented per-shot stream: independent for every (seed, shot) pair."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(shot_index,)))


@dataclass(frozen=True)
class Snapshot:
    """State probe recorded by ``snap`` without disturbing the machine."""

    tag: int
    expectation_z: np.ndarray  # per-qubit <sigma_z>
    expectation_x: np.ndarray  # per-qubit <sigma_x>
    amplitude0: complex
    norm: float
    state: StateVector | None = None


@dataclass(frozen=True)
class ShotResult:
    creg_values: tuple[int, ...]
    snapshots: tuple[Snapshot, ...]


@dataclass(frozen=True)
class Histogram:
    shots: int
    registers: tuple[int, ...]  # written registers, most significant first
    counts: dict[str, int]
    snapshots: tuple[Snapshot, ...] = ()  # from shot 0, when the program snaps


def make_engine(
    num_qubits: int,
    engine: str = "single",
    sector_bits: int | None = None,
    memory_budget: int | None = None,
):
    if engine == "single":
        return init_state(num_qubits, memory_budget)
    if engine == "paged":
        from .pagetable import create_paged

        return create_paged(num_qubits, sector_bits=sector_bits, memory_budget=memory_budget)
    raise ValueError(f"unknown engine '{engine}' (expected 'single' or 'paged')")


class Machine:
    """One program execution in progress: quantum engine + classical machine state."""

    def __init__(
        self,
        program: Program,
        *,
        rng: np.random.Generator | None = None,
        seed: int | None = None,
        shot_index: int = 0,
        engine: str = "single",
        sector_bits: int | None = None,
        memory_budget: int | None = None,
        record_states: bool = False,
        plan: list[tuple] | None = None,
    ):
        # A caller handing over a prebuilt plan has already validated the
        # program (the plan is derived from it); skip the re-walk per shot.
        if plan is None:
            validate_program(program)
            plan = _compile_plan(program)
        self.program = program
        self.plan = plan
        self.state = make_engine(program.num_qubits, engine, sector_bits, memory_budget)
        if rng is None and seed is not None:
            rng = derive_rng(seed, shot_index)
        self.rng = rng
        self.cregs: list[int] = [0] * max(64, _max_register(program) + 1)
        self.pc = 0
        self.executed = 0
        self.halted = False
        self.record_states = record_states
        self.snapshots: list[Snapshot] = []

    # -- lifecycle -----------------------------------------------------

    @property
    def terminated(self) -> bool:
        return self.halted or self.pc >= len(self.plan)

    def fork(self) -> "Machine":
        """Independent copy sharing only the immutable program/plan."""
        twin = object.__new__(Machine)
        twin.program = self.program
        twin.plan = self.plan
        twin.state = self.state.copy()
        twin.rng = None  # forks are for deterministic exploration
        twin.cregs = list(self.cregs)
        twin.pc = self.pc
        twin.executed = self.executed
        twin.halted = self.halted
        twin.record_states = self.record_states
        twin.snapshots = list(self.snapshots)
        return twin

    # -- execution -----------------------------------------------------

    def run(self, max_instructions: int | None = None) -> None:
        self._run(max_instructions=max_instructions)

    def step(self) -> None:
        if self.terminated:
            raise ExecutionError("machine already terminated")
        self._run(max_steps=1)

    def run_to_measurement(self, max_instructions: int | None = None):
        """Advance until the next measurement WOULD execute; return (qubit, reg) or None.

        The measurement itself is left unexecuted so a caller can fork the
        machine and force each outcome via :meth:`force_measurement`.
        """
        return self._run(max_instructions=max_instructions, stop_at_measurement=True)

    def force_measurement(self, bit: int) -> float:
        """Collapse the pending measurement onto ``bit``; returns its probability."""
        pending = self._pending_measurement()
        if pending is None:
            raise ExecutionError("no measurement pending at the current pc")
        qubit, reg = pending
        probability = self.state.prob_one(qubit)
        if bit == 0:
            probability = 1.0 - probability
        self.state.collapse(qubit, bit)
        self.cregs[reg] = bit
        self.pc += 1
        self.executed += 1
        return probability

    def _pending_measurement(self):
        if self.terminated:
            return None
        entry = self.plan[self.pc]
        if entry[0] == _K_MEAS:
            return entry[1], entry[2]
        if entry[0] == _K_CIF and self.cregs[entry[1]] != 0 and entry[2][0] == _K_MEAS:
            return entry[2][1], entry[2][2]
        return None

    def _run(self, max_instructions=None, max_steps=None, stop_at_measurement=False):
        plan = self.plan
        state = self.state
        cregs = self.cregs
        n = len(plan)
        pc = self.pc
        steps = 0
        try:
            while not self.halted and pc < n:
                entry = plan[pc]
                kind = entry[0]
                if stop_at_measurement:
                    self.pc = pc
                    pending = self._pending_measurement()
                    if pending is not None:
                        return pending
                if kind == _K_GATE:
                    state.apply_controlled(entry[1], entry[2], entry[3])
                elif kind == _K_MEAS:
                    if self.rng is None:
                        raise ExecutionError("measurement requires a seeded machine")
                    cregs[entry[2]] = state.measure(entry[1], self.rng)
                elif kind == _K_CIF:
                    if cregs[entry[1]] != 0:
                        self._apply_sub_entry(entry[2])
                elif kind == _K_CSET:
                    cregs[entry[1]] = entry[2]
                elif kind == _K_CBIN:
                    a, b = entry[2]
                    cregs[entry[1]] = entry[3](cregs[a], cregs[b])
                elif kind == _K_JMP:
                    pc = entry[1] - 1
                elif kind == _K_CJMP:
                    if cregs[entry[1]] != 0:
                        pc = entry[2] - 1
                elif kind == _K_SWAP:
                    state.apply_swap(entry[1], entry[2])
                elif kind == _K_SNAP:
                    self._take_snapshot(entry[1])
                else:  # _K_HALT
                    self.halted = True
                pc += 1
                steps += 1
                self.executed += 1
                if max_instructions is not None and self.executed > max_instructions:
                    raise ExecutionError(f"instruction budget of {max_instructions} exceeded")
                if max_steps is not None and steps >= max_steps:
                    break
        finally:
            self.pc = pc
        return None

    def _apply_sub_entry(self, entry: tuple) -> None:
        kind = entry[0]
        if kind == _K_GATE:
            self.state.apply_controlled(entry[1], entry[2], entry[3])
        elif kind == _K_SWAP:
            self.state.apply_swap(entry[1], entry[2])
        elif kind == _K_MEAS:
            if self.rng is None:
                raise ExecutionError("measurement requires a seeded machine")
            self.cregs[entry[2]] = self.state.measure(entry[1], self.rng)
        elif kind == _K_CSET:
            self.cregs[entry[1]] = entry[2]
        elif kind == _K_CBIN:
            a, b = entry[2]
            self.cregs[entry[1]] = entry[3](self.cregs[a], self.cregs[b])
        elif kind == _K_SNAP:
            self._take_snapshot(entry[1])
        else:  # _K_HALT
            self.halted = True

    def _take_snapshot(self, tag: int) -> None:
        state = self.state
        num_qubits = self.program.num_qubits
        mz = np.array([state.expectation_z(q) for q in range(num_qubits)])
        mx = np.array([state.expectation_x(q) for q in range(num_qubits)])
        self.snapshots.append(
            Snapshot(
                tag=tag,
                expectation_z=mz,
                expectation_x=mx,
                amplitude0=state.amplitude(0),
                norm=state.norm_sq(),
                state=state.dense_copy() if self.record_states else None,
            )
        )

    def result(self) -> ShotResult:
        return ShotResult(tuple(self.cregs), tuple(self.snapshots))


# --------------------------------------------------------------------------
# shot orchestration


def run_shot(
    program: Program,
    seed: int = 0,
    shot_index: int = 0,
    *,
    engine: str = "single",
    sector_bits: int | None = None,
    memory_budget: int | None = None,
    record_states: bool = False,
    max_instructions: int | None = None,
    plan: list[tuple] | None = None,
) -> ShotResult:
    machine = Machine(
        program,
        seed=seed,
        shot_index=shot_index,
        engine=engine,
        sector_bits=sector_bits,
        memory_budget=memory_budget,
        record_states=record_states,
        plan=plan,
    )
    machine.run(max_instructions=max_instructions)
    return machine.result()


def histogram_key(creg_values, registers) -> str:
    """Bitstring over the written registers, '1' where the register is nonzero."""
    return "".join("1" if creg_values[r] else "0" for r in registers)


def _run_range(program, seed, start, count, options) -> tuple[dict[str, int], tuple]:
    registers = tuple(sorted(program.written_registers, reverse=True))
    validate_program(program)
    plan = _compile_plan(program)
    counts: dict[str, int] = {}
    first_snapshots: tuple = ()
    for shot_index in range(start, start + count):
        result = run_shot(program, seed, shot_index, plan=plan, **options)
        key = histogram_key(result.creg_values, registers)
        counts[key] = counts.get(key, 0) + 1
        if shot_index == 0:
            first_snapshots = result.snapshots
    return counts, first_snapshots


def run_shots(
    program: Program,
    shots: int,
    seed: int = 0,
    *,
    engine: str = "single",
    sector_bits: int | None = None,
    memory_budget: int | None = None,
    max_instructions: int | None = None,
    workers: int = 1,
) -> Histogram:
    """Aggregate independent shots into a Histogram (deterministic given seed)."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    options = dict(
        engine=engine,
        sector_bits=sector_bits,
        memory_budget=memory_budget,
        max_instructions=max_instructions,
    )
    registers = tuple(sorted(program.written_registers, reverse=True))

    if workers <= 1 or shots == 1:
        counts, snapshots = _run_range(program, seed, 0, shots, options)
    else:
        workers = min(workers, shots)
        base, extra = divmod(shots, workers)
        spans = []
        start = 0
        for w in range(workers):
            count = base + (1 if w < extra else 0)
            spans.append((start, count))
            start += count
        counts = {}
        snapshots = ()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, program, seed, s, c, options) for s, c in spans if c
            ]
            for future in futures:
                part, snaps = future.result()
                for key, n in part.items():
                    counts[key] = counts.get(key, 0) + n
                if snaps:
                    snapshots = snaps

    return Histogram(
        shots=shots,
        registers=registers,
        counts=dict(sorted(counts.items())),
        snapshots=snapshots,
    )


def histogram_to_json(hist: Histogram) -> str:
    payload = {
        "shots": hist.shots,
        "registers": list(hist.registers),
        "counts": dict(sorted(hist.counts.items())),
    }
    return json.dumps(payload, indent=2) + "\n"


def histogram_to_csv(hist: Histogram) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bitstring", "count"])
    for key in sorted(hist.counts):
        writer.writerow([key, hist.counts[key]])
    return buffer.getvalue()
