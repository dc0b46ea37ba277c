"""Instruction set: opcode table, operand validation, canonical text, gate dispatch.

An assembled program is a flat tuple of :class:`Instruction` records plus a
label table.  Gate opcodes all reduce to the two statevector primitives
(controlled single-qubit unitary, qubit swap); measurement, classical
registers, control flow, and snapshots are interpreted by the machine loop.

Classical registers hold unsigned 64-bit values and wrap on overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CompileError
from .gates import fixed_gate, rotation_x, rotation_y, rotation_z, u_matrix

FIXED_GATES = ("x", "y", "z", "s", "sdg", "h")
ROTATION_GATES = ("rx", "ry", "rz")
GATE_OPS = frozenset(FIXED_GATES) | frozenset(ROTATION_GATES) | {"u", "cnot", "swap", "cu"}
CLASSICAL_BINARY_OPS = ("cadd", "csub", "cmul", "cxor")
CLASSICAL_OPS = frozenset(CLASSICAL_BINARY_OPS) | {"cset"}
# Anything that is not a plain gate ends an optimizable gate run.
BARRIER_OPS = frozenset({"meas", "cif", "jmp", "cjmp", "snap", "halt"})
ALL_OPS = GATE_OPS | CLASSICAL_OPS | BARRIER_OPS

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Instruction:
    """One machine instruction.

    Only the fields relevant to ``op`` are populated; the rest keep their
    defaults.  ``line`` is the 1-based source line for diagnostics and is
    excluded from equality so that round-tripped programs compare equal.
    """

    op: str
    qubits: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    regs: tuple[int, ...] = ()
    label: str | None = None
    inner: "Instruction | None" = None
    imm: int | None = None
    tag: int | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    num_qubits: int
    instructions: tuple[Instruction, ...]
    labels: dict[str, int]  # label name -> index of the instruction it precedes

    @property
    def written_registers(self) -> tuple[int, ...]:
        """Registers assigned anywhere in the program, ascending."""
        regs: set[int] = set()
        for instr in self.instructions:
            target = instr
            if instr.op == "cif" and instr.inner is not None:
                target = instr.inner
            if target.op == "meas" or target.op in CLASSICAL_OPS:
                regs.add(target.regs[0])
        return tuple(sorted(regs))


def _err(message: str, instr: Instruction) -> CompileError:
    return CompileError(message, line=instr.line or None)


def _check_qubits(instr: Instruction, count: int, num_qubits: int) -> None:
    if len(instr.qubits) != count:
        raise _err(f"{instr.op} expects {count} qubit operand(s), got {len(instr.qubits)}", instr)
    _check_qubit_values(instr, num_qubits)


def _check_qubit_values(instr: Instruction, num_qubits: int) -> None:
    for q in instr.qubits:
        if not 0 <= q < num_qubits:
            raise _err(f"{instr.op}: qubit {q} out of range for {num_qubits}-qubit machine", instr)
    if len(set(instr.qubits)) != len(instr.qubits):
        raise _err(f"{instr.op}: duplicate qubit operands {instr.qubits}", instr)


def _check_params(instr: Instruction, count: int) -> None:
    if len(instr.params) != count:
        raise _err(f"{instr.op} expects {count} angle parameter(s), got {len(instr.params)}", instr)


def _check_regs(instr: Instruction, count: int) -> None:
    if len(instr.regs) != count:
        raise _err(f"{instr.op} expects {count} register operand(s), got {len(instr.regs)}", instr)
    for r in instr.regs:
        if r < 0:
            raise _err(f"{instr.op}: negative register index {r}", instr)


def validate_instruction(instr: Instruction, num_qubits: int) -> None:
    """Check operand shapes and ranges; raise CompileError on any mismatch."""
    op = instr.op
    if op in FIXED_GATES:
        _check_qubits(instr, 1, num_qubits)
        _check_params(instr, 0)
    elif op in ROTATION_GATES:
        _check_qubits(instr, 1, num_qubits)
        _check_params(instr, 1)
    elif op == "u":
        _check_qubits(instr, 1, num_qubits)
        _check_params(instr, 3)
    elif op in ("cnot", "swap"):
        _check_qubits(instr, 2, num_qubits)
        _check_params(instr, 0)
    elif op == "cu":
        if len(instr.qubits) < 2:
            raise _err("cu expects at least one control and a target", instr)
        _check_qubit_values(instr, num_qubits)
        _check_params(instr, 3)
    elif op == "meas":
        _check_qubits(instr, 1, num_qubits)
        _check_regs(instr, 1)
    elif op == "cif":
        _check_regs(instr, 1)
        if instr.inner is None:
            raise _err("cif is missing its inner instruction", instr)
        if instr.inner.op in ("cif", "jmp", "cjmp"):
            raise _err(f"cif cannot wrap control flow ({instr.inner.op})", instr)
        validate_instruction(instr.inner, num_qubits)
    elif op in ("jmp", "cjmp"):
        if not instr.label:
            raise _err(f"{op} needs a label operand", instr)
        if op == "cjmp":
            _check_regs(instr, 1)
    elif op == "cset":
        _check_regs(instr, 1)
        if instr.imm is None:
            raise _err("cset needs an immediate value", instr)
        if not 0 <= instr.imm <= MASK64:
            raise _err(f"cset immediate {instr.imm} outside the unsigned 64-bit range", instr)
    elif op in CLASSICAL_BINARY_OPS:
        _check_regs(instr, 3)
    elif op == "snap":
        if instr.tag is None or instr.tag < 0:
            raise _err("snap needs a nonnegative integer tag", instr)
    elif op == "halt":
        pass
    else:
        raise _err(f"unknown opcode '{op}'", instr)


def validate_program(program: Program) -> None:
    for instr in program.instructions:
        validate_instruction(instr, program.num_qubits)
        if instr.op in ("jmp", "cjmp") and instr.label not in program.labels:
            raise _err(f"jump to undefined label '{instr.label}'", instr)


@lru_cache(maxsize=4096)
def _cached_matrix(op: str, params: tuple[float, ...]) -> np.ndarray:
    if op in FIXED_GATES:
        return fixed_gate(op)
    if op == "rx":
        return rotation_x(params[0])
    if op == "ry":
        return rotation_y(params[0])
    if op == "rz":
        return rotation_z(params[0])
    return u_matrix(*params)  # u and cu share the parameterization


def instruction_matrix(instr: Instruction) -> np.ndarray:
    """2x2 unitary applied by a gate instruction (the target-qubit matrix for cu/cnot)."""
    if instr.op == "cnot":
        return fixed_gate("x")
    if instr.op == "swap":
        raise ValueError("swap has no single-qubit matrix")
    return _cached_matrix(instr.op, instr.params)


def gate_controls_target(instr: Instruction) -> tuple[tuple[int, ...], int]:
    """(controls, target) for any gate instruction except swap."""
    if instr.op in ("cnot", "cu"):
        return instr.qubits[:-1], instr.qubits[-1]
    return (), instr.qubits[0]


def apply_gate(state, instr: Instruction) -> None:
    """Apply a gate instruction to any engine exposing apply_controlled/apply_swap."""
    if instr.op == "swap":
        state.apply_swap(instr.qubits[0], instr.qubits[1])
        return
    controls, target = gate_controls_target(instr)
    state.apply_controlled(controls, target, instruction_matrix(instr))


def _format_number(value: float) -> str:
    if isinstance(value, int):
        return str(value)
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return "%.17g" % value


def format_instruction(instr: Instruction) -> str:
    """Canonical assembly text for one instruction (no trailing newline)."""
    op = instr.op
    if op in GATE_OPS:
        args = [str(q) for q in instr.qubits] + [_format_number(p) for p in instr.params]
        return f"{op}({', '.join(args)})"
    if op == "meas":
        return f"meas({instr.qubits[0]}, {instr.regs[0]})"
    if op == "cif":
        return f"cif({instr.regs[0]}, '{format_instruction(instr.inner)}')"
    if op == "jmp":
        return f"jmp({instr.label})"
    if op == "cjmp":
        return f"cjmp({instr.regs[0]}, {instr.label})"
    if op == "cset":
        return f"cset({instr.regs[0]}, {instr.imm})"
    if op in CLASSICAL_BINARY_OPS:
        return f"{op}({instr.regs[0]}, {instr.regs[1]}, {instr.regs[2]})"
    if op == "snap":
        return f"snap({instr.tag})"
    if op == "halt":
        return "halt()"
    raise ValueError(f"unknown opcode '{op}'")


def touched_qubits(instr: Instruction) -> tuple[int, ...]:
    """Qubits an instruction can read or write (including through cif)."""
    if instr.op == "cif" and instr.inner is not None:
        return instr.inner.qubits
    return instr.qubits
