"""Three-qubit teleportation with classical feed-forward."""

from __future__ import annotations

from ..isa import Instruction, Program

_PROTOCOL = (
    Instruction("h", qubits=(1,)),
    Instruction("cnot", qubits=(1, 2)),
    Instruction("cnot", qubits=(0, 1)),
    Instruction("h", qubits=(0,)),
    Instruction("meas", qubits=(0,), regs=(1,)),
    Instruction("meas", qubits=(1,), regs=(2,)),
    Instruction("cif", regs=(2,), inner=Instruction("x", qubits=(2,))),
    Instruction("cif", regs=(1,), inner=Instruction("z", qubits=(2,))),
)


def build_teleportation(prep: tuple[float, float, float] | None = None) -> Program:
    """Teleport qubit 0 onto qubit 2 through a shared Bell pair on (1, 2).

    ``prep`` optionally gives (theta, phi, lambda) for a u gate that prepares
    the payload from |0>; omit it to teleport |0> itself.  Registers 1 and 2
    receive the two measurement outcomes and drive the x/z corrections.
    """
    instructions: list[Instruction] = []
    if prep is not None:
        theta, phi, lam = (float(v) for v in prep)
        instructions.append(Instruction("u", qubits=(0,), params=(theta, phi, lam)))
    instructions.extend(_PROTOCOL)
    return Program(num_qubits=3, instructions=tuple(instructions), labels={})
