"""Shared test fixtures: dense linear-algebra oracles and program generators.

The oracles here expand every instruction into an explicit 2^L x 2^L matrix
with plain index arithmetic (no engine code beyond the 2x2 gate tables), so
engine results can be checked against naive dense products.
"""

from __future__ import annotations

import numpy as np
import pytest

from qtvm.isa import Instruction, Program, gate_controls_target, instruction_matrix


def dense_instruction(instr: Instruction, num_qubits: int) -> np.ndarray:
    """Full-register matrix of one gate instruction (little-endian bit k = qubit k)."""
    dim = 1 << num_qubits
    if instr.op == "swap":
        q1, q2 = instr.qubits
        m = np.zeros((dim, dim), dtype=complex)
        for j in range(dim):
            b1 = (j >> q1) & 1
            b2 = (j >> q2) & 1
            i = j & ~(1 << q1) & ~(1 << q2) | (b2 << q1) | (b1 << q2)
            m[i, j] = 1.0
        return m

    controls, target = gate_controls_target(instr)
    gate = instruction_matrix(instr)
    cmask = 0
    for c in controls:
        cmask |= 1 << c
    tbit = 1 << target
    m = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        if (j & cmask) == cmask:
            b = (j >> target) & 1
            m[j & ~tbit, j] += gate[0, b]
            m[j | tbit, j] += gate[1, b]
        else:
            m[j, j] = 1.0
    return m


def dense_unitary(program: Program) -> np.ndarray:
    """Product of all instruction matrices (gate-only straight-line programs)."""
    dim = 1 << program.num_qubits
    u = np.eye(dim, dtype=complex)
    for instr in program.instructions:
        u = dense_instruction(instr, program.num_qubits) @ u
    return u


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """True when a = e^{i phi} b elementwise within tol."""
    a = np.asarray(a)
    b = np.asarray(b)
    idx = int(np.argmax(np.abs(b)))
    ref = b.flat[idx]
    if abs(ref) < 1e-14:
        return bool(np.allclose(a, b, atol=tol))
    phase = a.flat[idx] / ref
    if abs(abs(phase) - 1.0) > 1e-9:
        return False
    return bool(np.allclose(a, phase * b, atol=tol))


_SINGLE_OPS = ("x", "y", "z", "s", "sdg", "h", "rx", "ry", "rz", "u")


def random_gate_program(
    num_qubits: int,
    count: int,
    rng: np.random.Generator,
    *,
    two_qubit_fraction: float = 0.3,
) -> Program:
    """Random straight-line gate program (no measurement or control flow)."""
    instructions = []
    for _ in range(count):
        roll = rng.random()
        if roll < two_qubit_fraction and num_qubits >= 2:
            pick = rng.integers(3 if num_qubits >= 3 else 2)
            if pick == 0:
                c, t = rng.choice(num_qubits, size=2, replace=False)
                instructions.append(Instruction("cnot", qubits=(int(c), int(t))))
            elif pick == 1:
                a, b = rng.choice(num_qubits, size=2, replace=False)
                instructions.append(Instruction("swap", qubits=(int(a), int(b))))
            else:
                c1, c2, t = rng.choice(num_qubits, size=3, replace=False)
                params = tuple(float(x) for x in rng.uniform(0, 2 * np.pi, size=3))
                instructions.append(
                    Instruction("cu", qubits=(int(c1), int(c2), int(t)), params=params)
                )
        else:
            op = _SINGLE_OPS[rng.integers(len(_SINGLE_OPS))]
            q = int(rng.integers(num_qubits))
            if op in ("rx", "ry", "rz"):
                params = (float(rng.uniform(0, 2 * np.pi)),)
            elif op == "u":
                params = tuple(float(x) for x in rng.uniform(0, 2 * np.pi, size=3))
            else:
                params = ()
            instructions.append(Instruction(op, qubits=(q,), params=params))
    return Program(num_qubits=num_qubits, instructions=tuple(instructions), labels={})


def ising_ring_hamiltonian(L: int, g: float) -> np.ndarray:
    """-sum_j Z_j Z_{j+1} + g sum_j X_j on the periodic ring, by Kronecker products.

    Independent of the package's own Hamiltonian builder so the two can be
    checked against each other.
    """
    Z = np.diag([1.0, -1.0]).astype(complex)
    X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    I = np.eye(2, dtype=complex)

    def op_at(op: np.ndarray, j: int) -> np.ndarray:
        mats = [I] * L
        mats[j] = op
        out = mats[L - 1]  # qubit 0 is the fastest index, so it goes last
        for k in range(L - 2, -1, -1):
            out = np.kron(out, mats[k])
        return out

    H = np.zeros((1 << L, 1 << L), dtype=complex)
    for j in range(L):
        H -= op_at(Z, j) @ op_at(Z, (j + 1) % L)
        H += g * op_at(X, j)
    return H


@pytest.fixture(scope="session")
def warm_engine():
    """Touch every compiled kernel once so timed tests never pay JIT latency."""
    from qtvm.compiler import compile_source
    from qtvm.vm import run_shot

    source = """qubits 3
h(0)
rx(1, 0.3)
cnot(0, 1)
swap(1, 2)
cu(0, 1, 2, 0.5, 0.2, 0.1)
snap(0)
meas(0, 0)
cif(0, 'x(1)')
meas(1, 1)
meas(2, 2)
"""
    run_shot(compile_source(source), seed=1)
    run_shot(compile_source(source), seed=1, engine="paged", sector_bits=2)
    return True


_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def report_line():
    """Collector for the one-line verdicts of the end-to-end checks.

    Lines are echoed immediately (visible in captured output on failure) and
    replayed as a terminal section after the run, so every verdict is visible
    even when the test passes.
    """

    def _report(text: str) -> None:
        _acceptance_lines.append(text)
        print(text)

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance checks")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
