"""Reversible ripple-carry arithmetic and the controlled doubler mod N.

Everything here is built from cnot and Toffoli (cu with two controls), so
each fragment is a permutation of the computational basis: run forward it
adds, run backwards (same gates, reversed order — both gates are their own
inverses) it subtracts.

Register conventions, all little-endian (index 0 = least significant):

  adder        |a, b> -> |a, a+b>, where the sum register is the b qubits
               plus one `overflow` qubit holding the top bit.  The n carry
               ancillas must enter 0 and leave 0.
  doubler      |y> -> |2y mod N> on a y register of n+1 qubits, controlled
               by one extra qubit; uses an n-bit scratch register (loaded
               with N only while needed), n+1 carries, and the overflow
               qubit of the inner adder as the borrow sign.

The carry chain is the textbook three-gate block:

  CARRY(c_in, a, b, c_out):  ccx(a, b, c_out); cnot(a, b); ccx(c_in, b, c_out)

which XORs the majority of (c_in, a, b) onto c_out and leaves b = a xor b.
`None` in an a-register slot means "this operand bit is the constant 0";
the gates controlled by it are simply omitted.
"""

from __future__ import annotations

import math

from ..isa import Instruction, Program


def _cnot(control: int, target: int) -> Instruction:
    return Instruction("cnot", qubits=(control, target))


def _ccx(c1: int, c2: int, target: int) -> Instruction:
    # Toffoli spelled as a doubly-controlled u(pi, 0, pi) = X.
    return Instruction("cu", qubits=(c1, c2, target), params=(math.pi, 0.0, math.pi))


def _carry(c_in: int, a: int | None, b: int, c_out: int) -> list[Instruction]:
    if a is None:
        return [_ccx(c_in, b, c_out)]
    return [_ccx(a, b, c_out), _cnot(a, b), _ccx(c_in, b, c_out)]


def _sum(c_in: int, a: int | None, b: int) -> list[Instruction]:
    if a is None:
        return [_cnot(c_in, b)]
    return [_cnot(a, b), _cnot(c_in, b)]


def adder_instructions(
    a_bits: "tuple[int | None, ...]",
    b_bits: tuple[int, ...],
    carry_bits: tuple[int, ...],
    overflow: int,
) -> list[Instruction]:
    """Ripple-carry network: (overflow, b) <- a + b as an (n+1)-bit value.

    Acting on the full (n+1)-bit register B = overflow*2^n + b it computes
    B <- (B + a) mod 2^(n+1), so the reversed network subtracts with the
    overflow bit doubling as the borrow sign.  Carries restore to 0.
    """
    n = len(b_bits)
    if len(a_bits) != n or len(carry_bits) != n:
        raise ValueError(
            f"operand registers must share one width, got |a|={len(a_bits)} "
            f"|b|={len(b_bits)} |carries|={len(carry_bits)}"
        )
    seen: set[int] = set()
    for q in (*a_bits, *b_bits, *carry_bits, overflow):
        if q is None:
            continue
        if q in seen:
            raise ValueError(f"registers overlap at qubit {q}")
        seen.add(q)

    out: list[Instruction] = []
    for i in range(n):
        c_out = overflow if i == n - 1 else carry_bits[i + 1]
        out += _carry(carry_bits[i], a_bits[i], b_bits[i], c_out)
    if a_bits[n - 1] is not None:
        out.append(_cnot(a_bits[n - 1], b_bits[n - 1]))
    out += _sum(carry_bits[n - 1], a_bits[n - 1], b_bits[n - 1])
    for i in range(n - 2, -1, -1):
        out += list(reversed(_carry(carry_bits[i], a_bits[i], b_bits[i], carry_bits[i + 1])))
        out += _sum(carry_bits[i], a_bits[i], b_bits[i])
    return out


def subtractor_instructions(
    a_bits: "tuple[int | None, ...]",
    b_bits: tuple[int, ...],
    carry_bits: tuple[int, ...],
    overflow: int,
) -> list[Instruction]:
    """Reversed adder: B <- (B - a) mod 2^(n+1); overflow set exactly when
    the subtraction borrowed (for a < 2^n and starting overflow 0)."""
    return list(reversed(adder_instructions(a_bits, b_bits, carry_bits, overflow)))


def _standalone_layout(num_bits: int) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...], int]:
    a = tuple(range(num_bits))
    b = tuple(range(num_bits, 2 * num_bits))
    overflow = 2 * num_bits
    carries = tuple(range(2 * num_bits + 1, 3 * num_bits + 1))
    return a, b, carries, overflow


def build_adder(num_bits: int) -> Program:
    """|a, b> -> |a, a+b> on two num_bits operands.

    Layout: a = qubits [0, n), b = [n, 2n), overflow = 2n (top bit of the
    sum), carries = [2n+1, 3n+1).
    """
    if num_bits < 1:
        raise ValueError(f"need at least 1 bit, got {num_bits}")
    a, b, carries, overflow = _standalone_layout(num_bits)
    instructions = adder_instructions(a, b, carries, overflow)
    return Program(num_qubits=3 * num_bits + 1, instructions=tuple(instructions), labels={})


def build_subtractor(num_bits: int) -> Program:
    """Exact inverse of :func:`build_adder` on the same layout."""
    if num_bits < 1:
        raise ValueError(f"need at least 1 bit, got {num_bits}")
    a, b, carries, overflow = _standalone_layout(num_bits)
    instructions = subtractor_instructions(a, b, carries, overflow)
    return Program(num_qubits=3 * num_bits + 1, instructions=tuple(instructions), labels={})


def _controlled_swap(control: int, a: int, b: int) -> list[Instruction]:
    # Fredkin from two cnots and one Toffoli.
    return [_cnot(b, a), _ccx(control, a, b), _cnot(b, a)]


def times2_mod_n_instructions(
    modulus_n: int,
    control: int,
    y_bits: tuple[int, ...],
    scratch_bits: tuple[int, ...],
    carry_bits: tuple[int, ...],
    overflow: int,
) -> list[Instruction]:
    """Controlled |y> -> |2y mod N> for 0 <= y < N, N odd.

    y spans n+1 qubits where n = N.bit_length(); scratch spans n, carries
    n+1.  Plan, with all of scratch/carries/overflow entering and leaving 0:

      1. rotate y left by one bit (control on): y -> 2y (< 2N fits n+1 bits)
      2. scratch <- control * N        (fan-out onto N's set bits)
      3. subtract scratch from (overflow, y): overflow = 1 iff 2y < N
      4. scratch <- overflow * N       (re-aim the operand at the borrow)
      5. add scratch back: borrow branch returns to 2y, clearing overflow
      6. uncompute scratch: the borrow happened iff the result is even
         (N is odd!), so scratch_i ^= control & ~y_0 via cnot + ccx

    With the control off, scratch stays 0 and steps 1-6 are all identity.
    """
    if modulus_n < 3 or modulus_n % 2 == 0:
        raise ValueError(f"modulus must be odd and >= 3, got {modulus_n}")
    n = modulus_n.bit_length()
    if len(y_bits) != n + 1 or len(scratch_bits) != n or len(carry_bits) != n + 1:
        raise ValueError(
            f"layout mismatch for {n}-bit modulus: need |y|={n + 1} "
            f"|scratch|={n} |carries|={n + 1}, got {len(y_bits)}/{len(scratch_bits)}/{len(carry_bits)}"
        )
    set_bits = [i for i in range(n) if (modulus_n >> i) & 1]
    # scratch zero-extended by one constant-0 bit to match the y width.
    operand: tuple[int | None, ...] = (*scratch_bits, None)

    out: list[Instruction] = []
    for i in range(n, 0, -1):
        out += _controlled_swap(control, y_bits[i], y_bits[i - 1])
    for i in set_bits:
        out.append(_cnot(control, scratch_bits[i]))
    out += subtractor_instructions(operand, y_bits, carry_bits, overflow)
    for i in set_bits:
        out.append(_cnot(control, scratch_bits[i]))
        out.append(_cnot(overflow, scratch_bits[i]))
    out += adder_instructions(operand, y_bits, carry_bits, overflow)
    for i in set_bits:
        out.append(_cnot(control, scratch_bits[i]))
        out.append(_ccx(control, y_bits[0], scratch_bits[i]))
    return out


def doubler_layout(modulus_n: int, control: int = 0) -> dict:
    """Qubit assignment shared by the doubler fragment and order finding.

    With control = 0: y at [1, n+2), scratch at [n+2, 2n+2), carries at
    [2n+2, 3n+3), overflow = 3n+3; total 3n+4 qubits.
    """
    n = modulus_n.bit_length()
    total = 3 * n + 4
    if not 0 <= control < total:
        raise ValueError(f"control qubit {control} outside the {total}-qubit layout")
    rest = [q for q in range(total) if q != control]
    return {
        "num_qubits": total,
        "control": control,
        "y": tuple(rest[: n + 1]),
        "scratch": tuple(rest[n + 1 : 2 * n + 1]),
        "carries": tuple(rest[2 * n + 1 : 3 * n + 2]),
        "overflow": rest[3 * n + 2],
    }


def build_times2_mod_n(modulus_n: int, controlled_by: int = 0) -> Program:
    """Standalone controlled-doubler program on the order-finding layout."""
    lay = doubler_layout(modulus_n, controlled_by)
    instructions = times2_mod_n_instructions(
        modulus_n, lay["control"], lay["y"], lay["scratch"], lay["carries"], lay["overflow"]
    )
    return Program(num_qubits=lay["num_qubits"], instructions=tuple(instructions), labels={})
