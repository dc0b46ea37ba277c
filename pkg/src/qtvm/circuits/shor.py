"""Order finding for N = p*q with a single recycled phase qubit.

The unitary whose phase is estimated is U: |y> -> |2y mod N> acting on the
work register; its eigenphases are s/r for the multiplicative order r of 2
mod N.  Instead of a t-qubit phase register, qubit 0 is measured and reset t
times (measurement feed-forward through cif), producing the phase bits least
significant first:

  step i = 1..t:
      h(0)
      2^(t-i) controlled doubler fragments          # C-U^(2^(t-i))
      for j < i with bit a_j set:  rz(0, -pi/2^(i-j))  via cif
      h(0); meas(0, i-1); cif(i-1, 'x(0)')          # record a_i, reset

The classical registers 0..t-1 then hold a_1..a_t and the histogram key
(descending register order) reads as the integer a = a_t...a_1 whose binary
fraction a/2^t approximates s/r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..isa import Instruction, Program
from .arithmetic import doubler_layout, times2_mod_n_instructions


@dataclass(frozen=True)
class ShorSpec:
    modulus_n: int
    phase_bits: int
    base_x: int = 2

    def __post_init__(self) -> None:
        if self.modulus_n < 3 or self.modulus_n % 2 == 0:
            raise ValueError(f"modulus must be odd and >= 3, got {self.modulus_n}")
        if self.base_x != 2:
            raise ValueError(
                f"only base-2 modular multiplication is implemented, got base {self.base_x}"
            )
        if math.gcd(self.base_x, self.modulus_n) != 1:
            raise ValueError(
                f"base {self.base_x} shares a factor with modulus {self.modulus_n}"
            )
        if self.phase_bits < 1:
            raise ValueError(f"need at least one phase bit, got {self.phase_bits}")


def build_shor_order_finding(spec: ShorSpec) -> Program:
    lay = doubler_layout(spec.modulus_n, control=0)
    doubler = times2_mod_n_instructions(
        spec.modulus_n, lay["control"], lay["y"], lay["scratch"], lay["carries"], lay["overflow"]
    )
    t = spec.phase_bits
    instructions: list[Instruction] = [Instruction("x", qubits=(lay["y"][0],))]
    for i in range(1, t + 1):
        instructions.append(Instruction("h", qubits=(0,)))
        instructions.extend(doubler * (1 << (t - i)))
        for j in range(1, i):
            instructions.append(
                Instruction(
                    "cif",
                    regs=(j - 1,),
                    inner=Instruction("rz", qubits=(0,), params=(-math.pi / 2 ** (i - j),)),
                )
            )
        instructions.append(Instruction("h", qubits=(0,)))
        instructions.append(Instruction("meas", qubits=(0,), regs=(i - 1,)))
        instructions.append(Instruction("cif", regs=(i - 1,), inner=Instruction("x", qubits=(0,))))
    return Program(num_qubits=lay["num_qubits"], instructions=tuple(instructions), labels={})


def convergent_denominators(numerator: int, denominator: int) -> list[int]:
    """Denominators of every continued-fraction convergent of the ratio."""
    out: list[int] = []
    num, den = numerator, denominator
    k_prev, k = 1, 0  # q_{-2} = 1, q_{-1} = 0
    while den:
        quotient, remainder = divmod(num, den)
        k_prev, k = k, quotient * k + k_prev
        out.append(k)
        num, den = den, remainder
    return out


def extract_order(histogram, phase_bits: int, modulus_n: int, base_x: int = 2) -> int | None:
    """Recover the order r from measured phase estimates, or None.

    Every outcome a contributes the denominators of the convergents of
    a/2^t as candidates; the smallest candidate with base_x^r = 1 (mod N)
    wins.  Any candidate that verifies is automatically a multiple of the
    true order, so pooling outcomes can never return something smaller.
    """
    counts = histogram.counts if hasattr(histogram, "counts") else dict(histogram)
    scale = 1 << phase_bits
    candidates: set[int] = set()
    for key in sorted(counts, key=lambda k: (-counts[k], k)):
        a = int(key, 2)
        if a == 0:
            continue
        for q in convergent_denominators(a, scale):
            if 1 <= q <= modulus_n:
                candidates.add(q)
    for r in sorted(candidates):
        if pow(base_x, r, modulus_n) == 1:
            return r
    return None


def factors_from_order(modulus_n: int, base_x: int, r: int) -> tuple[int, int] | None:
    """Split N via gcd(x^(r/2) -+ 1, N); None when the order is unusable."""
    if r <= 0 or r % 2 != 0:
        return None
    half = pow(base_x, r // 2, modulus_n)
    if half == modulus_n - 1:
        return None
    p = math.gcd(half - 1, modulus_n)
    q = math.gcd(half + 1, modulus_n)
    if p in (1, modulus_n) or q in (1, modulus_n):
        return None
    return (p, q)
