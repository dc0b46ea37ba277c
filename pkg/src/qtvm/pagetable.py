"""Sector-paged state: a full address space split into fixed-size regions.

The 2^L amplitude space is partitioned into 2^(L-s) sectors of 2^s amplitudes.
A physical bit below s addresses *within* a sector ("local"); a physical bit
at or above s selects the sector ("global").  A permutation maps logical
qubits onto physical bits, so a logical qubit can be moved between the two
roles without touching most of the data.

Gates are not applied eagerly.  Each sector keeps a queue of pending
instructions written in local physical coordinates; a gate whose global
controls are decided by a sector's fixed address bits is *specialized* for
that sector (control dropped when the bit is 1, instruction skipped when it
is 0).  Any global reduction - measurement, expectation values, gathering -
is a synchronizing event: queues are optimized with the compiler's peephole
passes and drained.

Logical swap gates never move amplitudes at all: they only swap two entries
of the permutation.  ``relabel`` is the opposite trade - it preserves the
logical state while physically rehoming two qubits, moving amplitude blocks
only when a local position is involved.

Between synchronization events the sectors are fully independent; everything
here is single-threaded but the structure is picklable and may be handed to a
worker pool at shot granularity.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import CapacityError, MeasurementError
from .compiler import optimize_gate_run, residual_phase
from .gates import X as _X_MATRIX
from .gates import u_params_from_matrix
from .isa import GATE_OPS, Instruction, apply_gate
from .statevector import (
    DEFAULT_MEMORY_BUDGET,
    MIN_BRANCH_PROBABILITY,
    StateVector,
    init_state,
    state_size_bytes,
)

DEFAULT_SECTOR_BITS = 20
_QUEUE_LIMIT = 8192  # auto-synchronize before any queue outgrows this
_PHASE_TOL = 1e-12


class Sector:
    """One region of the address space: an s-qubit fragment plus pending work."""

    __slots__ = ("state", "queue")

    def __init__(self, state: StateVector, queue: list[Instruction] | None = None):
        self.state = state
        self.queue: list[Instruction] = queue if queue is not None else []

    def copy(self) -> "Sector":
        return Sector(self.state.copy(), list(self.queue))


class PagedState:
    def __init__(self, num_qubits: int, sector_bits: int, sectors: list[Sector]):
        self.num_qubits = num_qubits
        self.sector_bits = sector_bits
        self.sectors = sectors
        self.perm = list(range(num_qubits))  # logical qubit -> physical bit
        self._victim = 0  # round-robin pointer for relabel targets

    # -- layout helpers --------------------------------------------------

    def _physical(self, logical: int) -> int:
        return self.perm[logical]

    def _logical_at(self, physical: int) -> int:
        return self.perm.index(physical)

    def _is_local(self, physical: int) -> bool:
        return physical < self.sector_bits

    def copy(self) -> "PagedState":
        twin = PagedState.__new__(PagedState)
        twin.num_qubits = self.num_qubits
        twin.sector_bits = self.sector_bits
        twin.sectors = [sector.copy() for sector in self.sectors]
        twin.perm = list(self.perm)
        twin._victim = self._victim
        return twin

    # -- relabeling -------------------------------------------------------

    def relabel(self, a: int, b: int) -> None:
        """Exchange the physical homes of logical qubits a and b (logical no-op)."""
        pa, pb = self.perm[a], self.perm[b]
        if pa == pb:
            return
        s = self.sector_bits
        if pa >= s and pb >= s:
            # both global: permuting two sector-address bits just reorders the
            # sector list; queues and their specializations travel with the data
            ga, gb = pa - s, pb - s
            for idx in range(len(self.sectors)):
                if (idx >> ga) & 1 == 1 and (idx >> gb) & 1 == 0:
                    other = idx ^ (1 << ga) ^ (1 << gb)
                    self.sectors[idx], self.sectors[other] = self.sectors[other], self.sectors[idx]
        elif pa < s and pb < s:
            self.synchronize()
            for sector in self.sectors:
                sector.state.apply_swap(pa, pb)
        else:
            self.synchronize()
            local, global_ = (pa, pb) if pa < s else (pb, pa)
            self._exchange_blocks(local, global_ - s)
        self.perm[a], self.perm[b] = pb, pa

    def _exchange_blocks(self, local_bit: int, sector_bit: int) -> None:
        """Physically swap a local address bit with a sector-address bit."""
        half = 1 << local_bit
        mask = 1 << sector_bit
        for idx in range(len(self.sectors)):
            if idx & mask:
                continue
            lo, hi = self.sectors[idx].state, self.sectors[idx | mask].state
            for pick in (lambda sv: sv.reals, lambda sv: sv.imags):
                a = pick(lo).reshape(-1, 2, half)
                b = pick(hi).reshape(-1, 2, half)
                tmp = a[:, 1, :].copy()
                a[:, 1, :] = b[:, 0, :]
                b[:, 0, :] = tmp
            lo._rebuild_occupancy()
            hi._rebuild_occupancy()

    def _pick_victim(self, avoid: set[int]) -> int:
        candidates = [v for v in range(self.sector_bits) if v not in avoid]
        if not candidates:
            candidates = list(range(self.sector_bits))
        choice = candidates[self._victim % len(candidates)]
        self._victim += 1
        return choice

    def _ensure_local_target(self, target: int, other_physical: set[int]) -> int:
        """Relabel so logical `target` sits on a local physical bit; return it."""
        pt = self.perm[target]
        if self._is_local(pt):
            return pt
        victim_slot = self._pick_victim(other_physical)
        self.relabel(target, self._logical_at(victim_slot))
        return self.perm[target]

    # -- lazy gate path -----------------------------------------------------

    def enqueue(self, instr: Instruction) -> None:
        """Queue one gate instruction (logical coordinates) onto every sector."""
        op = instr.op
        if op not in GATE_OPS:
            raise ValueError(f"only gate instructions can be queued, not '{op}'")
        if op == "swap":
            self.apply_swap(instr.qubits[0], instr.qubits[1])
            return
        if op in ("cnot", "cu"):
            controls, target = instr.qubits[:-1], instr.qubits[-1]
        else:
            controls, target = (), instr.qubits[0]

        control_physical = {self.perm[c] for c in controls}
        pt = self._ensure_local_target(target, control_physical)
        control_physical = sorted(self.perm[c] for c in controls)  # may have moved

        s = self.sector_bits
        local_controls = tuple(p for p in control_physical if p < s)
        global_controls = [p - s for p in control_physical if p >= s]
        matrix_params = instr.params if op != "cnot" else None

        for idx, sector in enumerate(self.sectors):
            if any((idx >> g) & 1 == 0 for g in global_controls):
                continue  # this sector's fixed control bit is 0: no-op here
            sector.queue.append(_specialize(op, local_controls, pt, matrix_params))
            if len(sector.queue) >= _QUEUE_LIMIT:
                self.synchronize()

    def synchronize(self) -> None:
        """Optimize and drain every sector queue (the synchronizing event)."""
        for sector in self.sectors:
            if not sector.queue:
                continue
            pending, sector.queue = sector.queue, []
            # exact_phase: sectors optimize differently specialized queues, so
            # a dropped global phase here would become a relative phase there
            for instr in optimize_gate_run(pending, exact_phase=True):
                apply_gate(sector.state, instr)

    # -- engine protocol ------------------------------------------------

    def apply_controlled(self, controls, target: int, matrix: np.ndarray) -> None:
        main, phase_fixup = _instruction_from_matrix(tuple(controls), target, matrix)
        self.enqueue(main)
        if phase_fixup is not None:
            self.enqueue(phase_fixup)

    def apply_swap(self, a: int, b: int) -> None:
        if a == b:
            raise ValueError("swap needs two distinct qubits")
        self.perm[a], self.perm[b] = self.perm[b], self.perm[a]

    def mass_one(self, q: int) -> float:
        self.synchronize()
        p = self.perm[q]
        s = self.sector_bits
        if p < s:
            return float(sum(sector.state.mass_one(p) for sector in self.sectors))
        mask = 1 << (p - s)
        return float(
            sum(sector.state.norm_sq() for idx, sector in enumerate(self.sectors) if idx & mask)
        )

    def prob_one(self, q: int) -> float:
        return min(1.0, max(0.0, self.mass_one(q)))

    def collapse(self, q: int, bit: int) -> float:
        p1 = self.prob_one(q)
        p = p1 if bit else 1.0 - p1
        if p < MIN_BRANCH_PROBABILITY:
            raise MeasurementError(f"collapse of qubit {q} onto {bit} has probability {p:.3e}")
        inv = 1.0 / np.sqrt(p)
        phys = self.perm[q]
        s = self.sector_bits
        if phys < s:
            for sector in self.sectors:
                sv = sector.state
                blocks = sv._occupied(0)
                if blocks.size:
                    kernels.collapse_local(sv.reals, sv.imags, blocks, sv.block_bits, phys, bit, inv)
                    sv._bump()
        else:
            mask = 1 << (phys - s)
            for idx, sector in enumerate(self.sectors):
                sv = sector.state
                blocks = sv._occupied(0)
                if not blocks.size:
                    continue
                if bool(idx & mask) != bool(bit):
                    kernels.zero_blocks(sv.reals, sv.imags, blocks, sv.block_bits)
                    sv._occ[:] = 0
                elif inv != 1.0:
                    kernels.scale_blocks(sv.reals, sv.imags, blocks, sv.block_bits, inv)
                sv._bump()
        return p

    def measure(self, q: int, rng: np.random.Generator) -> int:
        p1 = self.prob_one(q)
        bit = 1 if rng.random() < p1 else 0
        self.collapse(q, bit)
        return bit

    def expectation_z(self, q: int) -> float:
        return 1.0 - 2.0 * self.prob_one(q)

    def expectation_x(self, q: int) -> float:
        self.synchronize()
        p = self.perm[q]
        s = self.sector_bits
        if p < s:
            return float(sum(sector.state.expectation_x(p) for sector in self.sectors))
        mask = 1 << (p - s)
        total = 0.0
        for idx in range(len(self.sectors)):
            if idx & mask:
                continue
            lo = self.sectors[idx].state
            hi = self.sectors[idx | mask].state
            total += kernels.cross_dot(lo.reals, lo.imags, hi.reals, hi.imags)
        return 2.0 * total

    def norm_sq(self) -> float:
        self.synchronize()
        return float(sum(sector.state.norm_sq() for sector in self.sectors))

    def amplitude(self, index: int) -> complex:
        self.synchronize()
        physical = 0
        for q in range(self.num_qubits):
            if (index >> q) & 1:
                physical |= 1 << self.perm[q]
        sector = physical >> self.sector_bits
        return self.sectors[sector].state.amplitude(physical & ((1 << self.sector_bits) - 1))

    def gather(self) -> StateVector:
        """Dense canonical-order state with the permutation undone."""
        self.synchronize()
        reals = np.concatenate([sector.state.reals for sector in self.sectors])
        imags = np.concatenate([sector.state.imags for sector in self.sectors])
        if self.perm != list(range(self.num_qubits)):
            logical = np.arange(1 << self.num_qubits, dtype=np.int64)
            physical = np.zeros_like(logical)
            for q, p in enumerate(self.perm):
                physical |= ((logical >> q) & 1) << p
            reals = reals[physical]
            imags = imags[physical]
        out = StateVector(self.num_qubits, reals, imags)
        out._rebuild_occupancy()
        return out

    def dense_copy(self) -> StateVector:
        return self.gather()

    def to_complex(self) -> np.ndarray:
        return self.gather().to_complex()


def _specialize(op: str, local_controls: tuple[int, ...], target: int, params) -> Instruction:
    """Sector-local instruction after global controls were resolved to 1."""
    if op == "cnot":
        if local_controls:
            return Instruction("cnot", qubits=(local_controls[0], target))
        return Instruction("x", qubits=(target,))
    if op == "cu":
        if local_controls:
            return Instruction("cu", qubits=local_controls + (target,), params=params)
        return Instruction("u", qubits=(target,), params=params)
    return Instruction(op, qubits=(target,), params=params or ())


def _instruction_from_matrix(
    controls: tuple[int, ...], target: int, matrix: np.ndarray
) -> tuple[Instruction, Instruction | None]:
    """Named instruction(s) reproducing `matrix` exactly, phase included.

    The u parameterization is phase-normalized, so a matrix with a residual
    global phase e^{i a} needs a second instruction.  Uncontrolled gates use
    u . rz via e^{i a}u(t,p,l) = rz(-2a) . u(t, p+2a, l); controlled gates push
    the phase onto a control qubit, where a diagonal gate conditioned on the
    remaining controls lands it on exactly the branches the original matrix
    would have touched.
    """
    if controls and np.array_equal(matrix, _X_MATRIX):
        if len(controls) == 1:
            return Instruction("cnot", qubits=(controls[0], target)), None
        return Instruction("cu", qubits=controls + (target,), params=(np.pi, 0.0, np.pi)), None

    if (
        not controls
        and matrix[0, 1] == 0
        and matrix[1, 0] == 0
        and matrix[0, 0] == matrix[1, 1].conjugate()
    ):
        return Instruction("rz", qubits=(target,), params=(2.0 * float(np.angle(matrix[1, 1])),)), None

    theta, phi, lam = u_params_from_matrix(matrix)
    alpha = residual_phase(matrix, theta, phi, lam)

    if not controls:
        if abs(alpha) <= _PHASE_TOL:
            return Instruction("u", qubits=(target,), params=(theta, phi, lam)), None
        return (
            Instruction("u", qubits=(target,), params=(theta, phi + 2.0 * alpha, lam)),
            Instruction("rz", qubits=(target,), params=(-2.0 * alpha,)),
        )

    main = Instruction("cu", qubits=controls + (target,), params=(theta, phi, lam))
    if abs(alpha) <= _PHASE_TOL:
        return main, None
    head, rest = controls[0], controls[1:]
    fixup = (
        Instruction("cu", qubits=rest + (head,), params=(0.0, 0.0, alpha))
        if rest
        else Instruction("u", qubits=(head,), params=(0.0, 0.0, alpha))
    )
    return main, fixup


def create_paged(
    num_qubits: int,
    sector_bits: int | None = None,
    memory_budget: int | None = None,
) -> PagedState:
    """|0...0> split across 2^(L-s) sectors of 2^s amplitudes each."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be at least 1")
    if sector_bits is None:
        sector_bits = min(num_qubits, DEFAULT_SECTOR_BITS)
    if not 1 <= sector_bits <= num_qubits:
        raise ValueError(f"sector_bits must be in [1, {num_qubits}], got {sector_bits}")
    budget = DEFAULT_MEMORY_BUDGET if memory_budget is None else memory_budget
    need = state_size_bytes(num_qubits)
    if need > budget:
        raise CapacityError(
            f"{num_qubits}-qubit paged state needs {need} bytes of amplitude storage; "
            f"budget is {budget} (raise it explicitly for runs this large)"
        )
    sectors = [Sector(init_state(sector_bits)) for _ in range(1 << (num_qubits - sector_bits))]
    for sector in sectors[1:]:
        # only sector 0 holds the |0...0> amplitude
        sector.state.reals[0] = 0.0
        sector.state._rebuild_occupancy()
    return PagedState(num_qubits, sector_bits, sectors)


def enqueue(paged: PagedState, instr: Instruction) -> None:
    paged.enqueue(instr)


def relabel(paged: PagedState, a: int, b: int) -> None:
    paged.relabel(a, b)


def synchronize(paged: PagedState) -> None:
    paged.synchronize()


def gather(paged: PagedState) -> StateVector:
    return paged.gather()
