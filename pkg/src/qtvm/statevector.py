"""Dense state-vector engine with split real/imaginary storage.

Amplitudes live in two contiguous float64 arrays (`reals`, `imags`) indexed
little-endian: basis index bit k is qubit k.  On top of the dense arrays the
engine keeps a coarse per-block occupancy bitmap — a block flagged empty is
guaranteed to hold exact zeros, and kernels skip it.  Circuits that fill the
whole register pay one boolean test per block; circuits whose support stays
narrow (modular arithmetic on basis states, for instance) run orders of
magnitude faster than a full sweep.  The bitmap is conservative and is
re-tightened periodically, so the dense arrays are always the truth.

Periodic compaction also releases blocks whose every amplitude sits at or
below COMPACTION_EPS, overwriting the residue with exact zeros.  Gate
sequences that cancel algebraically (Toffoli decompositions in reversible
arithmetic, most visibly) leave ~1e-16 roundoff on basis states they only
touched transiently; without a threshold those blocks would stay flagged
forever and drag every later kernel sweep.  The discarded mass per block is
bounded by 2 * 2^block_bits * COMPACTION_EPS^2 ~ 2e-25, far below the 1e-12
component-wise accuracy the engine is held to.  Rebuilds after direct
amplitude writes use a zero threshold, so states loaded from disk or edited
in place are never silently altered.
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable

import numpy as np

from . import kernels
from .errors import CapacityError, MeasurementError

BLOCK_BITS = 10
DEFAULT_MEMORY_BUDGET = 8 << 30  # bytes; 8 GiB covers 28 qubits
MIN_BRANCH_PROBABILITY = 1e-300
# Compaction cadence, in mutations.  Reversible-arithmetic circuits smear
# roundoff residue over fresh blocks within a few dozen gates, so a short
# cadence keeps the working set tight; on dense states the prune exits at
# the first live entry per block, so the overhead of frequent passes stays
# in the microseconds.
_COMPACT_EVERY = 16
# Amplitudes at or below this are roundoff residue as far as compaction is
# concerned; a block holding nothing larger is zeroed and unflagged.
COMPACTION_EPS = 1e-14

STATE_MAGIC = b"QTVM"
STATE_VERSION = 1


def state_size_bytes(num_qubits: int) -> int:
    """Bytes of amplitude storage for an L-qubit state (excluding metadata)."""
    return 2 * 8 * (1 << num_qubits)


class StateVector:
    """2^n amplitudes as split re/im arrays plus a block occupancy bitmap."""

    __slots__ = ("num_qubits", "reals", "imags", "block_bits", "_occ", "_ids", "_mutations")

    def __init__(self, num_qubits: int, reals: np.ndarray, imags: np.ndarray):
        self.num_qubits = num_qubits
        self.reals = reals
        self.imags = imags
        self.block_bits = min(num_qubits, BLOCK_BITS)
        nblocks = 1 << (num_qubits - self.block_bits)
        self._ids = np.arange(nblocks, dtype=np.int64)
        self._occ = np.zeros(nblocks, dtype=np.uint8)
        self._mutations = 0

    # -- construction ------------------------------------------------------

    @classmethod
    def zero_state(cls, num_qubits: int) -> "StateVector":
        n = 1 << num_qubits
        sv = cls(num_qubits, np.zeros(n, dtype=np.float64), np.zeros(n, dtype=np.float64))
        sv.reals[0] = 1.0
        sv._occ[0] = 1
        return sv

    def copy(self) -> "StateVector":
        dup = StateVector.__new__(StateVector)
        dup.num_qubits = self.num_qubits
        dup.reals = self.reals.copy()
        dup.imags = self.imags.copy()
        dup.block_bits = self.block_bits
        dup._ids = self._ids
        dup._occ = self._occ.copy()
        dup._mutations = self._mutations
        return dup

    def dense_copy(self) -> "StateVector":
        """A flat (unpaged) copy; the common protocol with the paged engine."""
        return self.copy()

    # -- occupancy plumbing ------------------------------------------------

    def _occupied(self, chi: int) -> np.ndarray:
        occ = self._occ.view(bool)
        if chi:
            occ = occ & ((self._ids & chi) == chi)
        return np.flatnonzero(occ).astype(np.int64, copy=False)

    def _prune_occupancy(self) -> None:
        """Drop stale flags and zero out numerically dead blocks.

        Sound only while flags over-approximate occupancy.  Blocks whose
        largest entry is at most COMPACTION_EPS are treated as roundoff
        residue: zeroed and released (see the module docstring).
        """
        kernels.prune_occupancy(
            self.reals, self.imags, self._occ, self.block_bits, COMPACTION_EPS)

    def _rebuild_occupancy(self) -> None:
        """Exact recompute, needed after amplitudes were written directly.

        Uses a zero threshold: deliberate tiny amplitudes survive a rebuild
        bitwise, so load / direct-write paths never truncate.
        """
        self._occ[:] = 1
        kernels.prune_occupancy(self.reals, self.imags, self._occ, self.block_bits, 0.0)

    def _bump(self) -> None:
        self._mutations += 1
        if self._mutations % _COMPACT_EVERY == 0:
            self._prune_occupancy()

    def occupied_fraction(self) -> float:
        """Diagnostic: fraction of blocks currently flagged occupied."""
        return float(self._occ.sum()) / self._occ.shape[0]

    # -- gate application --------------------------------------------------

    def apply_1q(self, target: int, u: np.ndarray) -> None:
        self.apply_controlled((), target, u)

    def apply_controlled(self, controls: Iterable[int], target: int, u: np.ndarray) -> None:
        n = self.num_qubits
        controls = tuple(controls)
        seen = set(controls)
        if target in seen or len(seen) != len(controls):
            raise ValueError("control and target qubits must be distinct")
        for q in controls + (target,):
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for {n}-qubit state")
        u00 = complex(u[0, 0]); u01 = complex(u[0, 1])
        u10 = complex(u[1, 0]); u11 = complex(u[1, 1])
        if u01 == 0 and u10 == 0 and u00 == 1 and u11 == 1:
            return  # exact identity: bitwise no-op
        bb = self.block_bits
        cm = 0
        for c in controls:
            cm |= 1 << c
        clo = cm & ((1 << bb) - 1)
        chi = cm >> bb
        diagonal = u01 == 0 and u10 == 0
        if target < bb:
            blocks = self._occupied(chi)
            if blocks.size:
                kernels.ctrl_u_local(
                    self.reals, self.imags, blocks, bb, target, clo,
                    u00.real, u00.imag, u01.real, u01.imag,
                    u10.real, u10.imag, u11.real, u11.imag)
        elif diagonal:
            pair = 1 << (target - bb)
            blocks = self._occupied(chi)
            for side, factor in ((0, u00), (pair, u11)):
                if factor == 1:
                    continue
                sel = blocks[(blocks & pair) == side]
                if sel.size:
                    kernels.scale_masked(self.reals, self.imags, sel, bb, clo,
                                         factor.real, factor.imag)
        else:
            pair = 1 << (target - bb)
            occ = self._occ.view(bool)
            low = (self._ids & pair) == 0
            if chi:
                low = low & ((self._ids & chi) == chi)
            work = low & (occ | occ[self._ids ^ pair])
            blocks0 = np.flatnonzero(work).astype(np.int64, copy=False)
            if blocks0.size:
                kernels.ctrl_u_global(
                    self.reals, self.imags, blocks0, bb, pair, clo,
                    u00.real, u00.imag, u01.real, u01.imag,
                    u10.real, u10.imag, u11.real, u11.imag)
                blocks1 = blocks0 | pair
                if u00 == 0 and u11 == 0 and clo == 0:
                    self._occ[blocks0], self._occ[blocks1] = (
                        self._occ[blocks1].copy(), self._occ[blocks0].copy())
                else:
                    merged = self._occ[blocks0] | self._occ[blocks1]
                    self._occ[blocks0] = merged
                    self._occ[blocks1] = merged
        self._bump()

    def apply_swap(self, a: int, b: int) -> None:
        n = self.num_qubits
        if a == b:
            raise ValueError("swap requires two distinct qubits")
        for q in (a, b):
            if not 0 <= q < n:
                raise ValueError(f"qubit {q} out of range for {n}-qubit state")
        if a > b:
            a, b = b, a
        bb = self.block_bits
        if b < bb:
            blocks = self._occupied(0)
            if blocks.size:
                kernels.swap_local(self.reals, self.imags, blocks, bb, a, b)
        elif a < bb:
            pair = 1 << (b - bb)
            occ = self._occ.view(bool)
            low = (self._ids & pair) == 0
            work = low & (occ | occ[self._ids ^ pair])
            blocks0 = np.flatnonzero(work).astype(np.int64, copy=False)
            if blocks0.size:
                kernels.swap_mixed(self.reals, self.imags, blocks0, bb, pair, a)
                blocks1 = blocks0 | pair
                merged = self._occ[blocks0] | self._occ[blocks1]
                self._occ[blocks0] = merged
                self._occ[blocks1] = merged
        else:
            xorbits = (1 << (a - bb)) | (1 << (b - bb))
            occ = self._occ.view(bool)
            side = ((self._ids >> (a - bb)) & 1) == 1
            side &= ((self._ids >> (b - bb)) & 1) == 0
            work = side & (occ | occ[self._ids ^ xorbits])
            blocks = np.flatnonzero(work).astype(np.int64, copy=False)
            if blocks.size:
                kernels.swap_blocks(self.reals, self.imags, blocks, bb, xorbits)
                partner = blocks ^ xorbits
                self._occ[blocks], self._occ[partner] = (
                    self._occ[partner].copy(), self._occ[blocks].copy())
        self._bump()

    # -- measurement and observables ----------------------------------------

    def mass_one(self, q: int) -> float:
        """Unnormalized squared-amplitude mass on bit q = 1."""
        if not 0 <= q < self.num_qubits:
            raise ValueError(f"qubit {q} out of range")
        bb = self.block_bits
        if q < bb:
            blocks = self._occupied(0)
            if not blocks.size:
                return 0.0
            return kernels.mass_one_local(self.reals, self.imags, blocks, bb, q)
        blocks = self._occupied(1 << (q - bb))
        if not blocks.size:
            return 0.0
        return kernels.norm_blocks(self.reals, self.imags, blocks, bb)

    def prob_one(self, q: int) -> float:
        """Probability of reading 1 on qubit q (state assumed normalized)."""
        return min(1.0, max(0.0, self.mass_one(q)))

    def collapse(self, q: int, bit: int) -> float:
        """Project qubit q onto `bit`, renormalize, return the branch probability."""
        p1 = self.prob_one(q)
        p = p1 if bit else 1.0 - p1
        if p < MIN_BRANCH_PROBABILITY:
            raise MeasurementError(
                f"collapse of qubit {q} onto {bit} has probability {p:.3e}")
        inv = 1.0 / np.sqrt(p)
        bb = self.block_bits
        if q < bb:
            blocks = self._occupied(0)
            if blocks.size:
                kernels.collapse_local(self.reals, self.imags, blocks, bb, q, bit, inv)
        else:
            pair = 1 << (q - bb)
            occ = self._occ.view(bool)
            keep_side = ((self._ids & pair) != 0) == bool(bit)
            losers = np.flatnonzero(occ & ~keep_side).astype(np.int64, copy=False)
            keepers = np.flatnonzero(occ & keep_side).astype(np.int64, copy=False)
            if losers.size:
                kernels.zero_blocks(self.reals, self.imags, losers, bb)
                self._occ[losers] = 0
            if keepers.size and inv != 1.0:
                kernels.scale_blocks(self.reals, self.imags, keepers, bb, inv)
        self._bump()
        return p

    def measure(self, q: int, rng: np.random.Generator) -> int:
        """Born-rule projective measurement: 1 iff a uniform draw < P(1)."""
        p1 = self.prob_one(q)
        bit = 1 if rng.random() < p1 else 0
        self.collapse(q, bit)
        return bit

    def expectation_z(self, q: int) -> float:
        return 1.0 - 2.0 * self.prob_one(q)

    def expectation_x(self, q: int) -> float:
        if not 0 <= q < self.num_qubits:
            raise ValueError(f"qubit {q} out of range")
        bb = self.block_bits
        if q < bb:
            blocks = self._occupied(0)
            if not blocks.size:
                return 0.0
            return kernels.expect_x_local(self.reals, self.imags, blocks, bb, q)
        pair = 1 << (q - bb)
        occ = self._occ.view(bool)
        both = occ & occ[self._ids ^ pair] & ((self._ids & pair) == 0)
        blocks0 = np.flatnonzero(both).astype(np.int64, copy=False)
        if not blocks0.size:
            return 0.0
        return kernels.expect_x_global(self.reals, self.imags, blocks0, bb, pair)

    def norm_sq(self) -> float:
        blocks = self._occupied(0)
        if not blocks.size:
            return 0.0
        return kernels.norm_blocks(self.reals, self.imags, blocks, self.block_bits)

    def amplitude(self, index: int) -> complex:
        return complex(self.reals[index], self.imags[index])

    def to_complex(self) -> np.ndarray:
        """Dense complex128 copy of the amplitudes."""
        return self.reals.astype(np.complex128) + 1j * self.imags


def init_state(num_qubits: int, memory_budget: int | None = None) -> StateVector:
    """|0...0> on `num_qubits` qubits, or CapacityError if it cannot fit."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be at least 1")
    budget = DEFAULT_MEMORY_BUDGET if memory_budget is None else memory_budget
    need = state_size_bytes(num_qubits)
    if need > budget:
        raise CapacityError(
            f"{num_qubits}-qubit state needs {need} bytes of amplitude storage; "
            f"budget is {budget} (raise it explicitly for runs this large)")
    return StateVector.zero_state(num_qubits)


def inner_product(bra: StateVector, ket: StateVector) -> complex:
    """<bra|ket> over two equal-size states."""
    if bra.num_qubits != ket.num_qubits:
        raise ValueError("inner product requires equal qubit counts")
    a = bra.to_complex()
    b = ket.to_complex()
    return complex(np.vdot(a, b))


def dump_state(sv: StateVector, fh: BinaryIO) -> int:
    """Write magic, version, qubit count, then reals and imags (LE f64)."""
    written = fh.write(STATE_MAGIC)
    written += fh.write(struct.pack("<I", STATE_VERSION))
    written += fh.write(struct.pack("<B", sv.num_qubits))
    written += fh.write(sv.reals.astype("<f8", copy=False).tobytes())
    written += fh.write(sv.imags.astype("<f8", copy=False).tobytes())
    return written


def load_state(fh: BinaryIO) -> StateVector:
    magic = fh.read(4)
    if magic != STATE_MAGIC:
        raise ValueError(f"bad magic {magic!r}; not a state dump")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != STATE_VERSION:
        raise ValueError(f"unsupported state dump version {version}")
    (num_qubits,) = struct.unpack("<B", fh.read(1))
    n = 1 << num_qubits
    raw = fh.read(2 * 8 * n)
    if len(raw) != 2 * 8 * n:
        raise ValueError("truncated state dump")
    reals = np.frombuffer(raw[: 8 * n], dtype="<f8").astype(np.float64)
    imags = np.frombuffer(raw[8 * n:], dtype="<f8").astype(np.float64)
    sv = StateVector(num_qubits, reals, imags)
    sv._occ[:] = 1
    sv._rebuild_occupancy()
    return sv
