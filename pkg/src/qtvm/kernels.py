"""Numba kernels for the split real/imaginary amplitude arrays.

The 2^n amplitudes are viewed as contiguous blocks of 2^bb entries; callers
pass the explicit list of block ids a kernel has to visit.  Blocks whose id
is absent are guaranteed untouched, which is what lets the engine skip
regions it knows hold exact zeros.  Amplitude layout inside a block is plain
little-endian: basis index bit k selects stride 2^k.

All kernels run single-threaded, release the GIL, and use strict IEEE
arithmetic (no fastmath) so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def ctrl_u_local(re, im, blocks, bb, q, clo,
                 u00r, u00i, u01r, u01i, u10r, u10i, u11r, u11i):
    """Controlled 2x2 on target q < bb; clo is the in-block control mask."""
    half = 1 << (bb - 1)
    qmask = 1 << q
    lowmask = qmask - 1
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for t in range(half):
            o = ((t >> q) << (q + 1)) | (t & lowmask)
            if (o & clo) == clo:
                i0 = base + o
                i1 = i0 + qmask
                ar = re[i0]; ai = im[i0]
                br = re[i1]; bi_ = im[i1]
                re[i0] = u00r * ar - u00i * ai + u01r * br - u01i * bi_
                im[i0] = u00r * ai + u00i * ar + u01r * bi_ + u01i * br
                re[i1] = u10r * ar - u10i * ai + u11r * br - u11i * bi_
                im[i1] = u10r * ai + u10i * ar + u11r * bi_ + u11i * br


@njit(**_JIT)
def ctrl_u_global(re, im, blocks0, bb, pairbit, clo,
                  u00r, u00i, u01r, u01i, u10r, u10i, u11r, u11i):
    """Controlled 2x2 on target >= bb; blocks0 lists low-side block ids."""
    bsize = 1 << bb
    for bi in range(blocks0.shape[0]):
        base0 = blocks0[bi] << bb
        base1 = (blocks0[bi] | pairbit) << bb
        for o in range(bsize):
            if (o & clo) == clo:
                i0 = base0 + o
                i1 = base1 + o
                ar = re[i0]; ai = im[i0]
                br = re[i1]; bi_ = im[i1]
                re[i0] = u00r * ar - u00i * ai + u01r * br - u01i * bi_
                im[i0] = u00r * ai + u00i * ar + u01r * bi_ + u01i * br
                re[i1] = u10r * ar - u10i * ai + u11r * br - u11i * bi_
                im[i1] = u10r * ai + u10i * ar + u11r * bi_ + u11i * br


@njit(**_JIT)
def scale_masked(re, im, blocks, bb, clo, cr, ci):
    """amp *= (cr + i*ci) on in-block offsets passing the control mask."""
    bsize = 1 << bb
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for o in range(bsize):
            if (o & clo) == clo:
                i = base + o
                ar = re[i]; ai = im[i]
                re[i] = cr * ar - ci * ai
                im[i] = cr * ai + ci * ar


@njit(**_JIT)
def swap_local(re, im, blocks, bb, a, b):
    """Exchange bit values a<b<bb inside each listed block."""
    quarter = 1 << (bb - 2)
    amask = 1 << a
    bmask = 1 << b
    alow = amask - 1
    blow = bmask - 1
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for t in range(quarter):
            v = ((t >> a) << (a + 1)) | (t & alow)
            o = ((v >> b) << (b + 1)) | (v & blow)
            i = base + (o | amask)
            j = base + (o | bmask)
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]


@njit(**_JIT)
def swap_mixed(re, im, blocks0, bb, pairbit, a):
    """Swap local bit a with a block-id bit; blocks0 lists low-side ids."""
    half = 1 << (bb - 1)
    amask = 1 << a
    alow = amask - 1
    for bi in range(blocks0.shape[0]):
        base0 = blocks0[bi] << bb
        base1 = (blocks0[bi] | pairbit) << bb
        for t in range(half):
            o = ((t >> a) << (a + 1)) | (t & alow)
            i = base0 + (o | amask)
            j = base1 + o
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]


@njit(**_JIT)
def swap_blocks(re, im, blocks_lo, bb, xorbits):
    """Exchange whole blocks: id -> id ^ xorbits (both id bits differ)."""
    bsize = 1 << bb
    for bi in range(blocks_lo.shape[0]):
        base0 = blocks_lo[bi] << bb
        base1 = (blocks_lo[bi] ^ xorbits) << bb
        for o in range(bsize):
            i = base0 + o
            j = base1 + o
            re[i], re[j] = re[j], re[i]
            im[i], im[j] = im[j], im[i]


@njit(**_JIT)
def mass_one_local(re, im, blocks, bb, q):
    """Unnormalized probability mass on bit q = 1 (q < bb)."""
    half = 1 << (bb - 1)
    qmask = 1 << q
    lowmask = qmask - 1
    total = 0.0
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for t in range(half):
            o = ((t >> q) << (q + 1)) | (t & lowmask)
            i = base + (o | qmask)
            total += re[i] * re[i] + im[i] * im[i]
    return total


@njit(**_JIT)
def norm_blocks(re, im, blocks, bb):
    bsize = 1 << bb
    total = 0.0
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for o in range(bsize):
            i = base + o
            total += re[i] * re[i] + im[i] * im[i]
    return total


@njit(**_JIT)
def collapse_local(re, im, blocks, bb, q, keep, inv):
    """Zero the discarded branch of bit q < bb and rescale the kept one."""
    bsize = 1 << bb
    qmask = 1 << q
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for o in range(bsize):
            i = base + o
            if ((o >> q) & 1) == keep:
                re[i] *= inv
                im[i] *= inv
            else:
                re[i] = 0.0
                im[i] = 0.0


@njit(**_JIT)
def scale_blocks(re, im, blocks, bb, inv):
    bsize = 1 << bb
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for o in range(bsize):
            i = base + o
            re[i] *= inv
            im[i] *= inv


@njit(**_JIT)
def zero_blocks(re, im, blocks, bb):
    bsize = 1 << bb
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for o in range(bsize):
            i = base + o
            re[i] = 0.0
            im[i] = 0.0


@njit(**_JIT)
def expect_x_local(re, im, blocks, bb, q):
    """Sum of 2*Re(conj(a_[q=0]) * a_[q=1]) over listed blocks, q < bb."""
    half = 1 << (bb - 1)
    qmask = 1 << q
    lowmask = qmask - 1
    total = 0.0
    for bi in range(blocks.shape[0]):
        base = blocks[bi] << bb
        for t in range(half):
            o = ((t >> q) << (q + 1)) | (t & lowmask)
            i0 = base + o
            i1 = i0 + qmask
            total += re[i0] * re[i1] + im[i0] * im[i1]
    return 2.0 * total


@njit(**_JIT)
def expect_x_global(re, im, blocks0, bb, pairbit):
    bsize = 1 << bb
    total = 0.0
    for bi in range(blocks0.shape[0]):
        base0 = blocks0[bi] << bb
        base1 = (blocks0[bi] | pairbit) << bb
        for o in range(bsize):
            total += re[base0 + o] * re[base1 + o] + im[base0 + o] * im[base1 + o]
    return 2.0 * total


@njit(**_JIT)
def cross_dot(re0, im0, re1, im1):
    """Sum of Re(conj(a0)*a1) over two equally sized flat arrays."""
    total = 0.0
    for i in range(re0.shape[0]):
        total += re0[i] * re1[i] + im0[i] * im1[i]
    return total


@njit(**_JIT)
def prune_occupancy(re, im, occ, bb, eps):
    """Release flagged blocks that are numerically dead.

    A block whose largest |re| / |im| entry is at most `eps` is emptied:
    its entries are overwritten with exact zeros (anything that small is
    cancellation residue from gate arithmetic) and its flag drops, so the
    flag-clear-means-exact-zeros invariant survives.  With eps == 0.0 only
    blocks already holding exact zeros are released and nothing is written.
    Live blocks exit at the first above-threshold entry, so the scan stays
    cheap in the common case.
    """
    bsize = 1 << bb
    for blk in range(occ.shape[0]):
        if occ[blk]:
            base = blk << bb
            mx = 0.0
            for o in range(bsize):
                a = abs(re[base + o])
                if a > mx:
                    mx = a
                a = abs(im[base + o])
                if a > mx:
                    mx = a
                if mx > eps:
                    break
            if mx <= eps:
                if mx > 0.0:
                    for o in range(bsize):
                        re[base + o] = 0.0
                        im[base + o] = 0.0
                occ[blk] = 0


def warm_up() -> None:
    """Compile every kernel against its production signature."""
    re = np.zeros(4, dtype=np.float64)
    im = np.zeros(4, dtype=np.float64)
    re[0] = 1.0
    blocks = np.zeros(1, dtype=np.int64)
    occ = np.ones(1, dtype=np.uint8)
    ctrl_u_local(re, im, blocks, 2, 0, 0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    ctrl_u_global(re, im, blocks, 1, 1, 0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    scale_masked(re, im, blocks, 2, 0, 1.0, 0.0)
    swap_local(re, im, blocks, 2, 0, 1)
    swap_mixed(re, im, blocks, 1, 1, 0)
    swap_blocks(re, im, blocks, 1, 1)
    mass_one_local(re, im, blocks, 2, 0)
    norm_blocks(re, im, blocks, 2)
    collapse_local(re, im, blocks, 2, 0, 0, 1.0)
    scale_blocks(re, im, blocks, 2, 1.0)
    zero_blocks(re, im, np.zeros(0, dtype=np.int64), 2)
    expect_x_local(re, im, blocks, 2, 0)
    expect_x_global(re, im, blocks, 1, 1)
    cross_dot(re, im, re, im)
    prune_occupancy(re, im, occ, 2, 0.0)
