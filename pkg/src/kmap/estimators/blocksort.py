"""Block-sorting codec: BWT, move-to-front, zero-run coding, Huffman.

One input block per call. The Burrows-Wheeler transform is taken over the
suffixes of the block with an implicit end marker, so it is invertible
for every input including periodic ones; the marker's row is stored in
the header.

Stream layout (LSB-first bits)::

    transform flag (1) | block length (32) | marker row (32, if transformed)
    | symbol-group map (17) | 16-bit map per used group
    | first code length (5) | delta-coded lengths | coded symbols | EOB
"""

import numpy as np

from ..errors import CorruptStream
from ._kernels import RUNA, RUNB, mtf_decode, mtf_encode, zero_run_encode
from .huffman import BitReader, BitWriter, HuffmanDecoder, canonical_codes, code_lengths

ALPHABET = 258
EOB = 257
MAX_CODE_LEN = 20
N_GROUPS = -(-ALPHABET // 16)


def suffix_array(data):
    """Suffix array of a byte sequence by prefix doubling."""
    s = np.frombuffer(bytes(data), dtype=np.uint8).astype(np.int64)
    n = len(s)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rank = s
    k = 1
    while True:
        second = np.zeros(n, dtype=np.int64)
        second[:n - k] = rank[k:] + 1
        key = rank * (int(rank.max()) + 2) + second
        order = np.argsort(key, kind="stable")
        sorted_key = key[order]
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[order] = np.concatenate(([0], np.cumsum(sorted_key[1:] != sorted_key[:-1])))
        rank = new_rank
        if rank.max() == n - 1 or k >= n:
            return order
        k *= 2


def bwt(data):
    """Return ``(last_column, marker_row)``.

    ``last_column`` omits the end marker; ``marker_row`` is its position in
    the full (n + 1)-row last column.
    """
    data = bytes(data)
    n = len(data)
    if n == 0:
        return b"", 0
    sa = suffix_array(data)
    s = np.frombuffer(data, dtype=np.uint8)
    # row 0 is the marker suffix, preceded by the last byte
    prev = s[(sa - 1) % n]
    marker_row = int(np.flatnonzero(sa == 0)[0]) + 1
    last = np.concatenate(([s[-1]], np.delete(prev, marker_row - 1)))
    return last.astype(np.uint8).tobytes(), marker_row


def inverse_bwt(last, marker_row):
    n = len(last)
    if n == 0:
        return b""
    if not 1 <= marker_row <= n:
        raise CorruptStream("marker row out of range")
    col = np.frombuffer(bytes(last), dtype=np.uint8).astype(np.int64)
    full = np.insert(col, marker_row, -1)
    # LF mapping: stable sort of the last column gives the first column
    order = np.argsort(full, kind="stable")
    lf = np.empty(n + 1, dtype=np.int64)
    lf[order] = np.arange(n + 1)
    out = np.empty(n, dtype=np.uint8)
    row = 0
    for k in range(n - 1, -1, -1):
        c = full[row]
        if c < 0:
            raise CorruptStream("end marker reached early")
        out[k] = c
        row = lf[row]
    return out.tobytes()


class _Plan:
    def __init__(self, data, transform):
        self.n = len(data)
        self.transform = bool(transform)
        if self.transform:
            block, self.marker_row = bwt(data)
        else:
            block, self.marker_row = bytes(data), 0
        mtf = mtf_encode(np.frombuffer(block, dtype=np.uint8))
        symbols = zero_run_encode(mtf)
        self.symbols = np.append(symbols, EOB)
        self.freq = np.bincount(self.symbols, minlength=ALPHABET)
        self.lengths = code_lengths(self.freq, MAX_CODE_LEN)
        used = np.flatnonzero(self.lengths)
        self.used = used
        groups = np.unique(used // 16)
        self.groups = groups
        deltas = np.abs(np.diff(self.lengths[used]))
        table_bits = N_GROUPS + 16 * len(groups) + 5 + len(used) + 2 * int(deltas.sum())
        header = 1 + 32 + (32 if self.transform else 0)
        self.bits = header + table_bits + int((self.freq * self.lengths).sum())


def blocksort_size_bits(data, transform=True):
    """Exact bit length of ``compress(data, transform)`` before byte padding."""
    return _Plan(data, transform).bits


def compress(data, transform=True):
    data = bytes(data)
    plan = _Plan(data, transform)
    out = BitWriter()
    out.write(int(plan.transform), 1)
    out.write(plan.n, 32)
    if plan.transform:
        out.write(plan.marker_row, 32)
    group_set = set(int(g) for g in plan.groups)
    for g in range(N_GROUPS):
        out.write(int(g in group_set), 1)
    used_set = set(int(u) for u in plan.used)
    for g in sorted(group_set):
        for sym in range(16 * g, 16 * g + 16):
            out.write(int(sym in used_set), 1)
    cur = int(plan.lengths[plan.used[0]])
    out.write(cur, 5)
    for sym in plan.used:
        target = int(plan.lengths[sym])
        while cur != target:
            out.write(1, 1)
            out.write(0 if target > cur else 1, 1)
            cur += 1 if target > cur else -1
        out.write(0, 1)
    codes = canonical_codes(plan.lengths)
    for sym in plan.symbols:
        out.write_code(codes[sym], int(plan.lengths[sym]))
    assert out.bit_length == plan.bits
    return out.getvalue()


def decompress(stream):
    reader = BitReader(stream)
    transform = reader.read(1)
    n = reader.read(32)
    marker_row = reader.read(32) if transform else 0
    groups = [g for g in range(N_GROUPS) if reader.read(1)]
    used = [sym for g in groups for sym in range(16 * g, 16 * g + 16) if reader.read(1)]
    if not used:
        raise CorruptStream("no symbols in table")
    lengths = [0] * ALPHABET
    cur = reader.read(5)
    for sym in used:
        if sym >= ALPHABET:
            raise CorruptStream("symbol outside alphabet")
        while reader.read(1):
            cur += -1 if reader.read(1) else 1
            if not 1 <= cur <= MAX_CODE_LEN:
                raise CorruptStream("code length out of range")
        lengths[sym] = cur
    decoder = HuffmanDecoder(lengths)

    mtf = []
    run = 0
    weight = 1
    while True:
        sym = decoder.decode(reader)
        if sym in (RUNA, RUNB):
            run += weight * (1 if sym == RUNA else 2)
            weight <<= 1
            continue
        if run:
            mtf.extend([0] * run)
            run, weight = 0, 1
        if sym == EOB:
            break
        mtf.append(sym - 1)
    if len(mtf) != n:
        raise CorruptStream("decoded length does not match header")
    block = mtf_decode(np.array(mtf, dtype=np.uint8)).tobytes()
    return inverse_bwt(block, marker_row) if transform else block
