"""Length-limited canonical Huffman codes and LSB-first bit streams.

Shared by the DEFLATE and block-sorting codecs. Bits are packed
least-significant first, the order used by DEFLATE; Huffman codes are
written most-significant bit first inside that stream, as RFC 1951 does.
"""

import heapq

import numpy as np

from ..errors import CorruptStream


def code_lengths(freqs, max_len):
    """Huffman code lengths for ``freqs`` with no code longer than ``max_len``.

    Unused symbols get length 0. A lone used symbol gets length 1 so that
    every emitted symbol costs at least one bit. When the optimal tree is
    too deep the frequencies are halved (floor at 1) and the tree rebuilt,
    which converges quickly and stays close to optimal.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    lengths = np.zeros(len(freqs), dtype=np.int64)
    used = np.flatnonzero(freqs)
    if len(used) == 0:
        return lengths
    if len(used) == 1:
        lengths[used[0]] = 1
        return lengths
    work = freqs[used].copy()
    while True:
        depth = _tree_depths(work)
        if depth.max() <= max_len:
            lengths[used] = depth
            return lengths
        work = np.maximum(work >> 1, 1)


def _tree_depths(weights):
    # ties broken by insertion counter so the result is deterministic
    heap = [(int(w), i, (i,)) for i, w in enumerate(weights)]
    heapq.heapify(heap)
    depth = np.zeros(len(weights), dtype=np.int64)
    counter = len(weights)
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for sym in a:
            depth[sym] += 1
        for sym in b:
            depth[sym] += 1
        heapq.heappush(heap, (w1 + w2, counter, a + b))
        counter += 1
    return depth


def canonical_codes(lengths):
    """Canonical code values (MSB-first) for a list of code lengths."""
    lengths = [int(x) for x in lengths]
    max_len = max(lengths, default=0)
    bl_count = [0] * (max_len + 1)
    for n in lengths:
        if n:
            bl_count[n] += 1
    next_code = [0] * (max_len + 2)
    code = 0
    for bits in range(1, max_len + 1):
        code = (code + bl_count[bits - 1]) << 1
        next_code[bits] = code
    codes = [0] * len(lengths)
    for sym, n in enumerate(lengths):
        if n:
            codes[sym] = next_code[n]
            next_code[n] += 1
    return codes


def reverse_bits(value, nbits):
    out = 0
    for _ in range(nbits):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


class BitWriter:
    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nacc = 0
        self.bit_length = 0

    def write(self, value, nbits):
        """Append ``nbits`` of ``value``, least significant bit first."""
        if nbits == 0:
            return
        self._acc |= (value & ((1 << nbits) - 1)) << self._nacc
        self._nacc += nbits
        self.bit_length += nbits
        while self._nacc >= 8:
            self._out.append(self._acc & 0xFF)
            self._acc >>= 8
            self._nacc -= 8

    def write_code(self, code, nbits):
        """Append a Huffman code so it is read back MSB first."""
        self.write(reverse_bits(code, nbits), nbits)

    def align(self):
        if self._nacc:
            self.write(0, 8 - self._nacc)

    def getvalue(self):
        out = bytes(self._out)
        if self._nacc:
            out += bytes([self._acc & 0xFF])
        return out


class BitReader:
    def __init__(self, data):
        self._data = data
        self._pos = 0  # in bits

    def read(self, nbits):
        value = 0
        for i in range(nbits):
            byte = self._pos >> 3
            if byte >= len(self._data):
                raise CorruptStream("unexpected end of stream")
            value |= ((self._data[byte] >> (self._pos & 7)) & 1) << i
            self._pos += 1
        return value

    def align(self):
        self._pos = (self._pos + 7) & ~7

    def read_bytes(self, n):
        if self._pos & 7:
            raise CorruptStream("byte read on unaligned stream")
        start = self._pos >> 3
        if start + n > len(self._data):
            raise CorruptStream("unexpected end of stream")
        self._pos += 8 * n
        return bytes(self._data[start:start + n])


class HuffmanDecoder:
    def __init__(self, lengths):
        codes = canonical_codes(lengths)
        self._table = {(n, c): sym for sym, (n, c) in enumerate(zip(lengths, codes)) if n}
        self._max = max((int(n) for n in lengths), default=0)
        if not self._table:
            raise CorruptStream("empty Huffman table")

    def decode(self, reader):
        code = 0
        for n in range(1, self._max + 1):
            code = (code << 1) | reader.read(1)
            sym = self._table.get((n, code))
            if sym is not None:
                return sym
        raise CorruptStream("invalid Huffman code")
