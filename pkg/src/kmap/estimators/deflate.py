"""A self-contained raw DEFLATE (RFC 1951) encoder and decoder.

The encoder runs a greedy hash-chain LZ77 parse and emits a single block,
choosing whichever of stored, fixed-Huffman or dynamic-Huffman coding is
shortest. Streams are raw: no zlib/gzip header or checksum, so they can be
checked with ``zlib.decompress(stream, wbits=-15)``.
"""

import numpy as np

from ..errors import CorruptStream, InvalidConfig
from ._kernels import lz77_tokens
from .huffman import (BitReader, BitWriter, HuffmanDecoder, canonical_codes,
                      code_lengths)

# match-search depth per effort level; 0 emits literals only
EFFORT_CHAIN = {0: 0, 1: 4, 2: 8, 3: 16, 4: 32, 5: 64, 6: 128, 7: 256, 8: 1024, 9: 4096}
DEFAULT_EFFORT = 6

LENGTH_BASE = np.array([3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27, 31,
                        35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258])
LENGTH_EXTRA = np.array([0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2,
                         3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0])
DIST_BASE = np.array([1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129, 193,
                      257, 385, 513, 769, 1025, 1537, 2049, 3073, 4097, 6145,
                      8193, 12289, 16385, 24577])
DIST_EXTRA = np.array([0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6,
                       7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13])
CL_ORDER = (16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15)
END_OF_BLOCK = 256
STORED_MAX = 65535

FIXED_LIT_LENGTHS = np.array([8] * 144 + [9] * 112 + [7] * 24 + [8] * 8)
FIXED_DIST_LENGTHS = np.array([5] * 30)


class _Plan:
    """Symbolized tokens plus the coding decision for one block."""

    def __init__(self, data, effort):
        if effort not in EFFORT_CHAIN:
            raise InvalidConfig(f"ZIP effort must be one of {sorted(EFFORT_CHAIN)}")
        self.data = data
        lengths, values, count = lz77_tokens(data, EFFORT_CHAIN[effort])
        lengths = lengths[:count]
        values = values[:count]
        is_match = lengths > 0
        self.is_match = is_match

        lcode = np.searchsorted(LENGTH_BASE, lengths, side="right") - 1
        dcode = np.searchsorted(DIST_BASE, values, side="right") - 1
        self.lit_sym = np.where(is_match, 257 + lcode, values)
        self.len_extra_n = np.where(is_match, LENGTH_EXTRA[np.clip(lcode, 0, 28)], 0)
        self.len_extra_v = np.where(is_match, lengths - LENGTH_BASE[np.clip(lcode, 0, 28)], 0)
        self.dist_sym = np.where(is_match, dcode, -1)
        self.dist_extra_n = np.where(is_match, DIST_EXTRA[np.clip(dcode, 0, 29)], 0)
        self.dist_extra_v = np.where(is_match, values - DIST_BASE[np.clip(dcode, 0, 29)], 0)

        self.lit_freq = np.bincount(self.lit_sym, minlength=286)
        self.lit_freq[END_OF_BLOCK] += 1
        self.dist_freq = np.bincount(self.dist_sym[is_match], minlength=30)
        self.extra_bits = int(self.len_extra_n.sum() + self.dist_extra_n.sum())

        self._dynamic_tables()
        fixed = 3 + self._payload_bits(FIXED_LIT_LENGTHS, FIXED_DIST_LENGTHS)
        dynamic = 3 + self.header_bits + self._payload_bits(self.lit_len, self.dist_len)
        n_stored = max(1, -(-len(data) // STORED_MAX))
        stored = 40 * n_stored + 8 * len(data)
        self.sizes = {"stored": stored, "fixed": fixed, "dynamic": dynamic}
        self.kind = min(self.sizes, key=lambda k: (self.sizes[k], k != "dynamic"))
        self.bits = self.sizes[self.kind]

    def _payload_bits(self, lit_len, dist_len):
        return int((self.lit_freq * lit_len[:len(self.lit_freq)]).sum()
                   + (self.dist_freq * dist_len[:30]).sum()
                   + self.extra_bits)

    def _dynamic_tables(self):
        dist_freq = self.dist_freq.copy()
        # at least two distance codes keep the distance tree complete
        for sym in (0, 1):
            if np.count_nonzero(dist_freq) >= 2:
                break
            if dist_freq[sym] == 0:
                dist_freq[sym] = 1
        self.lit_len = code_lengths(self.lit_freq, 15)
        self.dist_len = code_lengths(dist_freq, 15)
        hlit = max(257, int(np.flatnonzero(self.lit_len).max()) + 1)
        hdist = max(1, int(np.flatnonzero(self.dist_len).max()) + 1)
        self.hlit, self.hdist = hlit, hdist

        seq = list(self.lit_len[:hlit]) + list(self.dist_len[:hdist])
        self.cl_tokens = _run_length_code_lengths(seq)
        cl_freq = np.bincount([t[0] for t in self.cl_tokens], minlength=19)
        self.cl_len = code_lengths(cl_freq, 7)
        hclen = 19
        while hclen > 4 and self.cl_len[CL_ORDER[hclen - 1]] == 0:
            hclen -= 1
        self.hclen = hclen
        cl_extra = {16: 2, 17: 3, 18: 7}
        self.header_bits = (14 + 3 * hclen
                            + sum(int(self.cl_len[s]) + cl_extra.get(s, 0)
                                  for s, _ in self.cl_tokens))


def _run_length_code_lengths(seq):
    """Code-length alphabet tokens (symbol, extra value) for ``seq``."""
    out = []
    i = 0
    n = len(seq)
    while i < n:
        value = int(seq[i])
        run = 1
        while i + run < n and seq[i + run] == value:
            run += 1
        if value == 0 and run >= 3:
            take = min(run, 138)
            out.append((18, take - 11) if take >= 11 else (17, take - 3))
            i += take
            continue
        if value != 0 and run >= 4:
            out.append((value, 0))
            take = min(run - 1, 6)
            out.append((16, take - 3))
            i += 1 + take
            continue
        out.append((value, 0))
        i += 1
    return out


def _as_array(data):
    return np.frombuffer(bytes(data), dtype=np.uint8)


def deflate_size_bits(data, effort=DEFAULT_EFFORT):
    """Exact bit length of ``compress(data, effort)`` before final byte padding."""
    return _Plan(_as_array(data), effort).bits


def compress(data, effort=DEFAULT_EFFORT):
    """Raw DEFLATE stream for ``data``."""
    plan = _Plan(_as_array(data), effort)
    out = BitWriter()
    raw = bytes(data)
    if plan.kind == "stored":
        chunks = [raw[i:i + STORED_MAX] for i in range(0, len(raw), STORED_MAX)] or [b""]
        for k, chunk in enumerate(chunks):
            out.write(1 if k == len(chunks) - 1 else 0, 1)
            out.write(0, 2)
            out.align()
            out.write(len(chunk), 16)
            out.write(len(chunk) ^ 0xFFFF, 16)
            for b in chunk:
                out.write(b, 8)
    elif plan.kind == "fixed":
        out.write(1, 1)
        out.write(1, 2)
        _write_tokens(out, plan, FIXED_LIT_LENGTHS, FIXED_DIST_LENGTHS)
    else:
        out.write(1, 1)
        out.write(2, 2)
        out.write(plan.hlit - 257, 5)
        out.write(plan.hdist - 1, 5)
        out.write(plan.hclen - 4, 4)
        for sym in CL_ORDER[:plan.hclen]:
            out.write(int(plan.cl_len[sym]), 3)
        cl_codes = canonical_codes(plan.cl_len)
        for sym, extra in plan.cl_tokens:
            out.write_code(cl_codes[sym], int(plan.cl_len[sym]))
            if sym == 16:
                out.write(extra, 2)
            elif sym == 17:
                out.write(extra, 3)
            elif sym == 18:
                out.write(extra, 7)
        _write_tokens(out, plan, plan.lit_len, plan.dist_len)
    assert out.bit_length == plan.bits
    return out.getvalue()


def _write_tokens(out, plan, lit_len, dist_len):
    lit_codes = canonical_codes(lit_len)
    dist_codes = canonical_codes(dist_len)
    for k in range(len(plan.lit_sym)):
        sym = int(plan.lit_sym[k])
        out.write_code(lit_codes[sym], int(lit_len[sym]))
        if plan.is_match[k]:
            out.write(int(plan.len_extra_v[k]), int(plan.len_extra_n[k]))
            d = int(plan.dist_sym[k])
            out.write_code(dist_codes[d], int(dist_len[d]))
            out.write(int(plan.dist_extra_v[k]), int(plan.dist_extra_n[k]))
    out.write_code(lit_codes[END_OF_BLOCK], int(lit_len[END_OF_BLOCK]))


def decompress(stream):
    """Inflate a raw DEFLATE stream (any block types)."""
    reader = BitReader(stream)
    out = bytearray()
    final = 0
    while not final:
        final = reader.read(1)
        btype = reader.read(2)
        if btype == 0:
            reader.align()
            header = reader.read_bytes(4)
            n = header[0] | header[1] << 8
            if n ^ (header[2] | header[3] << 8) != 0xFFFF:
                raise CorruptStream("stored block length check failed")
            out += reader.read_bytes(n)
            continue
        if btype == 1:
            lit = HuffmanDecoder(list(FIXED_LIT_LENGTHS))
            dist = HuffmanDecoder(list(FIXED_DIST_LENGTHS))
        elif btype == 2:
            lit, dist = _read_dynamic_tables(reader)
        else:
            raise CorruptStream("reserved block type")
        while True:
            sym = lit.decode(reader)
            if sym < 256:
                out.append(sym)
                continue
            if sym == END_OF_BLOCK:
                break
            code = sym - 257
            if code >= 29:
                raise CorruptStream("bad length symbol")
            length = int(LENGTH_BASE[code]) + reader.read(int(LENGTH_EXTRA[code]))
            d = dist.decode(reader)
            if d >= 30:
                raise CorruptStream("bad distance symbol")
            distance = int(DIST_BASE[d]) + reader.read(int(DIST_EXTRA[d]))
            if distance > len(out):
                raise CorruptStream("distance beyond start of output")
            start = len(out) - distance
            for k in range(length):
                out.append(out[start + k])
    return bytes(out)


def _read_dynamic_tables(reader):
    hlit = reader.read(5) + 257
    hdist = reader.read(5) + 1
    hclen = reader.read(4) + 4
    cl_len = [0] * 19
    for sym in CL_ORDER[:hclen]:
        cl_len[sym] = reader.read(3)
    cl = HuffmanDecoder(cl_len)
    lengths = []
    while len(lengths) < hlit + hdist:
        sym = cl.decode(reader)
        if sym < 16:
            lengths.append(sym)
        elif sym == 16:
            if not lengths:
                raise CorruptStream("repeat with no previous length")
            lengths += [lengths[-1]] * (3 + reader.read(2))
        elif sym == 17:
            lengths += [0] * (3 + reader.read(3))
        else:
            lengths += [0] * (11 + reader.read(7))
    if len(lengths) != hlit + hdist:
        raise CorruptStream("code length overrun")
    return HuffmanDecoder(lengths[:hlit]), HuffmanDecoder(lengths[hlit:])
