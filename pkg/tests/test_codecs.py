import bz2
import zlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kmap.corpus import SYNTHETIC_KINDS, SyntheticSpec, generate_synthetic
from kmap.errors import CorruptStream
from kmap.estimators import blocksort, deflate
from kmap.estimators._kernels import mtf_decode, mtf_encode
from kmap.estimators.huffman import (BitReader, BitWriter, HuffmanDecoder, canonical_codes,
                                     code_lengths)

from oracles import bwt_rotations


def fuzz_inputs(count, seed):
    """Mixed fuzz corpus: random, low-alphabet, runs, periodic, tiny."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = int(rng.integers(0, 3000)) if k % 10 else int(rng.integers(0, 5))
        mode = k % 5
        if mode == 0:
            d = rng.integers(0, 256, n, dtype=np.uint8)
        elif mode == 1:
            d = rng.integers(0, int(rng.integers(1, 5)), n, dtype=np.uint8)
        elif mode == 2:
            d = np.repeat(rng.integers(0, 256, n // 50 + 1, dtype=np.uint8),
                          rng.integers(1, 100, n // 50 + 1))[:n]
        elif mode == 3:
            d = np.tile(rng.integers(0, 256, int(rng.integers(1, 20)), dtype=np.uint8), n)[:n]
        else:
            d = np.frombuffer(generate_synthetic(SyntheticSpec("markov_text", max(n, 1), k)),
                              dtype=np.uint8)
        out.append(bytes(d.astype(np.uint8)))
    return out


def raw_inflate(stream):
    return zlib.decompress(stream, wbits=-15)


# DEFLATE

@pytest.mark.parametrize("effort", [0, 1, 6, 9])
def test_deflate_roundtrip_own_and_zlib(effort):
    for data in fuzz_inputs(120, effort):
        stream = deflate.compress(data, effort)
        assert raw_inflate(stream) == data
        assert deflate.decompress(stream) == data
        assert deflate.deflate_size_bits(data, effort) <= 8 * len(stream)
        assert deflate.deflate_size_bits(data, effort) > 8 * (len(stream) - 1)


def test_deflate_long_input_crosses_window():
    data = generate_synthetic(SyntheticSpec("structured_binary", 150_000, 4))
    stream = deflate.compress(data)
    assert raw_inflate(stream) == data


def test_deflate_reads_zlib_streams():
    for data in fuzz_inputs(40, 77):
        for level in (0, 1, 9):
            co = zlib.compressobj(level, zlib.DEFLATED, -15)
            assert deflate.decompress(co.compress(data) + co.flush()) == data


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_deflate_size_close_to_zlib(kind):
    data = generate_synthetic(SyntheticSpec(kind, 65536, 1))
    co = zlib.compressobj(6, zlib.DEFLATED, -15)
    ref = 8 * len(co.compress(data) + co.flush())
    assert deflate.deflate_size_bits(data, 6) <= 1.15 * ref + 256


def test_deflate_more_effort_no_worse_on_text():
    data = generate_synthetic(SyntheticSpec("markov_text", 32768, 2))
    sizes = [deflate.deflate_size_bits(data, e) for e in (0, 3, 6, 9)]
    assert sizes[-1] <= sizes[0]


def test_deflate_rejects_garbage():
    with pytest.raises(CorruptStream):
        deflate.decompress(b"\xff\xff\xff")


# block sorting

def test_bwt_banana():
    last, row = blocksort.bwt(b"banana")
    assert blocksort.inverse_bwt(last, row) == b"banana"


@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=1, max_size=300))
def test_bwt_matches_rotation_sort(data):
    last, row = blocksort.bwt(data)
    full = [b + 1 for b in last]
    full.insert(row, 0)
    assert full == bwt_rotations(data)
    assert blocksort.inverse_bwt(last, row) == data


def test_suffix_array_against_sorted_suffixes():
    rng = np.random.default_rng(5)
    for _ in range(50):
        data = rng.integers(0, 3, int(rng.integers(1, 200)), dtype=np.uint8).tobytes()
        expected = sorted(range(len(data)), key=lambda i: data[i:])
        assert blocksort.suffix_array(data).tolist() == expected


@pytest.mark.parametrize("transform", [True, False])
def test_blocksort_roundtrip(transform):
    for data in fuzz_inputs(150, 100 + transform):
        stream = blocksort.compress(data, transform)
        assert blocksort.decompress(stream) == data
        bits = blocksort.blocksort_size_bits(data, transform)
        assert 8 * (len(stream) - 1) < bits <= 8 * len(stream)


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_blocksort_size_close_to_bz2(kind):
    data = generate_synthetic(SyntheticSpec(kind, 65536, 1))
    ref = 8 * len(bz2.compress(data, 9))
    assert blocksort.blocksort_size_bits(data) <= 1.15 * ref + 256


def test_blocksort_reference_ab():
    data = b"ab" * 4096
    assert 8 * len(bz2.compress(data)) / (8 * len(data)) <= 0.10
    assert blocksort.blocksort_size_bits(data) / (8 * len(data)) <= 0.10


def test_transform_helps_on_text():
    data = generate_synthetic(SyntheticSpec("markov_text", 16384, 3))
    assert blocksort.blocksort_size_bits(data, True) < blocksort.blocksort_size_bits(data, False)


# primitives

@given(st.lists(st.integers(0, 255), max_size=500))
def test_mtf_roundtrip(values):
    arr = np.array(values, dtype=np.uint8)
    assert mtf_decode(mtf_encode(arr)).tolist() == values


@given(st.lists(st.integers(0, 1000), min_size=1, max_size=300), st.integers(9, 20))
def test_code_lengths_kraft_and_limit(freqs, max_len):
    lengths = code_lengths(freqs, max_len)
    used = [l for f, l in zip(freqs, lengths) if f]
    assert all(l == 0 for f, l in zip(freqs, lengths) if not f)
    if used:
        assert max(used) <= max_len
        assert sum(2.0 ** -l for l in used) <= 1.0


def test_huffman_stream_roundtrip():
    rng = np.random.default_rng(3)
    freqs = rng.integers(0, 50, 40)
    freqs[0] = 1
    lengths = code_lengths(freqs, 15)
    codes = canonical_codes(lengths)
    syms = [int(s) for s in rng.choice(np.flatnonzero(freqs), 500)]
    w = BitWriter()
    for s in syms:
        w.write_code(int(codes[s]), int(lengths[s]))
    r = BitReader(w.getvalue())
    dec = HuffmanDecoder(lengths)
    assert [dec.decode(r) for _ in syms] == syms
