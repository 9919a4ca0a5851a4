"""Compiled inner loops for the estimators."""

import numpy as np
from numba import njit

WINDOW_BITS = 15
WINDOW = 1 << WINDOW_BITS
MIN_MATCH = 3
MAX_MATCH = 258
HASH_BITS = 15


@njit(cache=True, nogil=True)
def lz76_phrase_count(bits):
    """Phrase count of the exhaustive-history (LZ76) parse of a 0/1 array.

    A phrase starting at i extends while its content, including the next
    symbol, also starts somewhere before i (overlap allowed). A suffix
    automaton over the whole sequence answers that: each state keeps the
    end position of its first occurrence, so the earliest start of a
    string of length L in that state is ``firstend - L + 1``.
    """
    n = bits.shape[0]
    if n == 0:
        return 0
    cap = 2 * n + 1
    trans = np.full((cap, 2), -1, dtype=np.int32)
    link = np.full(cap, -1, dtype=np.int32)
    length = np.zeros(cap, dtype=np.int32)
    firstend = np.zeros(cap, dtype=np.int32)
    size = 1
    last = 0
    for pos in range(n):
        c = bits[pos]
        cur = size
        size += 1
        length[cur] = length[last] + 1
        firstend[cur] = pos
        p = last
        while p != -1 and trans[p, c] == -1:
            trans[p, c] = cur
            p = link[p]
        if p == -1:
            link[cur] = 0
        else:
            q = trans[p, c]
            if length[p] + 1 == length[q]:
                link[cur] = q
            else:
                clone = size
                size += 1
                length[clone] = length[p] + 1
                trans[clone, 0] = trans[q, 0]
                trans[clone, 1] = trans[q, 1]
                link[clone] = link[q]
                firstend[clone] = firstend[q]
                while p != -1 and trans[p, c] == q:
                    trans[p, c] = clone
                    p = link[p]
                link[q] = clone
                link[cur] = clone
        last = cur

    count = 0
    i = 0
    while i < n:
        state = 0
        matched = 0
        while i + matched < n:
            nxt = trans[state, bits[i + matched]]
            if nxt == -1 or firstend[nxt] - matched >= i:
                break
            state = nxt
            matched += 1
        count += 1
        i += matched + 1
    return count


@njit(cache=True, nogil=True)
def lz77_tokens(data, max_chain):
    """Greedy LZ77 parse with hash chains, DEFLATE limits.

    Returns ``(lengths, values, count)``: a zero length marks a literal
    whose byte is in ``values``; otherwise ``values`` holds the distance.
    ``max_chain`` bounds how many earlier candidates are compared at each
    position; 0 disables matching.
    """
    n = data.shape[0]
    lengths = np.zeros(n, dtype=np.int32)
    values = np.zeros(n, dtype=np.int32)
    head = np.full(1 << HASH_BITS, -1, dtype=np.int64)
    prev = np.full(WINDOW, -1, dtype=np.int64)
    hmask = (1 << HASH_BITS) - 1
    wmask = WINDOW - 1
    count = 0
    i = 0
    while i < n:
        best_len = 0
        best_dist = 0
        if max_chain > 0 and i + MIN_MATCH <= n:
            h = ((data[i] << 10) ^ (data[i + 1] << 5) ^ data[i + 2]) & hmask
            cand = head[h]
            chain = max_chain
            limit = min(MAX_MATCH, n - i)
            while cand >= 0 and i - cand <= WINDOW and chain > 0:
                # cheap reject: a longer match must agree at index best_len
                if data[cand + best_len] == data[i + best_len]:
                    k = 0
                    while k < limit and data[cand + k] == data[i + k]:
                        k += 1
                    if k > best_len:
                        best_len = k
                        best_dist = i - cand
                        if k == limit:
                            break
                cand = prev[cand & wmask]
                chain -= 1
        if best_len >= MIN_MATCH:
            lengths[count] = best_len
            values[count] = best_dist
            end = i + best_len
        else:
            lengths[count] = 0
            values[count] = data[i]
            end = i + 1
        count += 1
        if max_chain > 0:
            while i < end:
                if i + MIN_MATCH <= n:
                    h = ((data[i] << 10) ^ (data[i + 1] << 5) ^ data[i + 2]) & hmask
                    prev[i & wmask] = head[h]
                    head[h] = i
                i += 1
        else:
            i = end
    return lengths, values, count


@njit(cache=True, nogil=True)
def mtf_encode(data):
    order = np.arange(256, dtype=np.uint8)
    out = np.empty(data.shape[0], dtype=np.uint8)
    for i in range(data.shape[0]):
        c = data[i]
        j = 0
        while order[j] != c:
            j += 1
        out[i] = j
        while j > 0:
            order[j] = order[j - 1]
            j -= 1
        order[0] = c
    return out


@njit(cache=True, nogil=True)
def mtf_decode(codes):
    order = np.arange(256, dtype=np.uint8)
    out = np.empty(codes.shape[0], dtype=np.uint8)
    for i in range(codes.shape[0]):
        j = codes[i]
        c = order[j]
        out[i] = c
        while j > 0:
            order[j] = order[j - 1]
            j -= 1
        order[0] = c
    return out


RUNA = 0
RUNB = 1


@njit(cache=True, nogil=True)
def zero_run_encode(mtf):
    """Replace zero runs with bijective base-2 RUNA/RUNB digits.

    Nonzero move-to-front values v become symbol v + 1.
    """
    n = mtf.shape[0]
    out = np.empty(2 * n + 1, dtype=np.int32)
    k = 0
    i = 0
    while i < n:
        if mtf[i] == 0:
            run = 0
            while i < n and mtf[i] == 0:
                run += 1
                i += 1
            while run > 0:
                if run & 1:
                    out[k] = RUNA
                    run = (run - 1) >> 1
                else:
                    out[k] = RUNB
                    run = (run - 2) >> 1
                k += 1
        else:
            out[k] = mtf[i] + 1
            k += 1
            i += 1
    return out[:k]
