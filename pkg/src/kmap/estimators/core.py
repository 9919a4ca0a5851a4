"""Complexity estimators and their registry.

Every estimator maps a non-empty window to a complexity in [0, 1],
expressed as output bits per input bit, and reports the size of the
representation it measured.
"""

import math
import threading
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import EmptyInput, InvalidLength, UnknownEstimator
from . import blocksort, deflate
from ._kernels import lz76_phrase_count

H, LZ, ZIP, BZ, PSI = "H", "LZ", "ZIP", "BZ", "PSI"
BUILTIN_ESTIMATORS = (H, LZ, ZIP, BZ, PSI)
# accepted as ids but never registered here
RESERVED_ESTIMATORS = ("OSCR",)

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


@dataclass(frozen=True)
class ByteWindow:
    offset: int
    payload: bytes

    def __post_init__(self):
        if self.offset < 0:
            raise ValueError("window offset must be >= 0")

    def __len__(self):
        return len(self.payload)


@dataclass(frozen=True)
class ComplexityEstimate:
    estimator: str
    value: float
    raw_output_bits: int
    input_bits: int
    elapsed_us: float = 0.0


def _payload(window):
    payload = window.payload if isinstance(window, ByteWindow) else bytes(window)
    if not payload:
        raise EmptyInput("cannot estimate the complexity of an empty window")
    return payload


def _clamp(x):
    return min(1.0, max(0.0, float(x)))


def binary_entropy(p):
    return _binary_entropy2(p, 1.0 - p)


def _binary_entropy2(p, q):
    if p <= 0.0 or q <= 0.0:
        return 0.0
    return -p * math.log2(p) - q * math.log2(q)


def _timed(name, fn, window):
    payload = _payload(window)
    t0 = time.perf_counter_ns()
    value, raw_bits = fn(payload)
    elapsed = (time.perf_counter_ns() - t0) / 1000.0
    return ComplexityEstimate(name, _clamp(value), int(raw_bits), 8 * len(payload), elapsed)


def _entropy(payload):
    n_bits = 8 * len(payload)
    ones = int(_POPCOUNT[np.frombuffer(payload, dtype=np.uint8)].sum())
    # both fractions from integer counts, so complementing the input is exact
    k = min(ones, n_bits - ones)
    value = _binary_entropy2(k / n_bits, (n_bits - k) / n_bits)
    return value, round(value * n_bits)


def _lz(payload):
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    n = len(bits)
    c = int(lz76_phrase_count(bits))
    return c * math.log2(n) / n, c * math.ceil(math.log2(n))


def _zip(payload, effort=deflate.DEFAULT_EFFORT):
    raw = deflate.deflate_size_bits(payload, effort)
    return raw / (8 * len(payload)), raw


def _bzip(payload, transform=True):
    raw = blocksort.blocksort_size_bits(payload, transform)
    return raw / (8 * len(payload)), raw


def spectral_entropy(samples):
    """Normalized Shannon entropy of the positive-frequency power spectrum.

    The signal is mean-removed and zero-padded to a power of two. Returns
    0 when there is no energy or only one bin.
    """
    x = np.asarray(samples, dtype=np.float64)
    x = x - x.mean()
    size = 1 << max(0, (len(x) - 1).bit_length())
    power = np.abs(np.fft.rfft(x, n=size)[1:]) ** 2
    m = len(power)
    total = power.sum()
    energy = float((x * x).sum())
    # by Parseval total ~ energy * size / 2; anything far below is FFT rounding
    if m < 2 or energy == 0.0 or total <= 1e-12 * energy * size:
        return 0.0
    q = power[power > 0] / total
    return float(-(q * np.log2(q)).sum() / math.log2(m))


def _psi(payload):
    value = spectral_entropy(np.frombuffer(payload, dtype=np.uint8))
    return value, round(_clamp(value) * 8 * len(payload))


def estimate_entropy(window):
    """Binary entropy of the fraction of one bits in the window."""
    return _timed(H, _entropy, window)


def estimate_lz(window):
    """Normalized LZ76 phrase count over the window's bits, MSB first."""
    return _timed(LZ, _lz, window)


def estimate_zip(window, effort=deflate.DEFAULT_EFFORT):
    return _timed(ZIP, lambda p: _zip(p, effort), window)


def estimate_bzip(window, transform=True):
    return _timed(BZ, lambda p: _bzip(p, transform), window)


def estimate_psi(window):
    return _timed(PSI, _psi, window)


class EstimatorRegistry:
    """Id -> estimator function. Frozen on first lookup for estimation."""

    def __init__(self):
        self._fns = {}
        self._frozen = False
        self._lock = threading.Lock()

    def register(self, estimator_id, fn: Callable, replace=False):
        key = estimator_id.upper()
        with self._lock:
            if self._frozen:
                raise RuntimeError("estimator registry is frozen once estimation has started")
            if key in self._fns and not replace:
                raise ValueError(f"estimator {key} is already registered")
            self._fns[key] = fn

    def freeze(self):
        self._frozen = True

    def ids(self):
        return tuple(self._fns)

    def get(self, estimator_id):
        key = parse_estimator_id(estimator_id, self)
        return self._fns[key]


def parse_estimator_id(name, registry=None):
    """Canonical id for ``name`` (case-insensitive) or UnknownEstimator."""
    registry = registry or REGISTRY
    key = str(name).strip().upper()
    if key not in registry._fns:
        valid = ", ".join(registry.ids())
        if key in RESERVED_ESTIMATORS:
            raise UnknownEstimator(f"estimator {key} is reserved but not implemented; valid ids: {valid}")
        raise UnknownEstimator(f"unknown estimator {name!r}; valid ids: {valid}")
    return key


REGISTRY = EstimatorRegistry()
REGISTRY.register(H, estimate_entropy)
REGISTRY.register(LZ, estimate_lz)
REGISTRY.register(ZIP, estimate_zip)
REGISTRY.register(BZ, estimate_bzip)
REGISTRY.register(PSI, estimate_psi)


def register_estimator(estimator_id, fn, replace=False):
    """Add or replace an estimator before any estimation has run."""
    REGISTRY.register(estimator_id, fn, replace=replace)


def run_estimator(estimator_id, window, registry=None):
    registry = registry or REGISTRY
    key = parse_estimator_id(estimator_id, registry)
    fn = registry.get(key)
    registry.freeze()
    t0 = time.perf_counter_ns()
    est = fn(window)
    elapsed = (time.perf_counter_ns() - t0) / 1000.0
    return ComplexityEstimate(key, est.value, est.raw_output_bits, est.input_bits, elapsed)


def occam_likelihood_ratio(l_x, l_m):
    """How many times likelier the shorter description is than chance: 2**(l_x - l_m).

    Evaluated through the exponent so huge differences give ``inf`` or
    ``0.0`` instead of raising.
    """
    if l_x < 0 or l_m < 0:
        raise InvalidLength("description lengths must be non-negative")
    diff = float(l_x) - float(l_m)
    whole = math.floor(diff)
    try:
        return math.ldexp(2.0 ** (diff - whole), int(whole))
    except OverflowError:
        return math.inf
