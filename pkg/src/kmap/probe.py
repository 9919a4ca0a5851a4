"""The complexity probe: filter, sample, window, estimate and map a stream."""

import csv
import io
import json
import math
import os
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import classifier
from .errors import EmptyInput, InvalidConfig, ModelMismatch
from .estimators import BUILTIN_ESTIMATORS, ByteWindow, parse_estimator_id, run_estimator

SAMPLE_BLOCK = 4096
MIN_WINDOW = 16
MAX_WINDOW = 256 * 1024
DEFAULT_WINDOW = 4096
FILTER_MODES = ("none", "header_only", "payload_only")
OUTPUT_MODES = ("per_window_vector", "single_type")
MAP_FORMAT = "kmap.complexity-map"
MAP_VERSION = 1


@dataclass(frozen=True)
class FilterSpec:
    mode: str = "none"
    header_len: int = 0
    record_len: int = 0

    def __post_init__(self):
        if self.mode not in FILTER_MODES:
            raise InvalidConfig(f"filter mode must be one of {FILTER_MODES}")
        if self.mode != "none":
            if self.record_len < 1 or self.header_len < 0:
                raise InvalidConfig("header/payload filters need record_len >= 1")
            if self.header_len >= self.record_len:
                raise InvalidConfig("header_len must be smaller than record_len")


@dataclass(frozen=True)
class ProbeConfig:
    filter: FilterSpec = field(default_factory=FilterSpec)
    sampling_rate: float = 1.0
    window_size: int = DEFAULT_WINDOW
    estimators: tuple = BUILTIN_ESTIMATORS
    output_mode: str = "per_window_vector"

    def __post_init__(self):
        if not 0.0 < self.sampling_rate <= 1.0:
            raise InvalidConfig("sampling_rate must be in (0, 1]")
        if not MIN_WINDOW <= self.window_size <= MAX_WINDOW:
            raise InvalidConfig(f"window_size must be in [{MIN_WINDOW}, {MAX_WINDOW}]")
        if not self.estimators:
            raise InvalidConfig("at least one estimator must be enabled")
        ids = tuple(parse_estimator_id(e) for e in self.estimators)
        if len(set(ids)) != len(ids):
            raise InvalidConfig("duplicate estimators in configuration")
        object.__setattr__(self, "estimators", ids)
        if self.output_mode not in OUTPUT_MODES:
            raise InvalidConfig(f"output_mode must be one of {OUTPUT_MODES}")

    def to_dict(self):
        d = asdict(self)
        d["estimators"] = list(self.estimators)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["filter"] = FilterSpec(**d.get("filter", {}))
        d["estimators"] = tuple(d.get("estimators", BUILTIN_ESTIMATORS))
        return cls(**d)


@dataclass(frozen=True)
class MapRecord:
    index: int
    offset: int
    length: int
    estimates: tuple
    predicted_type: Optional[str] = None

    def estimators(self):
        return tuple(e.estimator for e in self.estimates)


@dataclass
class ComplexityMap:
    source_id: str
    config: ProbeConfig
    records: list
    stream_length: int = 0
    file_type: Optional[str] = None
    elapsed_us: float = 0.0

    def to_csv(self, include_elapsed=False):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        with_type = any(r.predicted_type is not None for r in self.records)
        header = ["window_index", "offset", "length", *self.config.estimators]
        if include_elapsed:
            header += [f"{e}_elapsed_us" for e in self.config.estimators]
        if with_type:
            header.append("predicted_type")
        writer.writerow(header)
        for r in self.records:
            row = [r.index, r.offset, r.length, *(f"{e.value:.6f}" for e in r.estimates)]
            if include_elapsed:
                row += [f"{e.elapsed_us:.3f}" for e in r.estimates]
            if with_type:
                row.append(r.predicted_type)
            writer.writerow(row)
        if self.file_type is not None:
            buf.write(f"#file_type={self.file_type}\n")
        return buf.getvalue()

    def to_dict(self, include_timing=False):
        doc = {
            "format": MAP_FORMAT,
            "version": MAP_VERSION,
            "source_id": self.source_id,
            "config": self.config.to_dict(),
            "stream_length": self.stream_length,
            "file_type": self.file_type,
            "records": [],
        }
        if include_timing:
            doc["elapsed_us"] = self.elapsed_us
        for r in self.records:
            ests = {}
            for e in r.estimates:
                ests[e.estimator] = {"value": round(e.value, 12),
                                     "raw_output_bits": e.raw_output_bits,
                                     "input_bits": e.input_bits}
                if include_timing:
                    ests[e.estimator]["elapsed_us"] = e.elapsed_us
            doc["records"].append({"index": r.index, "offset": r.offset, "length": r.length,
                                   "estimates": ests, "predicted_type": r.predicted_type})
        return doc

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=1) + "\n"


class _FilterStage:
    def __init__(self, spec):
        self.spec = spec
        self.pos = 0

    def push(self, chunk):
        spec = self.spec
        if spec.mode == "none" or not chunk:
            return bytes(chunk)
        arr = np.frombuffer(bytes(chunk), dtype=np.uint8)
        keep = (self.pos + np.arange(len(arr))) % spec.record_len < spec.header_len
        if spec.mode == "payload_only":
            keep = ~keep
        self.pos += len(arr)
        return arr[keep].tobytes()

    def close(self):
        return b""


def _kept(rate, block_len):
    # round away float noise such as 0.3 * 10 = 3.0000000000000004
    return math.ceil(round(rate * block_len, 9))


class _SampleStage:
    def __init__(self, rate):
        if not 0.0 < rate <= 1.0:
            raise InvalidConfig("sampling rate must be in (0, 1]")
        self.rate = rate
        self.block = bytearray()

    def push(self, chunk):
        if self.rate == 1.0:
            return bytes(chunk)
        self.block += chunk
        keep = _kept(self.rate, SAMPLE_BLOCK)
        n_full = len(self.block) // SAMPLE_BLOCK
        out = b"".join(bytes(self.block[k * SAMPLE_BLOCK:k * SAMPLE_BLOCK + keep])
                       for k in range(n_full))
        del self.block[:n_full * SAMPLE_BLOCK]
        return out

    def close(self):
        out = bytes(self.block[:_kept(self.rate, len(self.block))])
        self.block = bytearray()
        return out


class _WindowStage:
    def __init__(self, window_size):
        if window_size < 1:
            raise InvalidConfig("window_size must be >= 1")
        self.size = window_size
        self.buf = bytearray()
        self.offset = 0

    def push(self, chunk):
        self.buf += chunk
        out = []
        pos = 0
        while len(self.buf) - pos >= self.size:
            out.append(ByteWindow(self.offset, bytes(self.buf[pos:pos + self.size])))
            pos += self.size
            self.offset += self.size
        del self.buf[:pos]
        return out

    def close(self):
        out = [ByteWindow(self.offset, bytes(self.buf))] if self.buf else []
        self.offset += len(self.buf)
        self.buf = bytearray()
        return out


def apply_filter(stream, spec):
    """Keep the header or payload bytes of each fixed-size record.

    A trailing partial record is split the same way as a full one.
    """
    return _FilterStage(spec).push(stream)


def sample(stream, rate):
    """Keep the first ceil(rate * B) bytes of every 4096-byte block."""
    stage = _SampleStage(rate)
    return stage.push(stream) + stage.close()


def partition(stream, window_size):
    """Split into consecutive windows; only the last may be shorter."""
    stage = _WindowStage(window_size)
    return stage.push(stream) + stage.close()


def _check_model(model, config):
    if model is None:
        return
    missing = [e for e in model.estimators if e not in config.estimators]
    if missing:
        raise ModelMismatch(f"model needs estimators {missing} which are not enabled")


class Probe:
    """Incremental probe.

    Windows are estimated as soon as they fill, so memory stays at a few
    windows per worker. ``feed`` returns its chunk untouched: whatever sits
    downstream sees exactly the input stream.
    """

    def __init__(self, config, model=None, source_id="-", jobs=1):
        _check_model(model, config)
        self.config = config
        self.model = model
        self.source_id = source_id
        self.jobs = max(1, int(jobs or os.cpu_count() or 1))
        self._filter = _FilterStage(config.filter)
        self._sample = _SampleStage(config.sampling_rate)
        self._windows = _WindowStage(config.window_size)
        self._records = []
        self._inflight = deque()
        self._pool = ThreadPoolExecutor(self.jobs) if self.jobs > 1 else None
        self._started = None

    def feed(self, chunk):
        if self._started is None:
            self._started = time.perf_counter_ns()
        data = self._sample.push(self._filter.push(chunk))
        for w in self._windows.push(data):
            self._submit(w)
        return chunk

    def passthrough(self, chunks):
        """Yield every chunk unchanged while measuring it."""
        for chunk in chunks:
            yield self.feed(chunk)

    def _estimate(self, window):
        return tuple(run_estimator(e, window) for e in self.config.estimators)

    def _submit(self, window):
        if self._pool is None:
            self._add(window, self._estimate(window))
            return
        self._inflight.append((window, self._pool.submit(self._estimate, window)))
        while len(self._inflight) > 2 * self.jobs:
            w, fut = self._inflight.popleft()
            self._add(w, fut.result())

    def _add(self, window, estimates):
        self._records.append(MapRecord(len(self._records), window.offset, len(window), estimates))

    def finish(self):
        started = self._started or time.perf_counter_ns()
        tail = self._filter.close()
        tail = self._sample.push(tail) + self._sample.close()
        for w in self._windows.push(tail) + self._windows.close():
            self._submit(w)
        while self._inflight:
            w, fut = self._inflight.popleft()
            self._add(w, fut.result())
        if self._pool is not None:
            self._pool.shutdown()
        records, self._records = self._records, []
        if not records:
            raise EmptyInput("nothing left to measure after filtering and sampling")
        cfg = self.config
        cmap = ComplexityMap(self.source_id, cfg, records,
                             stream_length=sum(r.length for r in records))
        if self.model is not None:
            if cfg.output_mode == "single_type":
                label = classifier.classify_file(self.model, cmap)
                cmap.file_type = label
                cmap.records = [_with_type(r, label) for r in records]
            else:
                cmap.records = [
                    _with_type(r, classifier.classify(
                        self.model, classifier.FeatureVector.from_estimates(r.estimates, r.length)))
                    for r in records]
        cmap.elapsed_us = (time.perf_counter_ns() - started) / 1000.0
        return cmap


def _with_type(record, label):
    return MapRecord(record.index, record.offset, record.length, record.estimates, label)


def build_map(stream, config, model=None, source_id="-", jobs=1):
    """Complexity map of a whole in-memory stream."""
    probe = Probe(config, model=model, source_id=source_id, jobs=jobs)
    probe.feed(stream)
    return probe.finish()


def sample_features(data, config, jobs=1):
    """FeatureVector of one sample: mean estimate per estimator over its windows.

    The length feature is the raw sample length, before filtering or sampling.
    """
    cmap = build_map(data, config, jobs=jobs)
    values = np.array([[e.value for e in r.estimates] for r in cmap.records])
    return classifier.FeatureVector(config.estimators,
                                    tuple(float(v) for v in values.mean(axis=0)), len(data))


def window_features(data, estimators, window_size=DEFAULT_WINDOW):
    config = ProbeConfig(window_size=window_size, estimators=tuple(estimators))
    return sample_features(data, config)
