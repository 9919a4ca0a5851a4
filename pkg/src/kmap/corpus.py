"""Labeled corpora: directory scans, manifests, stratified splits, synthetic
surrogate samples and payload splicing."""

import bisect
import json
import math
import os
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InsufficientSamples, InvalidSpan, InvalidSpec
from .semantic import SYNTHETIC_KINDS, parse_type

MIN_SAMPLES_PER_TYPE = 10
DEFAULT_SAMPLE_LENGTH = 64 * 1024
SYNTHETIC_PREFIX = "synthetic:"

# Public-domain source text for the order-2 character model.
EXCERPT = (
    "When in the Course of human events, it becomes necessary for one people to dissolve "
    "the political bands which have connected them with another, and to assume among the "
    "powers of the earth, the separate and equal station to which the Laws of Nature and of "
    "Nature's God entitle them, a decent respect to the opinions of mankind requires that "
    "they should declare the causes which impel them to the separation. We hold these truths "
    "to be self-evident, that all men are created equal, that they are endowed by their "
    "Creator with certain unalienable Rights, that among these are Life, Liberty and the "
    "pursuit of Happiness. That to secure these rights, Governments are instituted among Men, "
    "deriving their just powers from the consent of the governed, That whenever any Form of "
    "Government becomes destructive of these ends, it is the Right of the People to alter or "
    "to abolish it, and to institute new Government, laying its foundation on such principles "
    "and organizing its powers in such form, as to them shall seem most likely to effect their "
    "Safety and Happiness. Prudence, indeed, will dictate that Governments long established "
    "should not be changed for light and transient causes; and accordingly all experience hath "
    "shewn, that mankind are more disposed to suffer, while evils are sufferable, than to "
    "right themselves by abolishing the forms to which they are accustomed.\n"
    "Four score and seven years ago our fathers brought forth on this continent, a new nation, "
    "conceived in Liberty, and dedicated to the proposition that all men are created equal. "
    "Now we are engaged in a great civil war, testing whether that nation, or any nation so "
    "conceived and so dedicated, can long endure. We are met on a great battle-field of that "
    "war. We have come to dedicate a portion of that field, as a final resting place for those "
    "who here gave their lives that that nation might live. It is altogether fitting and "
    "proper that we should do this. But, in a larger sense, we can not dedicate -- we can not "
    "consecrate -- we can not hallow -- this ground. The brave men, living and dead, who "
    "struggled here, have consecrated it, far above our poor power to add or detract. The "
    "world will little note, nor long remember what we say here, but it can never forget what "
    "they did here. It is for us the living, rather, to be dedicated here to the unfinished "
    "work which they who fought here have thus far so nobly advanced. It is rather for us to "
    "be here dedicated to the great task remaining before us -- that from these honored dead "
    "we take increased devotion to that cause for which they gave the last full measure of "
    "devotion -- that we here highly resolve that these dead shall not have died in vain -- "
    "that this nation, under God, shall have a new birth of freedom -- and that government of "
    "the people, by the people, for the people, shall not perish from the earth.\n"
)


class Rng:
    """Portable random stream.

    Raw 64-bit outputs of numpy's PCG64 bit generator seeded with the
    integer seed; those outputs are stable across platforms and numpy
    releases. Every derived quantity is computed here from the raw words:
    bytes are the words in little-endian order, uniforms are the top 53
    bits scaled to [0, 1).
    """

    def __init__(self, seed):
        self._bits = np.random.PCG64(int(seed))

    def words(self, n):
        return self._bits.random_raw(int(n)).astype(np.uint64)

    def bytes(self, n):
        return self.words(-(-n // 8)).astype("<u8").tobytes()[:n]

    def uniform(self, n):
        return (self.words(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def integers(self, low, high, n):
        """Integers in [low, high) by scaling uniforms."""
        return low + np.floor(self.uniform(n) * (high - low)).astype(np.int64)


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str
    length: int
    seed: int

    @property
    def id(self):
        return f"{SYNTHETIC_PREFIX}{self.kind}:{self.length}:{self.seed}"

    @classmethod
    def from_id(cls, ident):
        try:
            kind, length, seed = ident[len(SYNTHETIC_PREFIX):].split(":")
            return cls(kind, int(length), int(seed))
        except ValueError:
            raise InvalidSpec(f"malformed synthetic id {ident!r}") from None


def _random_bytes(n, rng):
    return rng.bytes(n)


def _repeated_pattern(n, rng):
    motif_len = int(rng.integers(2, 17, 1)[0])
    motif = rng.bytes(motif_len)
    return (motif * (n // motif_len + 1))[:n]


_MARKOV = None


def _markov_table():
    global _MARKOV
    if _MARKOV is None:
        text = EXCERPT + EXCERPT[:2]  # wrap so every context has a successor
        counts = {}
        for i in range(len(text) - 2):
            succ = counts.setdefault(text[i:i + 2], {})
            succ[text[i + 2]] = succ.get(text[i + 2], 0) + 1
        table = {}
        for ctx, succ in counts.items():
            chars = sorted(succ)
            cum = list(np.cumsum([succ[c] for c in chars]))
            table[ctx] = (chars, cum)
        _MARKOV = table
    return _MARKOV


def _markov_text(n, rng):
    table = _markov_table()
    start = int(rng.integers(0, len(EXCERPT) - 1, 1)[0])
    out = [EXCERPT[start], (EXCERPT + EXCERPT[:1])[start + 1]]
    draws = rng.uniform(n)
    for k in range(n - 2):
        chars, cum = table[out[-2] + out[-1]]
        out.append(chars[bisect.bisect_right(cum, draws[k] * cum[-1])])
    return "".join(out[:n]).encode("ascii")


def _pcm_sine_mix(n, rng):
    freq = 0.002 + rng.uniform(3) * 0.198  # cycles per sample
    amp = 0.2 + rng.uniform(3) * 0.8
    phase = rng.uniform(3) * 2 * math.pi
    t = np.arange(n, dtype=np.float64)
    signal = (amp[:, None] * np.sin(2 * math.pi * freq[:, None] * t + phase[:, None])).sum(axis=0)
    scaled = (signal / amp.sum() + 1.0) * 127.5
    return np.clip(np.round(scaled), 0, 255).astype(np.uint8).tobytes()


def _structured_binary(n, rng):
    out = bytearray()
    zero_run = True
    while len(out) < n:
        run = int(rng.integers(16, 513, 1)[0])
        out += bytes(run) if zero_run else rng.bytes(run)
        zero_run = not zero_run
    return bytes(out[:n])


_GENERATORS = {
    "random_bytes": _random_bytes,
    "repeated_pattern": _repeated_pattern,
    "markov_text": _markov_text,
    "pcm_sine_mix": _pcm_sine_mix,
    "structured_binary": _structured_binary,
}


def generate_synthetic(spec):
    """Deterministic surrogate sample for ``spec``."""
    if spec.kind not in _GENERATORS:
        raise InvalidSpec(f"unknown synthetic kind {spec.kind!r}; choose from {SYNTHETIC_KINDS}")
    if spec.length <= 0:
        raise InvalidSpec("synthetic length must be positive")
    return _GENERATORS[spec.kind](spec.length, Rng(spec.seed))


def splice(container, payload, offset):
    """Overwrite ``container[offset:offset+len(payload)]`` with ``payload``.

    Returns the spliced bytes and the ground-truth ``(start, end)`` span.
    """
    container = bytes(container)
    payload = bytes(payload)
    if offset < 0 or offset + len(payload) > len(container):
        raise InvalidSpan(f"payload of {len(payload)} bytes does not fit at offset {offset}")
    end = offset + len(payload)
    return container[:offset] + payload + container[end:], (offset, end)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    length: int
    split: Optional[str] = None

    @property
    def is_synthetic(self):
        return self.path.startswith(SYNTHETIC_PREFIX)


@dataclass
class Manifest:
    entries: list
    seed: Optional[int] = None
    base_dir: str = "."

    def labels(self):
        return sorted({e.label for e in self.entries})

    def by_label(self):
        groups = {}
        for e in self.entries:
            groups.setdefault(e.label, []).append(e)
        return groups

    def load(self, entry):
        if entry.is_synthetic:
            return generate_synthetic(SyntheticSpec.from_id(entry.path))
        path = entry.path if os.path.isabs(entry.path) else os.path.join(self.base_dir, entry.path)
        with open(path, "rb") as fh:
            return fh.read()

    def samples(self):
        """``(entry, bytes)`` for every entry, in manifest order."""
        return [(e, self.load(e)) for e in self.entries]


class UnderMinimumWarning(UserWarning):
    pass


def scan_corpus(root, extra_types=()):
    """One entry per regular file in ``root/<type>/``.

    Entry paths are relative to ``root``.
    """
    entries = []
    for name in sorted(os.listdir(root)):
        type_dir = os.path.join(root, name)
        if not os.path.isdir(type_dir):
            continue
        label = parse_type(name, extra_types)
        count = 0
        for fname in sorted(os.listdir(type_dir)):
            path = os.path.join(type_dir, fname)
            if not os.path.isfile(path):
                continue
            try:
                with open(path, "rb") as fh:
                    size = len(fh.read())
            except OSError as exc:
                warnings.warn(f"skipping unreadable file {path}: {exc}")
                continue
            if size == 0:
                warnings.warn(f"skipping empty file {path}")
                continue
            entries.append(ManifestEntry(os.path.join(name, fname), label, size))
            count += 1
        if count < MIN_SAMPLES_PER_TYPE:
            warnings.warn(f"type {label} has {count} samples; at least "
                          f"{MIN_SAMPLES_PER_TYPE} per type are recommended",
                          UnderMinimumWarning)
    return Manifest(entries, base_dir=str(root))


def synthetic_manifest(per_kind, length=DEFAULT_SAMPLE_LENGTH, seed=0, kinds=SYNTHETIC_KINDS):
    """Manifest of synthetic samples labeled by kind.

    Sample ``i`` of the ``k``-th kind uses seed ``seed * 1_000_003 + k * 10_007 + i``.
    """
    entries = []
    for k, kind in enumerate(kinds):
        for i in range(per_kind):
            spec = SyntheticSpec(kind, length, seed * 1_000_003 + k * 10_007 + i)
            entries.append(ManifestEntry(spec.id, kind, length))
    return Manifest(entries, seed=seed)


def split(manifest, test_fraction, seed):
    """Stratified train/test split; every type lands on both sides."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = Rng(seed)
    in_test = set()
    groups = manifest.by_label()
    for label in sorted(groups):
        members = [k for k, e in enumerate(manifest.entries) if e.label == label]
        n = len(members)
        if n < 2:
            raise InsufficientSamples(f"type {label} has {n} entry; cannot split")
        n_test = min(n - 1, max(1, math.floor(round(test_fraction * n, 9) + 0.5)))
        draws = rng.uniform(n)
        for i in range(n - 1, 0, -1):  # Fisher-Yates
            j = int(draws[i] * (i + 1))
            members[i], members[j] = members[j], members[i]
        in_test.update(members[:n_test])
    train = [replace(e, split="train") for k, e in enumerate(manifest.entries) if k not in in_test]
    test = [replace(e, split="test") for k, e in enumerate(manifest.entries) if k in in_test]
    return Manifest(train, seed, manifest.base_dir), Manifest(test, seed, manifest.base_dir)


def write_manifest(manifest, path):
    """JSON lines: a header line with the seed, then one entry per line."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"kmap_manifest": 1, "seed": manifest.seed}) + "\n")
        for e in manifest.entries:
            fh.write(json.dumps({"path": e.path, "label": e.label, "split": e.split,
                                 "length": e.length}) + "\n")


def read_manifest(path):
    entries = []
    seed = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            if "kmap_manifest" in doc:
                seed = doc.get("seed")
                continue
            entries.append(ManifestEntry(doc["path"], parse_type(doc["label"], (doc["label"],)),
                                         int(doc["length"]), doc.get("split")))
    return Manifest(entries, seed, os.path.dirname(os.path.abspath(path)))


def write_corpus_dir(manifest, root):
    """Materialize a manifest as ``root/<label>/<n>.bin`` files."""
    counters = {}
    for entry, data in manifest.samples():
        type_dir = os.path.join(root, entry.label)
        os.makedirs(type_dir, exist_ok=True)
        n = counters.get(entry.label, 0)
        counters[entry.label] = n + 1
        with open(os.path.join(type_dir, f"{n:04d}.bin"), "wb") as fh:
            fh.write(data)


__all__ = [
    "EXCERPT", "Manifest", "ManifestEntry", "Rng", "SyntheticSpec", "UnderMinimumWarning",
    "generate_synthetic", "read_manifest", "scan_corpus", "splice", "split",
    "synthetic_manifest", "write_corpus_dir", "write_manifest",
]
