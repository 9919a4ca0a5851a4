"""Timing, throughput and accuracy studies of the estimator set.

All timings are single-threaded: one warm-up call, then the median of the
requested repetitions of ``run_estimator``'s elapsed time.
"""

import csv
import io
import json
import platform
import statistics
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import classifier
from .corpus import Manifest, split
from .errors import EmptyInput, InvalidConfig, Unsupported
from .estimators import BZ, H, LZ, PSI, ZIP, parse_estimator_id, run_estimator
from .estimators import deflate
from .estimators.core import estimate_bzip, estimate_zip
from .probe import DEFAULT_WINDOW, partition

THROUGHPUT_FAMILIES = {"fig14": (ZIP, H), "fig15": (PSI, LZ, BZ)}
FIGURES = ("fig09", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15")
LADDER = ((ZIP,), (H,), (LZ,), (LZ, H), (LZ, H, ZIP))


@dataclass(frozen=True)
class TimingRecord:
    estimator: str
    type_label: str
    window_size: int
    complexity: float
    elapsed_us: float
    sample_id: str = ""

    @property
    def throughput(self):
        """Bytes per second; None when the timer did not advance."""
        if self.elapsed_us <= 0:
            return None
        return self.window_size / (self.elapsed_us * 1e-6)


@dataclass
class BenchReport:
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    correlations: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    groups: dict = field(default_factory=dict)

    def records_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "type_label", "window_size", "complexity", "elapsed_us",
                    "throughput_bps", "sample_id"])
        for r in self.records:
            tp = r.throughput
            w.writerow([r.estimator, r.type_label, r.window_size, f"{r.complexity:.6f}",
                        f"{r.elapsed_us:.3f}", "" if tp is None else f"{tp:.1f}", r.sample_id])
        return buf.getvalue()

    def aggregates_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "type_label", "window_size", "n", "mean_elapsed_us",
                    "median_elapsed_us", "stddev_elapsed_us"])
        for (est, label, size), agg in sorted(self.aggregates.items()):
            w.writerow([est, label, size, agg["n"], f"{agg['mean']:.3f}",
                        f"{agg['median']:.3f}", f"{agg['stddev']:.3f}"])
        return buf.getvalue()

    def to_json(self):
        doc = {
            "records": [asdict(r) for r in self.records],
            "aggregates": [{"estimator": k[0], "type_label": k[1], "window_size": k[2], **v}
                           for k, v in sorted(self.aggregates.items())],
            "correlations": self.correlations,
            "environment": self.environment,
            "rows": self.rows,
            "groups": {k: list(v) for k, v in self.groups.items()},
        }
        return json.dumps(doc, indent=1) + "\n"


def environment(repetitions, seed=None):
    return {"host": f"{platform.node()} {platform.machine()} {platform.python_implementation()} "
                    f"{platform.python_version()}",
            "repetitions": repetitions, "seed": seed}


def aggregate(records):
    """Mean/median/population stddev of elapsed per (estimator, type, size)."""
    cells = {}
    for r in records:
        cells.setdefault((r.estimator, r.type_label, r.window_size), []).append(r.elapsed_us)
    return {k: {"n": len(v), "mean": statistics.fmean(v), "median": statistics.median(v),
                "stddev": statistics.pstdev(v)} for k, v in cells.items()}


def spearman(x, y):
    """Spearman rank correlation, or None when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(stats.spearmanr(x, y).statistic)


def _labeled(corpus):
    """``[(sample_id, label, bytes)]`` from a Manifest or (label|entry, bytes) pairs."""
    if isinstance(corpus, Manifest):
        corpus = corpus.samples()
    out = []
    for k, item in enumerate(corpus):
        if len(item) == 3:  # already labeled
            out.append(item)
            continue
        head, data = item
        if hasattr(head, "label"):
            out.append((head.path, head.label, bytes(data)))
        else:
            out.append((f"sample{k}", str(head), bytes(data)))
    if not out:
        raise EmptyInput("empty corpus")
    return out


def time_estimator(estimator, window, repetitions, fn=None):
    """``(estimate, median elapsed us)`` after one warm-up call."""
    call = fn or (lambda w: run_estimator(estimator, w))
    est = call(window)
    elapsed = []
    for _ in range(repetitions):
        est = call(window)
        elapsed.append(est.elapsed_us)
    return est, statistics.median(elapsed)


def profile_time_vs_window(estimators, window_sizes, corpus, repetitions=3):
    """Median time of each estimator on the first window of each sample, per size."""
    if len(window_sizes) < 2:
        raise InvalidConfig("need at least two window sizes")
    if repetitions < 3:
        raise InvalidConfig("need at least three repetitions")
    estimators = [parse_estimator_id(e) for e in estimators]
    samples = _labeled(corpus)
    records = []
    for est in estimators:
        for size in window_sizes:
            for sid, label, data in samples:
                window = data[:size]
                if not window:
                    continue
                e, med = time_estimator(est, window, repetitions)
                records.append(TimingRecord(est, label, len(window), e.value, med, sid))
    report = BenchReport(records, aggregate(records), environment=environment(repetitions))
    for est in estimators:
        rs = [r for r in records if r.estimator == est]
        report.correlations[f"spearman(window_size,elapsed)[{est}]"] = spearman(
            [r.window_size for r in rs], [r.elapsed_us for r in rs])
    return report


def _window_records(estimators, window_size, samples, repetitions):
    records = []
    for sid, label, data in samples:
        for w in partition(data, window_size):
            for est in estimators:
                e, med = time_estimator(est, w, repetitions)
                records.append(TimingRecord(est, label, len(w), e.value, med,
                                            f"{sid}@{w.offset}"))
    return records


def profile_time_vs_complexity(estimators, window_size, corpus, repetitions=3):
    """(complexity, time) pairs per window; the rank correlation is reported, not judged."""
    estimators = [parse_estimator_id(e) for e in estimators]
    records = _window_records(estimators, window_size, _labeled(corpus), repetitions)
    report = BenchReport(records, aggregate(records), environment=environment(repetitions))
    for est in estimators:
        rs = [r for r in records if r.estimator == est]
        report.correlations[f"spearman(complexity,elapsed)[{est}]"] = spearman(
            [r.complexity for r in rs], [r.elapsed_us for r in rs])
    return report


def throughput_per_type(estimators, window_size, corpus, repetitions=3):
    """Mean throughput per (estimator, type), grouped in two figure families."""
    estimators = [parse_estimator_id(e) for e in estimators]
    samples = _labeled(corpus)
    records = _window_records(estimators, window_size, samples, repetitions)
    report = BenchReport(records, aggregate(records), environment=environment(repetitions))
    labels = list(dict.fromkeys(label for _, label, _ in samples))
    for est in estimators:
        for label in labels:
            tps = [r.throughput for r in records
                   if r.estimator == est and r.type_label == label and r.throughput is not None]
            report.rows.append({"estimator": est, "type_label": label,
                                "mean_throughput_bps": statistics.fmean(tps) if tps else None})
    report.groups = {name: tuple(e for e in family if e in estimators)
                     for name, family in THROUGHPUT_FAMILIES.items()}
    return report


def throughput_vs_window(estimator, data, window_sizes, repetitions=5):
    """Whole-buffer throughput at each window size (median over repetitions).

    One record per (size, repetition): ``elapsed_us`` is the summed
    estimator time over all windows and ``window_size`` the window size, so
    the per-size throughput is ``len(data) / elapsed``.
    """
    est = parse_estimator_id(estimator)
    windows = {size: partition(data, size) for size in window_sizes}
    run_estimator(est, windows[window_sizes[0]][0])  # warm-up
    records = []
    rows = []
    for size in window_sizes:
        tps = []
        for _ in range(repetitions):
            total = 0.0
            values = []
            for w in windows[size]:
                e = run_estimator(est, w)
                total += e.elapsed_us
                values.append(e.value)
            records.append(TimingRecord(est, "-", size, statistics.fmean(values), total))
            tps.append(len(data) / (total * 1e-6))
        rows.append({"window_size": size, "median_throughput_bps": statistics.median(tps)})
    report = BenchReport(records, environment=environment(repetitions), rows=rows)
    report.correlations[f"spearman(window_size,median_throughput)[{est}]"] = spearman(
        [r["window_size"] for r in rows], [r["median_throughput_bps"] for r in rows])
    return report


@dataclass
class CorpusFeatures:
    """Per-sample window-mean features and estimation time for a labeled corpus."""

    ids: list
    labels: list
    lengths: list
    values: dict  # estimator -> array of per-sample mean complexity
    elapsed: dict  # estimator -> array of per-sample summed elapsed us

    def vectors(self, estimators):
        return [classifier.FeatureVector(tuple(estimators),
                                         tuple(float(self.values[e][k]) for e in estimators),
                                         self.lengths[k])
                for k in range(len(self.ids))]


def corpus_features(estimators, corpus, window_size=DEFAULT_WINDOW, fns=None):
    """Estimate every window of every sample once per estimator.

    ``fns`` may map an estimator id to a replacement callable (used to vary
    compression effort).
    """
    samples = _labeled(corpus)
    fns = fns or {}
    values = {e: np.zeros(len(samples)) for e in estimators}
    elapsed = {e: np.zeros(len(samples)) for e in estimators}
    for k, (_, _, data) in enumerate(samples):
        windows = partition(data, window_size)
        for est in estimators:
            call = fns.get(est) or (lambda w, est=est: run_estimator(est, w))
            results = [call(w) for w in windows]
            values[est][k] = statistics.fmean(r.value for r in results)
            elapsed[est][k] = sum(r.elapsed_us for r in results)
    return CorpusFeatures([s[0] for s in samples], [s[1] for s in samples],
                          [len(s[2]) for s in samples], values, elapsed)


def _split_indices(feats, seed, test_fraction):
    entries = Manifest([_Entry(i, lbl) for i, lbl in zip(feats.ids, feats.labels)])
    train, test = split(entries, test_fraction, seed)
    index = {sid: k for k, sid in enumerate(feats.ids)}
    return [index[e.path] for e in train.entries], [index[e.path] for e in test.entries]


@dataclass(frozen=True)
class _Entry:
    path: str
    label: str
    split: Optional[str] = None


def _held_out_accuracy(feats, estimators, train_idx, test_idx, include_length=True):
    vecs = feats.vectors(estimators)
    model = classifier.train([(vecs[k], feats.labels[k]) for k in train_idx],
                             include_length=include_length, estimators=estimators)
    return classifier.evaluate(model, [(vecs[k], feats.labels[k]) for k in test_idx])


def tradeoff_time_vs_accuracy(combinations, corpus, split_seed, test_fraction=0.3,
                              window_size=DEFAULT_WINDOW, feats=None):
    """Train/evaluate one model per estimator combination; pair accuracy with cost.

    A combination uses its estimators side by side as features; its time is
    the total estimation time of those estimators over the whole corpus.
    """
    combinations = [tuple(parse_estimator_id(e) for e in c) for c in combinations]
    if not combinations:
        raise InvalidConfig("no estimator combinations given")
    needed = list(dict.fromkeys(e for c in combinations for e in c))
    feats = feats or corpus_features(needed, corpus, window_size)
    train_idx, test_idx = _split_indices(feats, split_seed, test_fraction)
    report = BenchReport(environment=environment(1, split_seed))
    for combo in combinations:
        ev = _held_out_accuracy(feats, combo, train_idx, test_idx)
        report.rows.append({"combination": "+".join(combo),
                            "total_time_us": float(sum(feats.elapsed[e].sum() for e in combo)),
                            "accuracy": ev.accuracy, "percent_correct": ev.percent_correct})
    return report


EFFORT_LEVELS = {ZIP: tuple(sorted(deflate.EFFORT_CHAIN)), BZ: (0, 1)}


def _effort_fn(estimator, level):
    if estimator == ZIP:
        return lambda w: estimate_zip(w, effort=level)
    return lambda w: estimate_bzip(w, transform=bool(level))


def accuracy_vs_compression(estimator, corpus, effort_levels=None, split_seed=0,
                            test_fraction=0.3, window_size=DEFAULT_WINDOW):
    """Mean compression ratio and held-out accuracy per effort level.

    ZIP effort is the LZ77 match-search depth; BZ effort 0 skips the
    block-sorting transform and 1 applies it.
    """
    est = parse_estimator_id(estimator)
    if est not in EFFORT_LEVELS:
        raise Unsupported(f"estimator {est} has no effort levels")
    levels = tuple(effort_levels) if effort_levels is not None else EFFORT_LEVELS[est]
    bad = [lv for lv in levels if lv not in EFFORT_LEVELS[est]]
    if bad:
        raise InvalidConfig(f"unsupported {est} effort levels {bad}")
    samples = _labeled(corpus)
    report = BenchReport(environment=environment(1, split_seed))
    train_idx = test_idx = None
    for level in levels:
        feats = corpus_features([est], samples, window_size, fns={est: _effort_fn(est, level)})
        if train_idx is None:
            train_idx, test_idx = _split_indices(feats, split_seed, test_fraction)
        ev = _held_out_accuracy(feats, (est,), train_idx, test_idx)
        report.rows.append({"estimator": est, "effort": level,
                            "mean_ratio": float(feats.values[est].mean()),
                            "accuracy": ev.accuracy, "percent_correct": ev.percent_correct})
    return report


def mean_complexity_profile(estimators, corpus, repetitions=1):
    """Per-estimator mean of whole-sample estimates (one window per sample).

    Every entry counts once, so a duplicated sample shifts the means.
    Returns ``(means, report)``; the report holds one record per estimate.
    """
    estimators = [parse_estimator_id(e) for e in estimators]
    samples = _labeled(corpus)
    records = []
    for sid, label, data in samples:
        for est in estimators:
            if repetitions > 1:
                e, med = time_estimator(est, data, repetitions)
            else:
                e = run_estimator(est, data)
                med = e.elapsed_us
            records.append(TimingRecord(est, label, len(data), e.value, med, sid))
    means = {est: statistics.fmean(r.complexity for r in records if r.estimator == est)
             for est in estimators}
    return means, BenchReport(records, aggregate(records), environment=environment(repetitions))


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def figure_data(selector, corpus, estimators=(H, LZ, ZIP, BZ, PSI), window_size=DEFAULT_WINDOW,
                window_sizes=(256, 1024, 4096, 16384), repetitions=3, split_seed=0):
    """CSV text per figure file name for ``selector`` (a figure id or ``all``)."""
    if selector == "all":
        wanted = FIGURES
    elif selector in FIGURES:
        wanted = (selector,)
    else:
        raise InvalidConfig(f"figure selector must be one of {FIGURES + ('all',)}")
    samples = _labeled(corpus)
    estimators = [parse_estimator_id(e) for e in estimators]
    out = {}
    if "fig09" in wanted:
        means, rep = mean_complexity_profile(estimators, samples)
        out["fig09.csv"] = _csv(
            ["estimator", "mean_complexity", "mean_elapsed_us"],
            [[e, f"{means[e]:.6f}",
              f"{statistics.fmean(r.elapsed_us for r in rep.records if r.estimator == e):.3f}"]
             for e in estimators])
    if "fig10" in wanted:
        rep = profile_time_vs_window(estimators, window_sizes, samples, max(3, repetitions))
        rows = []
        for e in estimators:
            for size in window_sizes:
                el = [r.elapsed_us for r in rep.records
                      if r.estimator == e and r.window_size == size]
                if el:
                    rows.append([size, e, f"{statistics.median(el):.3f}"])
        out["fig10.csv"] = _csv(["window_size", "estimator", "median_elapsed_us"], rows)
    if "fig11" in wanted:
        rep = profile_time_vs_complexity(estimators, window_size, samples, repetitions)
        out["fig11.csv"] = _csv(["estimator", "type_label", "complexity", "elapsed_us"],
                                [[r.estimator, r.type_label, f"{r.complexity:.6f}",
                                  f"{r.elapsed_us:.3f}"] for r in rep.records])
    if "fig12" in wanted or "fig13" in wanted:
        if "fig12" in wanted:
            ladder = [c for c in LADDER if all(e in estimators for e in c)]
            rep = tradeoff_time_vs_accuracy(ladder, samples, split_seed, window_size=window_size)
            out["fig12.csv"] = _csv(["combination", "total_time_us", "percent_correct"],
                                    [[r["combination"], f"{r['total_time_us']:.3f}",
                                      f"{r['percent_correct']:.3f}"] for r in rep.rows])
        if "fig13" in wanted:
            rows = []
            for e in (ZIP, BZ):
                if e in estimators:
                    rep = accuracy_vs_compression(e, samples, split_seed=split_seed,
                                                  window_size=window_size)
                    rows += [[r["estimator"], r["effort"], f"{r['mean_ratio']:.6f}",
                              f"{r['percent_correct']:.3f}"] for r in rep.rows]
            out["fig13.csv"] = _csv(["estimator", "effort", "mean_ratio", "percent_correct"], rows)
    for fig in ("fig14", "fig15"):
        if fig in wanted:
            family = [e for e in THROUGHPUT_FAMILIES[fig] if e in estimators]
            rep = throughput_per_type(family, window_size, samples, repetitions)
            out[f"{fig}.csv"] = _csv(
                ["type_label", "estimator", "mean_throughput_bps"],
                [[r["type_label"], r["estimator"],
                  "" if r["mean_throughput_bps"] is None else f"{r['mean_throughput_bps']:.1f}"]
                 for r in rep.rows])
    return out
