"""kmap command line.

Exit codes: 0 ok, 2 I/O or corpus error, 3 usage, 4 model mismatch,
5 training failure. Data goes to stdout, diagnostics to stderr.
"""

import argparse
import json
import os
import sys
import warnings


from . import __version__, bench, classifier
from .corpus import (SYNTHETIC_KINDS, read_manifest, scan_corpus, synthetic_manifest,
                     write_corpus_dir, write_manifest)
from .errors import (DegenerateFeatures, EmptyInput, InsufficientSamples, InvalidConfig,
                     KmapError, ModelMismatch, UnknownEstimator, UnknownType, Unsupported)
from .estimators import BUILTIN_ESTIMATORS, ByteWindow, parse_estimator_id, run_estimator
from .probe import (FILTER_MODES, MAP_FORMAT, MAP_VERSION, FilterSpec, Probe, ProbeConfig,
                    sample_features)

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_MISMATCH, EXIT_TRAIN = 0, 2, 3, 4, 5
READ_CHUNK = 1 << 16
OUTPUT_MODE_FLAGS = {"per-window": "per_window_vector", "single-type": "single_type",
                     "per_window_vector": "per_window_vector", "single_type": "single_type"}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


def _estimator_list(text):
    return tuple(parse_estimator_id(e) for e in text.split(",") if e.strip())


def _add_probe_flags(p):
    g = p.add_argument_group("probe")
    g.add_argument("--config", help="JSON config (from --dump-config) to start from")
    g.add_argument("-w", "--window", type=int, help="window size in bytes (default 4096)")
    g.add_argument("--sampling-rate", type=float, help="fraction of each 4096-byte block kept")
    g.add_argument("--filter", choices=FILTER_MODES, help="record filter mode (default none)")
    g.add_argument("--header-len", type=int, help="header bytes per record")
    g.add_argument("--record-len", type=int, help="record size in bytes")
    g.add_argument("-e", "--estimators", help="comma-separated ids (default H,LZ,ZIP,BZ,PSI)")
    g.add_argument("--output-mode", choices=sorted(OUTPUT_MODE_FLAGS),
                   help="per-window (default) or single-type")
    g.add_argument("--jobs", type=int, help="estimation workers (default: CPU count)")
    g.add_argument("--dump-config", action="store_true",
                   help="print the effective configuration as JSON and exit")


def _add_io_flags(p, fmt=True):
    p.add_argument("-o", "--output", default="-", help="output path (default stdout)")
    if fmt:
        p.add_argument("-f", "--format", choices=("csv", "json"), help="output format (default csv)")


def build_parser():
    p = _Parser(prog="kmap", description="Windowed complexity maps and LDA type classification.")
    p.add_argument("--version", action="store_true", help="print versions and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("estimate", help="whole-input estimate per estimator")
    s.add_argument("input", help="input file or - for stdin")
    s.add_argument("-e", "--estimators", default=",".join(BUILTIN_ESTIMATORS))

    s = sub.add_parser("map", help="per-window complexity map")
    s.add_argument("input", nargs="?", default="-", help="input file or - for stdin")
    s.add_argument("-m", "--model", help="model file; adds predicted types")
    s.add_argument("--include-timing", action="store_true",
                   help="add elapsed columns/fields (not reproducible)")
    _add_probe_flags(s)
    _add_io_flags(s)

    s = sub.add_parser("train", help="train a discriminant model from a corpus")
    s.add_argument("corpus", help="directory with one subdirectory per type, or manifest .jsonl")
    s.add_argument("--model-out", required=True)
    s.add_argument("--no-length", action="store_true", help="drop the sample-length feature")
    s.add_argument("--split", choices=("all", "train"), default="all",
                   help="use every entry or only manifest entries tagged train")
    _add_probe_flags(s)

    s = sub.add_parser("classify", help="one type per input file")
    s.add_argument("inputs", nargs="+")
    s.add_argument("-m", "--model", required=True)
    _add_probe_flags(s)

    s = sub.add_parser("eval", help="accuracy and confusion matrix on a labeled corpus")
    s.add_argument("corpus")
    s.add_argument("-m", "--model", required=True)
    s.add_argument("--split", choices=("all", "test"), default="all")
    _add_probe_flags(s)

    s = sub.add_parser("merge-suggest", help="type pairs too close to separate")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("-m", "--model")
    src.add_argument("--reference", action="store_true", help="use the shipped six-type table")
    s.add_argument("--threshold", type=float, default=classifier.DEFAULT_MERGE_THRESHOLD)

    s = sub.add_parser("bench", help="figure datasets fig09..fig15")
    s.add_argument("selector", help="fig09..fig15 or all")
    s.add_argument("corpus")
    s.add_argument("--out-dir", help="write figNN.csv files here instead of stdout")
    s.add_argument("-w", "--window", type=int, default=4096)
    s.add_argument("--window-sizes", default="256,1024,4096,16384")
    s.add_argument("-e", "--estimators", default=",".join(BUILTIN_ESTIMATORS))
    s.add_argument("--repetitions", type=int, default=3)
    s.add_argument("--seed", type=int, default=0, help="train/test split seed")
    s.add_argument("--jobs", type=int, help="ignored: timing runs are single-threaded")

    s = sub.add_parser("synth", help="write a seeded synthetic corpus")
    s.add_argument("out_dir")
    s.add_argument("--per-kind", type=int, default=20)
    s.add_argument("--length", type=int, default=65536)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kinds", default=",".join(SYNTHETIC_KINDS))
    s.add_argument("--manifest-only", action="store_true",
                   help="write manifest.jsonl with synthetic ids instead of sample files")
    return p


def probe_config(args):
    base = {}
    if args.config:
        doc = _read_json(args.config)
        base = doc.get("probe", doc)
    cfg = ProbeConfig.from_dict(base) if base else ProbeConfig()
    flt = cfg.filter
    if args.filter is not None or args.header_len is not None or args.record_len is not None:
        flt = FilterSpec(args.filter if args.filter is not None else flt.mode,
                         args.header_len if args.header_len is not None else flt.header_len,
                         args.record_len if args.record_len is not None else flt.record_len)
    return ProbeConfig(
        filter=flt,
        sampling_rate=args.sampling_rate if args.sampling_rate is not None else cfg.sampling_rate,
        window_size=args.window if args.window is not None else cfg.window_size,
        estimators=_estimator_list(args.estimators) if args.estimators else cfg.estimators,
        output_mode=(OUTPUT_MODE_FLAGS[args.output_mode] if args.output_mode
                     else cfg.output_mode))


def _dump(args, cfg):
    doc = {"probe": cfg.to_dict(), "jobs": args.jobs}
    for key in ("format", "output", "model"):
        if hasattr(args, key):
            doc[key] = getattr(args, key)
    sys.stdout.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_USAGE, f"{path} is not valid JSON: {exc}") from exc


def _chunks(path):
    if path == "-":
        stream = sys.stdin.buffer
        while chunk := stream.read(READ_CHUNK):
            yield chunk
        return
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        while chunk := fh.read(READ_CHUNK):
            yield chunk


def _read_all(path):
    return b"".join(_chunks(path))


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_model(path):
    try:
        return classifier.load_model(path)
    except ModelMismatch:
        raise
    except KmapError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc


def _load_corpus(path, extra_types=()):
    if not os.path.exists(path):
        raise CliError(EXIT_IO, f"corpus not found: {path}")
    try:
        if os.path.isdir(path):
            return scan_corpus(path, extra_types=tuple(extra_types))
        return read_manifest(path)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(EXIT_IO, f"cannot load corpus {path}: {exc}") from exc


def _samples(manifest):
    try:
        return manifest.samples()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read corpus entry: {exc}") from exc


def _jobs(args):
    return args.jobs if args.jobs else (os.cpu_count() or 1)


def cmd_estimate(args):
    ids = _estimator_list(args.estimators)
    data = _read_all(args.input)
    if not data:
        raise CliError(EXIT_IO, "input is empty")
    window = ByteWindow(0, data)
    for est in ids:
        e = run_estimator(est, window)
        print(f"{e.estimator}\t{e.value:.6f}\t{e.raw_output_bits}\t{e.elapsed_us:.1f}")
    return EXIT_OK


def cmd_map(args):
    cfg = probe_config(args)
    if args.dump_config:
        return _dump(args, cfg)
    model = _load_model(args.model) if args.model else None
    source = "-" if args.input == "-" else os.path.basename(args.input)
    probe = Probe(cfg, model=model, source_id=source, jobs=_jobs(args))
    for chunk in _chunks(args.input):
        probe.feed(chunk)
    cmap = probe.finish()
    fmt = args.format or ("json" if args.output.endswith(".json") else "csv")
    text = (cmap.to_json(args.include_timing) if fmt == "json"
            else cmap.to_csv(include_elapsed=args.include_timing))
    _write(args.output, text)
    return EXIT_OK


def _features(samples, cfg, jobs):
    return [(sample_features(data, cfg, jobs=jobs), entry.label) for entry, data in samples]


def _format_matrix(matrix):
    width = max(8, max(len(g) for g in matrix.groups) + 1)
    lines = [" " * width + "".join(f"{g:>{width}}" for g in matrix.groups)]
    for g, row in zip(matrix.groups, matrix.d2):
        lines.append(f"{g:<{width}}" + "".join(f"{v:>{width}.4f}" for v in row))
    return "\n".join(lines)


def cmd_train(args):
    cfg = probe_config(args)
    if args.dump_config:
        return _dump(args, cfg)
    manifest = _load_corpus(args.corpus)
    if args.split == "train":
        manifest.entries = [e for e in manifest.entries if e.split == "train"]
    samples = _samples(manifest)
    try:
        feats = _features(samples, cfg, _jobs(args))
        model = classifier.train(feats, include_length=not args.no_length,
                                 estimators=cfg.estimators)
    except (InsufficientSamples, DegenerateFeatures, EmptyInput) as exc:
        raise CliError(EXIT_TRAIN, f"training failed: {type(exc).__name__}: {exc}") from exc
    try:
        classifier.save_model(model, args.model_out)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.model_out}: {exc.strerror or exc}") from exc
    counts = {g: 0 for g in model.groups}
    for _, label in feats:
        counts[label] += 1
    print("type\tsamples")
    for g, n in counts.items():
        print(f"{g}\t{n}")
    if model.ridge:
        print(f"ridge {model.ridge:g} applied to the pooled covariance", file=sys.stderr)
    print()
    print("squared distances")
    print(_format_matrix(classifier.squared_distance_matrix(model)))
    return EXIT_OK


def cmd_classify(args):
    cfg = probe_config(args)
    if args.dump_config:
        return _dump(args, cfg)
    model = _load_model(args.model)
    cfg = ProbeConfig(cfg.filter, cfg.sampling_rate, cfg.window_size, cfg.estimators, "single_type")
    for path in args.inputs:
        probe = Probe(cfg, model=model, source_id=path, jobs=_jobs(args))
        for chunk in _chunks(path):
            probe.feed(chunk)
        print(f"{path}\t{probe.finish().file_type}")
    return EXIT_OK


def cmd_eval(args):
    cfg = probe_config(args)
    if args.dump_config:
        return _dump(args, cfg)
    model = _load_model(args.model)
    manifest = _load_corpus(args.corpus, extra_types=model.groups)
    if args.split == "test":
        manifest.entries = [e for e in manifest.entries if e.split == "test"]
    feats = _features(_samples(manifest), cfg, _jobs(args))
    try:
        ev = classifier.evaluate(model, feats)
    except EmptyInput as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    print(f"accuracy\t{ev.accuracy:.6f}")
    print(f"percent_correct\t{ev.percent_correct:.2f}")
    print()
    print("actual\\predicted\t" + "\t".join(ev.labels))
    for lbl, row in zip(ev.labels, ev.confusion):
        print(lbl + "\t" + "\t".join(str(int(v)) for v in row))
    return EXIT_OK


def cmd_merge_suggest(args):
    if args.reference:
        matrix = classifier.reference_distances()
    else:
        matrix = classifier.squared_distance_matrix(_load_model(args.model))
    try:
        pairs = classifier.suggest_merges(matrix, args.threshold)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from exc
    print("type_a,type_b,squared_distance")
    for a, b, d in pairs:
        print(f"{a},{b},{d:.4f}")
    return EXIT_OK


def cmd_bench(args):
    if args.selector != "all" and args.selector not in bench.FIGURES:
        raise CliError(EXIT_USAGE, f"invalid selector {args.selector!r}; choose one of "
                                   f"{', '.join(bench.FIGURES)} or all")
    try:
        sizes = tuple(int(s) for s in args.window_sizes.split(","))
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"bad --window-sizes: {exc}") from exc
    estimators = _estimator_list(args.estimators)
    if args.jobs not in (None, 1):
        print("bench runs single-threaded; --jobs ignored", file=sys.stderr)
    manifest = _load_corpus(args.corpus)
    samples = _samples(manifest)
    figures = bench.figure_data(args.selector, samples, estimators=estimators,
                                window_size=args.window, window_sizes=sizes,
                                repetitions=args.repetitions, split_seed=args.seed)
    if args.out_dir:
        try:
            os.makedirs(args.out_dir, exist_ok=True)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot create {args.out_dir}: {exc.strerror}") from exc
        for name, text in figures.items():
            _write(os.path.join(args.out_dir, name), text)
            print(f"wrote {os.path.join(args.out_dir, name)}", file=sys.stderr)
    elif len(figures) == 1:
        sys.stdout.write(next(iter(figures.values())))
    else:
        for name, text in figures.items():
            sys.stdout.write(f"# {name}\n{text}")
    return EXIT_OK


def cmd_synth(args):
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    bad = [k for k in kinds if k not in SYNTHETIC_KINDS]
    if bad:
        raise CliError(EXIT_USAGE, f"unknown synthetic kinds {bad}; known: {SYNTHETIC_KINDS}")
    if args.per_kind < 1 or args.length < 1:
        raise CliError(EXIT_USAGE, "--per-kind and --length must be positive")
    manifest = synthetic_manifest(args.per_kind, args.length, args.seed, kinds)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
        if args.manifest_only:
            write_manifest(manifest, os.path.join(args.out_dir, "manifest.jsonl"))
        else:
            write_corpus_dir(manifest, args.out_dir)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write corpus: {exc.strerror or exc}") from exc
    print(f"{len(manifest.entries)} samples written to {args.out_dir}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate, "map": cmd_map, "train": cmd_train, "classify": cmd_classify,
    "eval": cmd_eval, "merge-suggest": cmd_merge_suggest, "bench": cmd_bench, "synth": cmd_synth,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(f"kmap {__version__} (model format {classifier.MODEL_FORMAT} "
                  f"v{classifier.MODEL_VERSION}, map format {MAP_FORMAT} v{MAP_VERSION})")
            return EXIT_OK
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"kmap: {exc}", file=sys.stderr)
        return exc.code
    except UnknownEstimator as exc:
        print(f"kmap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelMismatch as exc:
        print(f"kmap: model mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (InvalidConfig, Unsupported, UnknownType) as exc:
        print(f"kmap: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyInput as exc:
        print(f"kmap: {exc}", file=sys.stderr)
        return EXIT_IO
    except BrokenPipeError:
        return EXIT_OK


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"kmap: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
