import json
import statistics

import pytest

from kmap import bench
from kmap.corpus import SyntheticSpec, generate_synthetic, synthetic_manifest
from kmap.errors import EmptyInput, InvalidConfig, Unsupported

from oracles import spearman as spearman_oracle


@pytest.fixture(scope="module")
def small_corpus():
    return bench._labeled(synthetic_manifest(3, length=8192, seed=2))


def test_time_vs_window_grows(small_corpus):
    rep = bench.profile_time_vs_window(["ZIP", "H"], [256, 4096], small_corpus[:2], 3)
    for est in ("ZIP",):
        for sid in {r.sample_id for r in rep.records}:
            t = {r.window_size: r.elapsed_us for r in rep.records
                 if r.estimator == est and r.sample_id == sid}
            assert t[4096] > t[256]
    assert set(rep.correlations) == {"spearman(window_size,elapsed)[ZIP]",
                                     "spearman(window_size,elapsed)[H]"}


def test_time_vs_window_preconditions(small_corpus):
    with pytest.raises(InvalidConfig):
        bench.profile_time_vs_window(["H"], [256, 4096], small_corpus, 1)
    with pytest.raises(InvalidConfig):
        bench.profile_time_vs_window(["H"], [256], small_corpus, 3)
    with pytest.raises(EmptyInput):
        bench.profile_time_vs_window(["H"], [256, 512], [], 3)


def test_aggregates_recompute_exactly(small_corpus):
    rep = bench.profile_time_vs_window(["H", "PSI"], [512, 1024], small_corpus, 3)
    cells = {}
    for r in rep.records:
        cells.setdefault((r.estimator, r.type_label, r.window_size), []).append(r.elapsed_us)
    assert set(cells) == set(rep.aggregates)
    for key, vals in cells.items():
        agg = rep.aggregates[key]
        assert agg["mean"] == statistics.fmean(vals)
        assert agg["median"] == statistics.median(vals)
        assert agg["stddev"] == statistics.pstdev(vals)


def test_time_vs_complexity_spearman_matches_oracle(small_corpus):
    ests = ["H", "LZ", "ZIP"]
    rep = bench.profile_time_vs_complexity(ests, 4096, small_corpus, 3)
    assert len(rep.correlations) == len(ests)
    for est in ests:
        rs = [r for r in rep.records if r.estimator == est]
        rho = rep.correlations[f"spearman(complexity,elapsed)[{est}]"]
        expected = spearman_oracle([r.complexity for r in rs], [r.elapsed_us for r in rs])
        assert rho == pytest.approx(expected, abs=1e-9)


def test_constant_complexity_gives_no_rho():
    corpus = [("z", bytes(4096)), ("z", bytes(4096))]
    rep = bench.profile_time_vs_complexity(["H"], 1024, corpus, 3)
    assert rep.correlations["spearman(complexity,elapsed)[H]"] is None


def test_throughput_per_type_grid(small_corpus):
    rep = bench.throughput_per_type(["ZIP", "H", "PSI", "LZ", "BZ"], 4096, small_corpus, 3)
    labels = {lbl for _, lbl, _ in small_corpus}
    cells = {(r["estimator"], r["type_label"]) for r in rep.rows}
    assert len(rep.rows) == len(cells) == 5 * len(labels)
    assert rep.groups == {"fig14": ("ZIP", "H"), "fig15": ("PSI", "LZ", "BZ")}
    for r in rep.records:
        assert r.throughput == r.window_size / (r.elapsed_us * 1e-6)
    tp = {(r["estimator"], r["type_label"]): r["mean_throughput_bps"] for r in rep.rows}
    for lbl in labels:
        # single pass versus block sorting: measured margin was 75x to 130x
        assert tp[("H", lbl)] > tp[("BZ", lbl)]


def test_tradeoff_ladder(small_corpus):
    rep = bench.tradeoff_time_vs_accuracy(bench.LADDER, small_corpus, split_seed=1,
                                          test_fraction=0.34)
    assert len(rep.rows) == 5
    rows = {r["combination"]: r for r in rep.rows}
    assert rows["LZ+H+ZIP"]["total_time_us"] >= rows["ZIP"]["total_time_us"]
    assert all(0 <= r["accuracy"] <= 1 for r in rep.rows)


def test_accuracy_vs_compression(small_corpus):
    rep = bench.accuracy_vs_compression("ZIP", small_corpus, effort_levels=(0, 9),
                                        split_seed=1, test_fraction=0.34)
    assert len(rep.rows) == 2
    assert rep.rows[1]["mean_ratio"] <= rep.rows[0]["mean_ratio"]
    rep = bench.accuracy_vs_compression("BZ", small_corpus, split_seed=1, test_fraction=0.34)
    assert [r["effort"] for r in rep.rows] == [0, 1]
    with pytest.raises(Unsupported):
        bench.accuracy_vs_compression("H", small_corpus)


def test_mean_profile(small_corpus):
    means, _ = bench.mean_complexity_profile(["ZIP", "H"], small_corpus)
    assert means["ZIP"] < means["H"]
    one = [("x", generate_synthetic(SyntheticSpec("markov_text", 2048, 1)))]
    means1, rep1 = bench.mean_complexity_profile(["ZIP", "H"], one)
    assert means1 == {r.estimator: r.complexity for r in rep1.records}


def test_mean_profile_duplicates_shift_means():
    a = ("a", bytes(2048))
    b = ("b", generate_synthetic(SyntheticSpec("random_bytes", 2048, 1)))
    base, _ = bench.mean_complexity_profile(["H"], [a, b])
    dup, _ = bench.mean_complexity_profile(["H"], [a, b, b])
    assert dup["H"] > base["H"]


def test_report_serialization(small_corpus):
    rep = bench.profile_time_vs_window(["H"], [256, 512], small_corpus[:1], 3)
    doc = json.loads(rep.to_json())
    assert len(doc["records"]) == len(rep.records)
    assert rep.records_csv().splitlines()[0].startswith("estimator,type_label,window_size")
    assert len(rep.aggregates_csv().splitlines()) == 1 + len(rep.aggregates)


def test_figure_selector():
    with pytest.raises(InvalidConfig):
        bench.figure_data("fig16", [("a", b"x")])


def test_fig10_schema(small_corpus):
    out = bench.figure_data("fig10", small_corpus[:2], estimators=("H",),
                            window_sizes=(256, 1024))
    assert list(out) == ["fig10.csv"]
    assert out["fig10.csv"].splitlines()[0] == "window_size,estimator,median_elapsed_us"
