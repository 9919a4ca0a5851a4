import json
import subprocess
import sys

import numpy as np
import pytest

from kmap import classifier
from kmap.cli import main
from kmap.corpus import synthetic_manifest, write_corpus_dir, write_manifest


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def zeros(tmp_path):
    p = tmp_path / "zeros.bin"
    p.write_bytes(bytes(4096))
    return p


@pytest.fixture
def rand16k(tmp_path):
    p = tmp_path / "rand.bin"
    p.write_bytes(np.random.default_rng(0).integers(0, 256, 16384, dtype=np.uint8).tobytes())
    return p


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus_dir(synthetic_manifest(4, length=8192, seed=3), root)
    return root


@pytest.fixture(scope="module")
def model_path(corpus_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.json"
    assert main(["train", str(corpus_dir), "--model-out", str(path), "-e", "H,LZ,ZIP"]) == 0
    return path


def test_estimate_zeros(capsys, zeros):
    code, out, err = run(capsys, "estimate", zeros, "-e", "H")
    assert code == 0
    fields = out.strip().split("\t")
    assert fields[:3] == ["H", "0.000000", "0"]


def test_estimate_deterministic(capsys, rand16k):
    a = run(capsys, "estimate", rand16k)[1]
    b = run(capsys, "estimate", rand16k)[1]
    values = lambda out: [line.split("\t")[:3] for line in out.splitlines()]
    assert len(values(a)) == 5 and values(a) == values(b)


def test_estimate_unknown_estimator(capsys, zeros):
    code, out, err = run(capsys, "estimate", zeros, "-e", "OSCR")
    assert code == 3 and out == ""
    assert "H, LZ, ZIP, BZ, PSI" in err


def test_estimate_missing_file(capsys, tmp_path):
    code, out, err = run(capsys, "estimate", tmp_path / "nope")
    assert code == 2 and out == "" and "nope" in err


def test_usage_error(capsys):
    assert run(capsys, "map", "--window", "abc")[0] == 3
    assert run(capsys, "map", "x", "--window", "8")[0] == 3
    assert run(capsys)[0] == 3


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and "kmap 0.1.0" in out and "kmap.lda-model v1" in out


def test_map_rows(capsys, rand16k):
    code, out, _ = run(capsys, "map", rand16k)
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "window_index,offset,length,H,LZ,ZIP,BZ,PSI"
    assert len(lines) == 5


def test_map_json_and_file_output(capsys, rand16k, tmp_path):
    out_path = tmp_path / "m.json"
    code, out, _ = run(capsys, "map", rand16k, "-f", "json", "-o", out_path, "-e", "H")
    assert code == 0 and out == ""
    doc = json.loads(out_path.read_text())
    assert doc["config"]["window_size"] == 4096 and len(doc["records"]) == 4
    assert "elapsed_us" not in json.dumps(doc)


def test_map_stdin():
    data = bytes(8192)
    res = subprocess.run([sys.executable, "-m", "kmap.cli", "map", "-", "-e", "H,ZIP"],
                         input=data, capture_output=True)
    assert res.returncode == 0
    assert len(res.stdout.decode().splitlines()) == 3


def test_dump_config_roundtrip(capsys, tmp_path):
    code, out, _ = run(capsys, "map", "x", "--window", "1024", "--sampling-rate", "0.5",
                       "--filter", "payload_only", "--header-len", "4", "--record-len", "64",
                       "-e", "zip,h", "--output-mode", "single-type", "--jobs", "2",
                       "--dump-config")
    assert code == 0
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(out)
    code, out2, _ = run(capsys, "map", "x", "--config", cfg_path, "--jobs", "2",
                        "--dump-config")
    assert json.loads(out2) == json.loads(out)
    probe = json.loads(out)["probe"]
    assert probe["estimators"] == ["ZIP", "H"] and probe["filter"]["record_len"] == 64


def test_dump_config_defaults(capsys):
    probe = json.loads(run(capsys, "map", "--dump-config")[1])["probe"]
    assert probe == {"filter": {"mode": "none", "header_len": 0, "record_len": 0},
                     "sampling_rate": 1.0, "window_size": 4096,
                     "estimators": ["H", "LZ", "ZIP", "BZ", "PSI"],
                     "output_mode": "per_window_vector"}


def test_map_model_mismatch(capsys, rand16k, model_path):
    assert run(capsys, "map", rand16k, "-m", model_path, "-e", "H")[0] == 4


def test_map_with_model(capsys, rand16k, model_path):
    code, out, _ = run(capsys, "map", rand16k, "-m", model_path)
    assert out.splitlines()[0].endswith(",predicted_type")
    code, out, _ = run(capsys, "map", rand16k, "-m", model_path, "--output-mode", "single-type")
    lines = out.splitlines()
    assert lines[-1].startswith("#file_type=")
    label = lines[-1].split("=", 1)[1]
    assert all(line.endswith("," + label) for line in lines[1:-1])


def test_train_outputs(capsys, corpus_dir, tmp_path):
    path = tmp_path / "m.json"
    code, out, err = run(capsys, "train", corpus_dir, "--model-out", path, "-e", "H,ZIP")
    assert code == 0
    model = classifier.load_model(path)
    assert model.estimators == ("H", "ZIP")
    lines = out.splitlines()
    assert lines[0] == "type\tsamples"
    assert all(line.endswith("\t4") for line in lines[1:6])
    rows = [line.split()[1:] for line in lines[lines.index("squared distances") + 2:]]
    d = np.array(rows, dtype=float)
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)
    assert "at least 10" in err


def test_train_singleton_type(capsys, tmp_path):
    for name, files in (("Txt", 3), ("Exe", 1)):
        (tmp_path / name).mkdir()
        for k in range(files):
            (tmp_path / name / f"{k}").write_bytes(bytes([k + 1]) * 5000)
    code, out, err = run(capsys, "train", tmp_path, "--model-out", tmp_path / "m.json")
    assert code == 5 and "InsufficientSamples" in err


def test_train_missing_corpus(capsys, tmp_path):
    assert run(capsys, "train", tmp_path / "none", "--model-out", tmp_path / "m.json")[0] == 2


def test_classify_and_eval(capsys, corpus_dir, model_path):
    sample = next((corpus_dir / "markov_text").iterdir())
    code, out, _ = run(capsys, "classify", sample, "-m", model_path)
    assert code == 0 and out.strip().endswith("\tmarkov_text")
    code, out, _ = run(capsys, "eval", corpus_dir, "-m", model_path)
    assert code == 0 and out.startswith("accuracy\t")


def test_eval_manifest_test_split(capsys, model_path, tmp_path):
    from kmap.corpus import split
    _, test = split(synthetic_manifest(4, length=8192, seed=3), 0.5, 0)
    path = tmp_path / "test.jsonl"
    write_manifest(test, path)
    code, out, _ = run(capsys, "eval", path, "-m", model_path, "--split", "test")
    assert code == 0
    assert out.splitlines()[1].startswith("percent_correct\t")


def test_merge_suggest_reference(capsys):
    code, out, _ = run(capsys, "merge-suggest", "--reference")
    assert out.splitlines() == ["type_a,type_b,squared_distance", "Audio,Exe,0.0453",
                                "Doc,Txt,0.2660", "Pic,Vid,0.5649"]


def test_bench_selectors(capsys, corpus_dir, tmp_path):
    assert run(capsys, "bench", "fig99", corpus_dir)[0] == 3
    assert run(capsys, "bench", "fig10", tmp_path / "missing")[0] == 2
    code, out, _ = run(capsys, "bench", "fig10", corpus_dir, "--window-sizes", "256,512",
                       "-e", "H")
    assert code == 0
    assert out.splitlines()[0] == "window_size,estimator,median_elapsed_us"


def test_bench_all_writes_seven_files(capsys, tmp_path):
    root = tmp_path / "c"
    write_corpus_dir(synthetic_manifest(3, length=4096, seed=1), root)
    out_dir = tmp_path / "figs"
    code, out, _ = run(capsys, "bench", "all", root, "--out-dir", out_dir,
                       "--window-sizes", "256,1024", "-w", "1024")
    assert code == 0 and out == ""
    assert sorted(p.name for p in out_dir.iterdir()) == [f"fig{n:02d}.csv" for n in range(9, 16)]


def test_synth_manifest_only(capsys, tmp_path):
    code, _, _ = run(capsys, "synth", tmp_path, "--per-kind", "2", "--length", "100",
                     "--manifest-only")
    assert code == 0
    lines = (tmp_path / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 1 + 2 * 5
