import json
import subprocess
import sys

import numpy as np
import pytest

from pdstl.cli import main
from pdstl.waveform_io import Waveform, read_waveforms_csv, write_waveforms_csv

SMALL = ["--n-samples", "1000", "--windows", "5,20,100"]


def run(*argv):
    return main([str(a) for a in argv])


def synth(tmp_path, name="c.csv", pd=6, nonpd=12, *extra):
    out = tmp_path / name
    assert run("synth", "--pd", pd, "--nonpd", nonpd, "--n-samples", 1000, "--out", out, *extra) == 0
    return out


def read_csv_columns(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


# -------------------------------------------------------------------- synth


def test_synth_empty_corpus(tmp_path, capsys):
    assert run("synth", "--pd", 0, "--nonpd", 0, "--out", tmp_path / "x.csv") == 2
    assert "empty corpus requested" in capsys.readouterr().err


@pytest.mark.parametrize("fmt", ["csv", "pdwf"])
def test_synth_is_byte_identical_across_runs(tmp_path, fmt):
    a = synth(tmp_path, "a", 5, 5, "--format", fmt, "--seed", 7)
    b = synth(tmp_path, "b", 5, 5, "--format", fmt, "--seed", 7)
    if fmt == "csv":
        assert a.read_bytes() == b.read_bytes()
    else:
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        assert all((a / n).read_bytes() == (b / n).read_bytes() for n in names)


def test_synth_manifest_counts(tmp_path):
    out = synth(tmp_path, "c.csv", 20, 80)
    manifest = json.loads((tmp_path / "c.csv.manifest.json").read_text())
    assert manifest["labeled_pd"] == 20 and manifest["labeled_nonpd"] == 80
    assert sum(wf.label for wf in read_waveforms_csv(out)) == 20


# ---------------------------------------------------------------- decompose


def test_decompose_additivity_per_row(tmp_path):
    corpus = synth(tmp_path)
    out = tmp_path / "d.csv"
    assert run("decompose", "--input", corpus, "--window", 50, "--out", out) == 0
    cols = read_csv_columns(out)
    assert out.read_text().splitlines()[0] == "t,y,trend,seasonal,residual"
    assert np.array_equal(cols[:, 2] + cols[:, 3] + cols[:, 4], cols[:, 1])


def test_decompose_constant_waveform(tmp_path):
    write_waveforms_csv([Waveform("k", np.full(200, 4.0))], tmp_path / "k.csv")
    assert run("decompose", "--input", tmp_path / "k.csv", "--window", 20,
               "--out", tmp_path / "d.csv") == 0
    assert np.max(np.abs(read_csv_columns(tmp_path / "d.csv")[:, 3])) < 1e-8


def test_decompose_sinusoid_at_window_period(tmp_path):
    k = np.arange(1000)
    write_waveforms_csv([Waveform("s", np.sin(2 * np.pi * k / 50))], tmp_path / "s.csv")
    assert run("decompose", "--input", tmp_path / "s.csv", "--window", 50,
               "--out", tmp_path / "d.csv") == 0
    cols = read_csv_columns(tmp_path / "d.csv")
    assert np.sqrt(np.mean(cols[:, 4] ** 2)) < 0.01 * np.sqrt(np.mean(cols[:, 1] ** 2))


def test_decompose_rejects_short_waveform(tmp_path, capsys):
    corpus = synth(tmp_path)
    assert run("decompose", "--input", corpus, "--window", 600, "--out", tmp_path / "d.csv") == 2
    assert "needs at least 1200" in capsys.readouterr().err


# ------------------------------------------------------------ extract/train


def test_extract_with_workers_matches_single_worker(tmp_path):
    corpus = synth(tmp_path)
    assert run("extract", "--input", corpus, "--windows", "5,20,100", "--out", tmp_path / "a.csv") == 0
    assert run("extract", "--input", corpus, "--windows", "5,20,100", "--workers", 3,
               "--out", tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_train_predict_evaluate_round(tmp_path, capsys):
    corpus = synth(tmp_path, "c.csv", 10, 20)
    model = tmp_path / "m.json"
    assert run("train", "--input", corpus, "--windows", "5,20,100", "--kernel", "linear",
               "--model-out", model) == 0
    report = json.loads((tmp_path / "m.report.json").read_text())
    assert report["train_accuracy"] == 1.0
    assert report["n_train"] + report["n_test"] == 30

    preds = tmp_path / "p.csv"
    assert run("predict", "--model", model, "--input", corpus, "--out", preds) == 0
    rows = preds.read_text().splitlines()
    assert rows[0] == "id,decision_value,predicted_label"
    labels = {wf.id: wf.label for wf in read_waveforms_csv(corpus)}
    assert all((r.split(",")[2] == "1") == labels[r.split(",")[0]] for r in rows[1:])

    capsys.readouterr()
    assert run("evaluate", "--predictions", preds, "--labels", corpus,
               "--report", tmp_path / "r.json") == 0
    assert "Average" in capsys.readouterr().out
    assert json.loads((tmp_path / "r.json").read_text())["macro"]["f1"] == 1.0


def test_train_twice_gives_identical_model_bytes(tmp_path):
    corpus = synth(tmp_path)
    for name in ("a.json", "b.json"):
        assert run("train", "--input", corpus, "--windows", "5,20,100",
                   "--model-out", tmp_path / name) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_train_from_feature_csv_matches_waveform_input(tmp_path):
    corpus = synth(tmp_path)
    assert run("extract", "--input", corpus, "--windows", "5,20,100", "--out", tmp_path / "f.csv") == 0
    assert run("train", "--input", tmp_path / "f.csv", "--windows", "5,20,100",
               "--model-out", tmp_path / "a.json") == 0
    assert run("train", "--input", corpus, "--windows", "5,20,100",
               "--model-out", tmp_path / "b.json") == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_train_rejects_zero_gamma(tmp_path, capsys):
    corpus = synth(tmp_path)
    assert run("train", "--input", corpus, "--windows", "5,20,100", "--kernel", "rbf",
               "--gamma", 0, "--model-out", tmp_path / "m.json") == 2
    assert "gamma must be positive" in capsys.readouterr().err


def test_train_rejects_single_class(tmp_path, capsys):
    corpus = synth(tmp_path, "c.csv", 0, 8)
    assert run("train", "--input", corpus, "--windows", "5,20,100",
               "--model-out", tmp_path / "m.json") == 2
    assert "PD" in capsys.readouterr().err


def test_train_non_convergence_exit_code(tmp_path):
    corpus = synth(tmp_path, "c.csv", 10, 10, "--burst-amplitude", 0.5)
    code = run("train", "--input", corpus, "--windows", "5,20,100", "--kernel", "rbf",
               "--gamma", 500, "--c", 1e6, "--max-passes", 1, "--model-out", tmp_path / "m.json")
    assert code == 3


# ------------------------------------------------------------ predict edges


def trained_model(tmp_path):
    corpus = synth(tmp_path)
    model = tmp_path / "m.json"
    assert run("train", "--input", corpus, "--windows", "5,20,100", "--model-out", model) == 0
    return model


def test_predict_on_empty_file(tmp_path):
    model = trained_model(tmp_path)
    (tmp_path / "empty.csv").write_bytes(b"")
    assert run("predict", "--model", model, "--input", tmp_path / "empty.csv",
               "--out", tmp_path / "p.csv") == 0
    assert (tmp_path / "p.csv").read_text() == "id,decision_value,predicted_label\n"


def test_predict_accepts_unlabelled_waveforms(tmp_path):
    model = trained_model(tmp_path)
    rng = np.random.default_rng(0)
    write_waveforms_csv([Waveform(f"u{i}", rng.normal(size=1000)) for i in range(3)],
                        tmp_path / "u.csv")
    assert "\nu0,0,-," in (tmp_path / "u.csv").read_text().replace("\r", "")
    assert run("predict", "--model", model, "--input", tmp_path / "u.csv",
               "--out", tmp_path / "p.csv") == 0
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 4


def test_predict_feature_length_mismatch(tmp_path, capsys):
    model = trained_model(tmp_path)
    d = json.loads(model.read_text())
    d["features"]["window_lengths"] = [5, 20]
    model.write_text(json.dumps(d))
    assert run("predict", "--model", model, "--input", tmp_path / "c.csv",
               "--out", tmp_path / "p.csv") == 2
    assert "features" in capsys.readouterr().err


# ----------------------------------------------------------------- evaluate


def write_preds(path, rows):
    path.write_text("id,decision_value,predicted_label\n"
                    + "".join(f"{i},{v},{int(v > 0)}\n" for i, v in rows))


def test_evaluate_perfect_predictions(tmp_path, capsys):
    (tmp_path / "l.csv").write_text("id,label\na,1\nb,0\n")
    write_preds(tmp_path / "p.csv", [("a", 1.5), ("b", -2.0)])
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--labels", tmp_path / "l.csv") == 0
    out = capsys.readouterr().out
    assert out.splitlines()[3].split()[-3:] == ["1.00", "1.00", "1.00"]


def test_evaluate_table_one_shaped_counts(tmp_path):
    # 100 per class: non-PD recall 0.58, PD recall 0.83
    labels = ["1"] * 100 + ["0"] * 100
    preds = [1.0] * 83 + [-1.0] * 17 + [-1.0] * 58 + [1.0] * 42
    (tmp_path / "l.csv").write_text("id,label\n" + "".join(f"x{i},{l}\n" for i, l in enumerate(labels)))
    write_preds(tmp_path / "p.csv", [(f"x{i}", v) for i, v in enumerate(preds)])
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--labels", tmp_path / "l.csv",
               "--report", tmp_path / "r.json") == 0
    r = json.loads((tmp_path / "r.json").read_text())
    for k in ("precision", "recall", "f1"):
        assert r["macro"][k] == pytest.approx((r["per_class"]["PD"][k] + r["per_class"]["non-PD"][k]) / 2)
    assert r["per_class"]["non-PD"]["recall"] == 0.58


def test_evaluate_disjoint_ids(tmp_path, capsys):
    (tmp_path / "l.csv").write_text("id,label\na,1\nb,0\n")
    write_preds(tmp_path / "p.csv", [("c", 1.0)])
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--labels", tmp_path / "l.csv") == 2
    err = capsys.readouterr().err
    assert "no label for c" in err and "no prediction for a,b" in err


def test_malformed_predictions_file(tmp_path):
    (tmp_path / "l.csv").write_text("id,label\na,1\n")
    (tmp_path / "p.csv").write_text("nonsense\n")
    assert run("evaluate", "--predictions", tmp_path / "p.csv", "--labels", tmp_path / "l.csv") == 1


# ------------------------------------------------------------ config/pipeline


def test_config_file_values_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pd": 3, "nonpd": 4, "n_samples": 500, "seed": 11}))
    assert run("--config", cfg, "synth", "--out", tmp_path / "a.csv") == 0
    assert len(read_waveforms_csv(tmp_path / "a.csv")) == 7
    assert run("--config", cfg, "synth", "--pd", 1, "--out", tmp_path / "b.csv") == 0
    wfs = read_waveforms_csv(tmp_path / "b.csv")
    assert len(wfs) == 5 and wfs[0].samples.size == 500


def test_missing_input_is_io_error(tmp_path):
    assert run("extract", "--input", tmp_path / "nope.csv", "--out", tmp_path / "f.csv") == 1


def test_pipeline_small_run(tmp_path):
    work = tmp_path / "run"
    assert run("pipeline", "--pd", 8, "--nonpd", 16, *SMALL, "--workdir", work) == 0
    for name in ("corpus.csv", "model.json", "train_report.json", "heldout.csv",
                 "predictions.csv", "report.json"):
        assert (work / name).exists()
    report = json.loads((work / "report.json").read_text())
    assert report["confusion"]["tp"] + report["confusion"]["fn"] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pdstl", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "decompose", "extract", "train", "predict", "evaluate", "pipeline"):
        assert cmd in res.stdout
