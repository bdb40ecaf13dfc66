"""End-to-end flow: corpus I/O, feature extraction, split, scale, balance, train, score."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .evaluation import evaluate
from .features import (DEFAULT_WINDOWS, FeatureVector, apply_scaler, check_windows,
                       extract_features, fit_scaler, read_features_csv,
                       scale_values)
from .sampler import oversample_duplicate
from .stl import StlTemplate
from .svm import KernelSpec, TrainConfig, predict, train
from .waveform_io import (SynthParams, is_pdwf, read_waveform_binary, read_waveforms_csv,
                          synth_waveform, write_waveform_binary, write_waveforms_csv)


def scale_windows(windows, factor):
    """Shrink window lengths proportionally, never below 2."""
    return [max(2, int(round(w * factor))) for w in windows]


@dataclass
class PipelineConfig:
    window_lengths: tuple = DEFAULT_WINDOWS
    stl: StlTemplate = field(default_factory=StlTemplate)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    split_fraction: float = 0.8
    split_seed: int = 0
    oversample_seed: int = 0
    oversample_test: bool = False
    workers: int = 1

    def __post_init__(self):
        self.window_lengths = tuple(check_windows(self.window_lengths))
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split fraction must lie in (0, 1)")


# ------------------------------------------------------------------ corpora


def synth_corpus(count_pd, count_nonpd, base=None, seed=0, n_bursts=5):
    """Labelled synthetic corpus; PD records first, each with its own derived seed."""
    if count_pd + count_nonpd <= 0:
        raise ConfigError("empty corpus requested")
    base = base or SynthParams()
    corpus = []
    for i in range(count_pd + count_nonpd):
        sub_seed = int(np.random.SeedSequence([seed, i]).generate_state(1, np.uint64)[0])
        params = replace(base, seed=sub_seed, n_bursts=n_bursts if i < count_pd else 0)
        corpus.append(synth_waveform(params, id=f"w{i:05d}", phase=i % 3))
    return corpus


def save_corpus(waveforms, path, fmt="csv"):
    """Write a corpus as one CSV file or as a directory of ``.pdwf`` files."""
    path = Path(path)
    if fmt == "csv":
        write_waveforms_csv(waveforms, path)
    elif fmt == "pdwf":
        path.mkdir(parents=True, exist_ok=True)
        for wf in waveforms:
            write_waveform_binary(wf, path / f"{wf.id}.pdwf")
    else:
        raise ConfigError(f"unknown format {fmt!r}")


def load_corpus(path):
    path = Path(path)
    if path.is_dir():
        return [read_waveform_binary(p) for p in sorted(path.glob("*.pdwf"))]
    if path.stat().st_size == 0:
        return []
    if is_pdwf(path):
        return [read_waveform_binary(path)]
    return read_waveforms_csv(path)


def is_feature_csv(path):
    path = Path(path)
    if path.is_dir() or path.stat().st_size == 0:
        return False
    with open(path, "rb") as fh:
        return fh.read(11) == b"id,label,f0"


def load_labels(path):
    """``{id: label}`` from a waveform corpus, a feature CSV or an ``id,label`` CSV."""
    path = Path(path)
    if is_feature_csv(path):
        return {fv.source_id: fv.label for fv in read_features_csv(path)}
    if not path.is_dir() and path.stat().st_size > 0 and not is_pdwf(path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
        if first == "id,label":
            out = {}
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines()[1:], 2):
                if not line.strip():
                    continue
                wid, lab = line.split(",")
                if lab not in ("0", "1"):
                    raise FormatError(f"line {lineno}: bad label {lab!r}")
                out[wid] = lab == "1"
            return out
    return {wf.id: wf.label for wf in load_corpus(path)}


# --------------------------------------------------------------- extraction


def _extract_one(args):
    wf, windows, template = args
    return extract_features(wf, windows, template)


def extract_all(waveforms, window_lengths=DEFAULT_WINDOWS, stl_template=None, workers=1):
    """Feature vectors for every waveform, in input order, for any worker count."""
    jobs = [(wf, tuple(window_lengths), stl_template) for wf in waveforms]
    if workers <= 1 or len(jobs) <= 1:
        return [_extract_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_extract_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


# ----------------------------------------------------------------- training


def stratified_split(labels, fraction, seed):
    """Train / test index arrays holding ``fraction`` of each class on the train side."""
    labels = np.asarray(labels, dtype=bool)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (True, False):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(idx.size)]
        k = int(round(fraction * idx.size))
        if idx.size >= 2:
            k = min(max(k, 1), idx.size - 1)
        train_idx.extend(idx[:k].tolist())
        test_idx.extend(idx[k:].tolist())
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(test_idx, dtype=int))


@dataclass
class TrainOutcome:
    model: object
    report: object
    train_accuracy: float
    train_ids: list
    test_ids: list

    def report_dict(self):
        d = self.report.to_dict() if self.report is not None else {}
        d["train_accuracy"] = self.train_accuracy
        d["n_train"] = len(self.train_ids)
        d["n_test"] = len(self.test_ids)
        return d


def train_on_features(vectors, config):
    """Split, scale on the train side, oversample, fit the SVM, score the held-out side."""
    if any(fv.label is None for fv in vectors):
        raise ConfigError("training data must be fully labelled")
    labels = [fv.label for fv in vectors]
    if all(labels) or not any(labels):
        raise ConfigError("training needs both PD and non-PD examples")
    n_feat = {fv.values.size for fv in vectors}
    if len(n_feat) != 1:
        raise ConfigError("feature vectors differ in length")

    tr, te = stratified_split(labels, config.split_fraction, config.split_seed)
    train_vecs = [vectors[i] for i in tr]
    test_vecs = [vectors[i] for i in te]
    scaler = fit_scaler(train_vecs)
    train_scaled = oversample_duplicate([apply_scaler(scaler, fv) for fv in train_vecs],
                                        config.oversample_seed)
    X = np.vstack([fv.values for fv in train_scaled])
    y = np.array([fv.label for fv in train_scaled])

    model = train(X, y, config.kernel, config.train)
    model.scaler = scaler
    model.extra["features"] = {"window_lengths": list(config.window_lengths),
                               "stl": config.stl.as_dict()}
    train_acc = float(np.mean(predict(model, X) == y))

    report = None
    if test_vecs:
        test_scaled = [apply_scaler(scaler, fv) for fv in test_vecs]
        if config.oversample_test and len({fv.label for fv in test_scaled}) == 2:
            test_scaled = oversample_duplicate(test_scaled, config.oversample_seed)
        Xt = np.vstack([fv.values for fv in test_scaled])
        report = evaluate(predict(model, Xt), [fv.label for fv in test_scaled])
    return TrainOutcome(model, report, train_acc,
                        [fv.source_id for fv in train_vecs], [fv.source_id for fv in test_vecs])


def featurize_for_model(model, waveforms, workers=1):
    """Scaled feature matrix for ``waveforms`` using the model's stored extraction settings."""
    meta = model.extra.get("features")
    if meta is None:
        raise FormatError("model carries no feature extraction settings")
    windows = meta["window_lengths"]
    if 3 * len(windows) != model.n_features:
        raise ConfigError(f"model has {model.n_features} features but "
                          f"{len(windows)} windows give {3 * len(windows)}")
    template = StlTemplate(**meta["stl"])
    vectors = extract_all(waveforms, windows, template, workers)
    X = np.vstack([fv.values for fv in vectors]) if vectors else np.empty((0, model.n_features))
    if model.scaler is not None and len(X):
        X = scale_values(model.scaler, X)
    return X


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")
