"""Residual statistics, the multi-window feature vector and min-max scaling."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .stl import StlTemplate, stl_decompose

DEFAULT_WINDOWS = (100, 1000, 10000, 50000)
STATS_PER_WINDOW = 3
SCALER_VERSION = 1


@dataclass(frozen=True)
class ResidualFeatures:
    sum_abs: float
    max_abs: float
    std_abs: float

    def as_tuple(self):
        return (self.sum_abs, self.max_abs, self.std_abs)


@dataclass
class FeatureVector:
    values: np.ndarray
    label: bool | None = None
    source_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def residual_features(residual):
    """Sum, maximum and population standard deviation of ``|residual|``."""
    a = np.abs(np.asarray(residual, dtype=np.float64))
    if a.size == 0:
        raise ValueError("residual must be non-empty")
    if not np.all(np.isfinite(a)):
        raise ValueError("residual contains non-finite values")
    return ResidualFeatures(float(a.sum()), float(a.max()), float(a.std()))


def check_windows(window_lengths, n_samples=None):
    windows = [int(w) for w in window_lengths]
    if not windows:
        raise ConfigError("at least one window length is required")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ConfigError(f"window lengths must be strictly ascending, got {windows}")
    for w in windows:
        if w < 2:
            raise ConfigError(f"window length {w} is below the minimum of 2")
        if n_samples is not None and 2 * w > n_samples:
            raise ConfigError(
                f"window length {w} needs at least {2 * w} samples, waveform has {n_samples}")
    return windows


def extract_features(waveform, window_lengths=DEFAULT_WINDOWS, stl_template=None):
    """Decompose ``waveform`` once per window and concatenate residual statistics.

    Values are laid out window by window in ascending order as
    ``(sum_abs, max_abs, std_abs)`` triples.
    """
    windows = check_windows(window_lengths, waveform.samples.size)
    template = stl_template or StlTemplate()
    values = []
    for w in windows:
        dec = stl_decompose(waveform.samples, template.config_for(w))
        values.extend(residual_features(dec.residual).as_tuple())
    return FeatureVector(np.array(values), waveform.label, waveform.id)


# ------------------------------------------------------------------ scaling


@dataclass(frozen=True)
class ScalerParams:
    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self):
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist(),
                "version": SCALER_VERSION}

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != SCALER_VERSION:
            raise FormatError(f"unsupported scaler version {d.get('version')!r}")
        mins = np.asarray(d["mins"], dtype=np.float64)
        maxs = np.asarray(d["maxs"], dtype=np.float64)
        if mins.shape != maxs.shape or np.any(mins > maxs):
            raise FormatError("scaler mins/maxs are inconsistent")
        return cls(mins, maxs)


def fit_scaler(dataset):
    if not dataset:
        raise ValueError("cannot fit a scaler on an empty dataset")
    X = np.vstack([fv.values for fv in dataset])
    return ScalerParams(X.min(axis=0), X.max(axis=0))


def scale_values(params, values):
    """Min-max scale an array of shape (..., n_features); no clamping."""
    values = np.asarray(values, dtype=np.float64)
    span = params.maxs - params.mins
    flat = span == 0
    out = (values - params.mins) / np.where(flat, 1.0, span)
    return np.where(flat, 0.0, out)


def apply_scaler(params, vector):
    if vector.values.shape != params.mins.shape:
        raise ValueError(f"expected {params.mins.size} features, got {vector.values.size}")
    return FeatureVector(scale_values(params, vector.values), vector.label, vector.source_id)


def save_scaler(params, path):
    Path(path).write_text(json.dumps(params.to_dict()) + "\n", encoding="utf-8")


def load_scaler(path):
    try:
        return ScalerParams.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed scaler file ({exc})") from None


# -------------------------------------------------------------- feature CSV


def write_features_csv(vectors, path):
    n = vectors[0].values.size if vectors else STATS_PER_WINDOW * len(DEFAULT_WINDOWS)
    lines = ["id,label," + ",".join(f"f{j}" for j in range(n))]
    for fv in vectors:
        label = "-" if fv.label is None else str(int(fv.label))
        lines.append(f"{fv.source_id},{label}," + ",".join(f"{v:.17g}" for v in fv.values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_features_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("id,label,f0"):
        raise FormatError(f"{path}: missing feature CSV header")
    n = len(lines[0].split(",")) - 2
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n + 2:
            raise FormatError(f"line {lineno}: expected {n + 2} fields, got {len(parts)}")
        if parts[1] not in ("0", "1", "-"):
            raise FormatError(f"line {lineno}: bad label {parts[1]!r}")
        try:
            values = np.array([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        label = None if parts[1] == "-" else parts[1] == "1"
        out.append(FeatureVector(values, label, parts[0]))
    return out
