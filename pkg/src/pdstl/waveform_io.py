"""Waveform data model, CSV / PDWF file formats and a synthetic PD generator.

A waveform is one single-cycle voltage record.  Two on-disk layouts are
supported:

* CSV: header ``id,phase,label,sample_rate_hz,n_samples`` followed, for every
  waveform, by one metadata row and one row of comma-separated samples.
* PDWF: a little-endian binary layout holding a single waveform with
  float32 samples.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

CSV_HEADER = "id,phase,label,sample_rate_hz,n_samples"
PDWF_MAGIC = b"PDWF"
PDWF_VERSION = 1
MAINS_HZ = 50.0

_PDWF_FIXED = struct.Struct("<4sHBBdI")
_U64 = struct.Struct("<Q")


@dataclass
class Waveform:
    id: str
    samples: np.ndarray
    phase: int = 0
    label: bool | None = None
    sample_rate_hz: float = MAINS_HZ * 800_000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError(f"waveform {self.id!r}: samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"waveform {self.id!r}: samples contain non-finite values")
        if self.phase not in (0, 1, 2):
            raise ValueError(f"waveform {self.id!r}: phase must be 0, 1 or 2, got {self.phase}")
        if not (self.sample_rate_hz > 0 and math.isfinite(self.sample_rate_hz)):
            raise ValueError(f"waveform {self.id!r}: sample_rate_hz must be positive")
        if self.label is not None:
            self.label = bool(self.label)

    def __len__(self):
        return self.samples.size


# --------------------------------------------------------------------- CSV


def _label_token(label):
    if label is None:
        return "-"
    return "1" if label else "0"


def _parse_label(token, lineno):
    token = token.strip()
    if token == "-":
        return None
    if token in ("0", "1"):
        return token == "1"
    raise FormatError(f"line {lineno}: label must be 0, 1 or '-', got {token!r}")


def _check_id(wid):
    if any(c in wid for c in ",\r\n"):
        raise FormatError(f"waveform id {wid!r} contains a comma or newline")


def write_waveforms_csv(waveforms, path):
    """Write waveforms to ``path`` in the CSV layout (17 significant digits)."""
    lines = [CSV_HEADER]
    for wf in waveforms:
        _check_id(wf.id)
        lines.append(f"{wf.id},{wf.phase},{_label_token(wf.label)},"
                     f"{wf.sample_rate_hz:.17g},{wf.samples.size}")
        lines.append(",".join(f"{v:.17g}" for v in wf.samples.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_waveforms_csv(path):
    """Read every waveform from a CSV file.

    A header-only file yields an empty list; a zero-byte file is an error.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: no waveforms")
    if lines[0].strip() != CSV_HEADER:
        raise FormatError(f"line 1: expected header {CSV_HEADER!r}")

    waveforms = []
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        meta_no = i + 1
        parts = lines[i].split(",")
        if len(parts) != 5:
            raise FormatError(f"line {meta_no}: expected 5 metadata fields, got {len(parts)}")
        wid, phase, label, rate, count = parts
        try:
            phase = int(phase)
            rate = float(rate)
            count = int(count)
        except ValueError as exc:
            raise FormatError(f"line {meta_no}: {exc}") from None
        label = _parse_label(label, meta_no)
        if i + 1 >= len(lines):
            raise FormatError(f"line {meta_no}: metadata row without a sample row")
        data_no = meta_no + 1
        try:
            samples = np.array([float(tok) for tok in lines[i + 1].split(",")])
        except ValueError as exc:
            raise FormatError(f"line {data_no}: {exc}") from None
        if samples.size != count:
            raise FormatError(f"line {data_no}: expected {count} samples, got {samples.size}")
        if not np.all(np.isfinite(samples)):
            raise FormatError(f"line {data_no}: non-finite sample value")
        try:
            waveforms.append(Waveform(wid, samples, phase=phase, label=label,
                                      sample_rate_hz=rate))
        except ValueError as exc:
            raise FormatError(f"line {meta_no}: {exc}") from None
        i += 2
    return waveforms


# -------------------------------------------------------------------- PDWF


def write_waveform_binary(waveform, path):
    """Write one waveform as PDWF.  Samples are stored as float32."""
    wid = waveform.id.encode("utf-8")
    label = 255 if waveform.label is None else int(waveform.label)
    head = _PDWF_FIXED.pack(PDWF_MAGIC, PDWF_VERSION, waveform.phase, label,
                            float(waveform.sample_rate_hz), len(wid))
    payload = waveform.samples.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(head + wid + _U64.pack(waveform.samples.size) + payload)


def read_waveform_binary(path):
    data = Path(path).read_bytes()
    if data[:4] != PDWF_MAGIC:
        raise FormatError(f"{path}: not a PDWF file")
    if len(data) < _PDWF_FIXED.size:
        raise FormatError(f"{path}: truncated header")
    _, version, phase, label, rate, id_len = _PDWF_FIXED.unpack_from(data)
    if version != PDWF_VERSION:
        raise FormatError(f"{path}: unsupported PDWF version {version}")
    pos = _PDWF_FIXED.size
    if len(data) < pos + id_len + _U64.size:
        raise FormatError(f"{path}: truncated header")
    wid = data[pos:pos + id_len].decode("utf-8")
    pos += id_len
    (n,) = _U64.unpack_from(data, pos)
    pos += _U64.size
    if len(data) - pos < 4 * n:
        raise FormatError(f"{path}: truncated payload ({len(data) - pos} of {4 * n} bytes)")
    samples = np.frombuffer(data, dtype="<f4", count=n, offset=pos).astype(np.float64)
    if label not in (0, 1, 255):
        raise FormatError(f"{path}: invalid label byte {label}")
    try:
        return Waveform(wid, samples, phase=phase,
                        label=None if label == 255 else bool(label),
                        sample_rate_hz=rate)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def is_pdwf(path):
    with open(path, "rb") as fh:
        return fh.read(4) == PDWF_MAGIC


# --------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic single-cycle generator.

    Each burst is ``±burst_amplitude * exp(-t/tau) * sin(2*pi*f_c*t)``,
    truncated after ``5*tau`` samples, and the carrier completes
    ``burst_carrier_cycles_per_burst`` cycles over that support.
    """

    n_samples: int = 8000
    amplitude: float = 20.0
    noise_sigma: float = 1.0
    n_bursts: int = 0
    burst_amplitude: float = 8.0
    burst_decay_samples: float = 4.0
    burst_carrier_cycles_per_burst: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 4:
            raise ValueError("n_samples must be >= 4")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_bursts < 0:
            raise ValueError("n_bursts must be >= 0")
        if self.n_bursts > self.n_samples:
            raise ValueError("n_bursts cannot exceed n_samples")
        if self.burst_decay_samples <= 0 or self.burst_carrier_cycles_per_burst <= 0:
            raise ValueError("burst decay and carrier cycles must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class BurstTrace:
    """Ground truth of the bursts injected by :func:`synth_waveform_traced`."""

    onsets: np.ndarray
    polarities: np.ndarray
    envelopes: list = field(default_factory=list)


def synth_waveform_traced(params, id="synth", phase=0):
    rng = np.random.default_rng(params.seed)
    n = params.n_samples
    k = np.arange(n)
    samples = params.amplitude * np.sin(2 * np.pi * k / n)
    if params.noise_sigma > 0:
        samples = samples + rng.normal(0.0, params.noise_sigma, n)

    onsets = np.sort(rng.choice(n, size=params.n_bursts, replace=False))
    polarities = rng.choice([-1.0, 1.0], size=params.n_bursts)
    tau = params.burst_decay_samples
    support = max(2, int(math.ceil(5 * tau)))
    f_c = params.burst_carrier_cycles_per_burst / support
    envelopes = []
    for onset, pol in zip(onsets.tolist(), polarities.tolist()):
        t = np.arange(min(support, n - onset), dtype=np.float64)
        env = params.burst_amplitude * np.exp(-t / tau)
        # cosine carrier puts the envelope peak on the onset sample
        samples[onset:onset + t.size] += pol * env * np.cos(2 * np.pi * f_c * t)
        envelopes.append(env)

    # quantise like a digitiser would; output survives a .pdwf round trip bit-exactly
    samples = samples.astype(np.float32).astype(np.float64)
    wf = Waveform(id, samples, phase=phase, label=params.n_bursts > 0,
                  sample_rate_hz=MAINS_HZ * n)
    return wf, BurstTrace(onsets, polarities, envelopes)


def synth_waveform(params, id="synth", phase=0):
    """One 50 Hz sine cycle plus Gaussian noise plus damped-oscillation bursts.

    Samples are rounded to float32 precision, the storage precision of the
    binary format.
    """
    return synth_waveform_traced(params, id=id, phase=phase)[0]
