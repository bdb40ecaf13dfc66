"""
Synthetic waveforms and their file formats
==========================================

A waveform is one 50 Hz cycle sampled at a fixed length.  PD waveforms
carry a few short damped oscillations on top of the sine and the noise.
"""

import tempfile
from pathlib import Path

import numpy as np

from pdstl.waveform_io import (SynthParams, read_waveform_binary, read_waveforms_csv,
                               synth_waveform_traced, write_waveform_binary,
                               write_waveforms_csv)

# one clean cycle and one with five bursts, same noise seed
params = SynthParams(n_samples=8000, n_bursts=5, seed=3)
wf, trace = synth_waveform_traced(params, id="demo-pd")
print("length", wf.samples.size, "label", wf.label, "rate", wf.sample_rate_hz, "Hz")
print("burst onsets", trace.onsets.tolist())
print("burst polarities", trace.polarities.tolist())

# the bursts stand out of the noise floor at their onsets
k = np.arange(wf.samples.size)
sine = params.amplitude * np.sin(2 * np.pi * k / wf.samples.size)
print("sample minus sine at onsets", np.round((wf.samples - sine)[trace.onsets], 2).tolist())

# text and binary round trips
tmp = Path(tempfile.mkdtemp())
write_waveforms_csv([wf], tmp / "w.csv")
write_waveform_binary(wf, tmp / "w.pdwf")
back_csv = read_waveforms_csv(tmp / "w.csv")[0]
back_bin = read_waveform_binary(tmp / "w.pdwf")
print("csv identical:", back_csv.samples.tobytes() == wf.samples.tobytes())
print("pdwf identical:", back_bin.samples.tobytes() == wf.samples.tobytes())
print("pdwf size", (tmp / "w.pdwf").stat().st_size, "bytes")
