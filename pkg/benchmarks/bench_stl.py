"""Time STL on one full-length (800,000-sample) waveform at the four default windows."""
import time

from pdstl.features import DEFAULT_WINDOWS
from pdstl.stl import StlTemplate, stl_decompose
from pdstl.waveform_io import SynthParams, synth_waveform


def main():
    y = synth_waveform(SynthParams(n_samples=800_000, n_bursts=5, seed=1)).samples
    template = StlTemplate()
    total = 0.0
    for w in DEFAULT_WINDOWS:
        t0 = time.perf_counter()
        stl_decompose(y, template.config_for(w))
        dt = time.perf_counter() - t0
        total += dt
        print(f"window {w:6d}: {dt:6.2f} s")
    print(f"total      : {total:6.2f} s (target < 60 s)")


if __name__ == "__main__":
    main()
