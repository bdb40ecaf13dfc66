"""
Residual features, min-max scaling and oversampling
===================================================

Each window contributes three numbers (sum, max and standard deviation of
the absolute residual), so four windows give twelve features.
"""

import numpy as np

from pdstl.features import apply_scaler, extract_features, fit_scaler
from pdstl.pipeline import synth_corpus
from pdstl.sampler import oversample_duplicate

corpus = synth_corpus(4, 12, seed=5)
windows = (2, 10, 100, 500)
vectors = [extract_features(wf, windows) for wf in corpus]

np.set_printoptions(precision=3, suppress=True, linewidth=120)
print("raw feature means, PD    ", np.mean([v.values for v in vectors if v.label], axis=0))
print("raw feature means, non-PD", np.mean([v.values for v in vectors if not v.label], axis=0))

scaler = fit_scaler(vectors)
scaled = [apply_scaler(scaler, v) for v in vectors]
X = np.vstack([v.values for v in scaled])
print("scaled range", X.min(), X.max())

balanced = oversample_duplicate(scaled, seed=0)
n_pd = sum(v.label for v in balanced)
print(f"before: {sum(v.label for v in scaled)} PD / {len(scaled)}; "
      f"after: {n_pd} PD / {len(balanced)}")
