"""Class balancing by duplicating minority-class feature vectors."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def oversample_duplicate(vectors, seed=0):
    """Duplicate minority vectors until both classes have exactly equal counts.

    Every minority vector is repeated ``M // m - 1`` extra times, then
    ``M % m`` of them (drawn without replacement from ``seed``) get one more
    copy.  Originals keep their input order and duplicates follow them.
    """
    labels = [fv.label for fv in vectors]
    if any(lab is None for lab in labels):
        raise ConfigError("oversampling needs labelled vectors")
    pos = [i for i, lab in enumerate(labels) if lab]
    neg = [i for i, lab in enumerate(labels) if not lab]
    if not pos or not neg:
        raise ConfigError("cannot balance single-class dataset")
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    m, big = len(minority), len(majority)

    extra = minority * (big // m - 1)
    rest = big % m
    if rest:
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(m, size=rest, replace=False))
        extra = extra + [minority[i] for i in picks.tolist()]
    return list(vectors) + [vectors[i] for i in extra]
