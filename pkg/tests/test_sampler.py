from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdstl.errors import ConfigError
from pdstl.features import FeatureVector
from pdstl.sampler import oversample_duplicate


def make(n_pos, n_neg):
    labels = [True] * n_pos + [False] * n_neg
    return [FeatureVector(np.array([float(i), float(lab)]), lab, f"v{i}")
            for i, lab in enumerate(labels)]


def counts(vs):
    c = Counter(fv.label for fv in vs)
    return c[True], c[False]


@pytest.mark.parametrize("n_pos, n_neg", [(3, 9), (5, 5), (2, 5), (7, 3)])
def test_class_counts_match(n_pos, n_neg):
    out = oversample_duplicate(make(n_pos, n_neg))
    big = max(n_pos, n_neg)
    assert counts(out) == (big, big)


def test_three_to_nine_triples_each_minority_vector():
    out = oversample_duplicate(make(3, 9))
    per_id = Counter(fv.source_id for fv in out if fv.label)
    assert per_id == {"v0": 3, "v1": 3, "v2": 3}


def test_two_to_five_gives_one_vector_an_extra_copy():
    out = oversample_duplicate(make(2, 5), seed=3)
    assert sorted(Counter(fv.source_id for fv in out if fv.label).values()) == [2, 3]


def test_originals_come_first_in_order():
    src = make(2, 7)
    out = oversample_duplicate(src)
    assert out[:len(src)] == src


def test_single_class_and_unlabelled_rejected():
    with pytest.raises(ConfigError, match="single-class"):
        oversample_duplicate(make(4, 0))
    with pytest.raises(ConfigError):
        oversample_duplicate([FeatureVector([1.0], None)])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_balancing_properties(n_pos, n_neg, seed):
    src = make(n_pos, n_neg)
    out = oversample_duplicate(src, seed)
    big = max(n_pos, n_neg)
    assert counts(out) == (big, big)
    # nothing new is invented and nothing is lost
    assert {fv.values.tobytes() for fv in out} == {fv.values.tobytes() for fv in src}
    again = oversample_duplicate(src, seed)
    assert [fv.source_id for fv in again] == [fv.source_id for fv in out]
    per_id = Counter(fv.source_id for fv in out)
    assert max(per_id.values()) - min(per_id[fv.source_id] for fv in src
                                      if fv.label == (n_pos < n_neg)) <= big
