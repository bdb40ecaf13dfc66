import json
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdstl.evaluation import (ClassMetrics, class_metrics, evaluate, format_table,
                              macro_average, round2)

# per-class rows (non-PD, PD) and the Average row of the four published kernel tables
PUBLISHED = {
    "linear": ([(0.77, 0.58, 0.66), (0.67, 0.83, 0.74)], (0.72, 0.70, 0.70)),
    "polynomial": ([(0.52, 0.97, 0.68), (0.82, 0.13, 0.23)], (0.67, 0.55, 0.45)),
    "rbf": ([(0.82, 0.57, 0.68), (0.68, 0.88, 0.77)], (0.75, 0.73, 0.72)),
    "sigmoid": ([(0.51, 0.74, 0.60), (0.54, 0.30, 0.39)], (0.53, 0.52, 0.50)),
}


def brute_confusion(pred, true):
    c = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for p, t in zip(pred, true):
        c[("t" if p == t else "f") + ("p" if p else "n")] += 1
    return c


def test_perfect_predictions():
    rep = evaluate([True, False, True], [True, False, True])
    assert rep.macro == ClassMetrics(1.0, 1.0, 1.0)
    assert rep.flags == []


def test_hand_case():
    rep = evaluate([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    pd = rep.per_class["PD"]
    assert (pd.precision, pd.recall) == pytest.approx((2 / 3, 2 / 3))
    non = rep.per_class["non-PD"]
    assert (non.precision, non.recall, non.f1) == pytest.approx((0.5, 0.5, 0.5))
    assert rep.macro.f1 == pytest.approx((2 / 3 + 0.5) / 2)


def test_no_positive_predictions_sets_zero_and_flags():
    rep = evaluate([False] * 4, [True, False, False, True])
    assert rep.per_class["PD"] == ClassMetrics(0.0, 0.0, 0.0)
    assert "PD: precision 0/0" in rep.flags
    assert "PD: f1 0/0" in rep.flags


def test_evaluate_rejects_bad_shapes():
    with pytest.raises(ValueError):
        evaluate([True], [True, False])
    with pytest.raises(ValueError):
        evaluate([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=200))
def test_confusion_and_metric_invariants(pairs):
    pred, true = map(list, zip(*pairs))
    rep = evaluate(pred, true)
    c = rep.confusion
    assert {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn} == brute_confusion(pred, true)
    assert c.total == len(pairs)
    for m in list(rep.per_class.values()) + [rep.macro]:
        assert all(0 <= v <= 1 for v in (m.precision, m.recall, m.f1))
    for m in rep.per_class.values():
        assert m.f1 <= max(m.precision, m.recall) + 1e-12
        assert m.f1 >= min(m.precision, m.recall) - 1e-12 or m.f1 == 0
    assert rep.macro.recall == pytest.approx(
        (rep.per_class["PD"].recall + rep.per_class["non-PD"].recall) / 2)


def test_round2_is_half_away_from_zero_on_the_binary_value():
    assert round2(0.125) == 0.13          # exactly representable tie
    assert round2(0.705) == 0.7           # 0.705 is stored slightly below the tie
    assert round2(-0.125) == -0.13
    assert round2(0.704999) == 0.7


def test_linear_table_average_row_reproduces():
    rows, expected = PUBLISHED["linear"]
    macro = macro_average([ClassMetrics(*r) for r in rows])
    assert (round2(macro.precision), round2(macro.recall), round2(macro.f1)) == expected


@pytest.mark.parametrize("kernel", sorted(PUBLISHED))
def test_published_averages_lie_within_the_rounding_band(kernel):
    # per-class entries are themselves rounded, so the exact means sit within
    # half a unit of the second decimal of the printed average
    rows, expected = PUBLISHED[kernel]
    exact = [sum(Decimal(str(r[k])) for r in rows) / 2 for k in range(3)]
    for e, printed in zip(exact, expected):
        assert abs(e - Decimal(str(printed))) <= Decimal("0.005")


def test_format_table_layout():
    rep = evaluate([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    text = format_table(rep, "Kernel: rbf")
    lines = text.splitlines()
    assert lines[0] == "Kernel: rbf"
    assert lines[1].split() == ["Evaluation", "Category", "Precision", "Recall", "F1-Score"]
    assert lines[2].split()[:2] == ["Non-PD", "Signals"]
    assert lines[3].split() == ["PD", "Signals", "0.67", "0.67", "0.67"]
    assert lines[4].split()[0] == "Average"
    assert "tp=2 fp=1 tn=1 fn=1" in text


def test_report_json_round_trip():
    rep = evaluate([True, False], [True, True])
    d = json.loads(rep.to_json())
    assert d["confusion"] == {"tp": 1, "fp": 0, "tn": 0, "fn": 1}
    assert d["per_class"]["PD"]["recall"] == 0.5
    assert d["flags"] == rep.flags
