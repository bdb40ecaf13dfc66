"""Confusion counts, per-class precision / recall / F1 and their macro average."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

CLASSES = ("non-PD", "PD")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def as_dict(self):
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class EvalReport:
    per_class: dict
    macro: ClassMetrics
    confusion: ConfusionMatrix
    flags: list = field(default_factory=list)

    def to_dict(self):
        c = self.confusion
        return {
            "per_class": {k: v.as_dict() for k, v in self.per_class.items()},
            "macro": self.macro.as_dict(),
            "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
            "flags": list(self.flags),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)


def _ratio(num, den, flag, flags):
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def class_metrics(tp, fp, fn, name, flags):
    p = _ratio(tp, tp + fp, f"{name}: precision 0/0", flags)
    r = _ratio(tp, tp + fn, f"{name}: recall 0/0", flags)
    f1 = _ratio(2 * p * r, p + r, f"{name}: f1 0/0", flags)
    return ClassMetrics(p, r, f1)


def macro_average(per_class):
    """Unweighted mean of each metric across the classes."""
    rows = list(per_class)
    n = len(rows)
    return ClassMetrics(sum(m.precision for m in rows) / n,
                        sum(m.recall for m in rows) / n,
                        sum(m.f1 for m in rows) / n)


def evaluate(predictions, labels):
    """Score boolean predictions against boolean labels (True = PD)."""
    pred = np.asarray(predictions, dtype=bool)
    true = np.asarray(labels, dtype=bool)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ValueError("predictions and labels must be 1-D arrays of equal length")
    if pred.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    tn = int(np.sum(~pred & ~true))
    fn = int(np.sum(~pred & true))
    flags = []
    per_class = {
        "non-PD": class_metrics(tn, fn, fp, "non-PD", flags),
        "PD": class_metrics(tp, fp, fn, "PD", flags),
    }
    return EvalReport(per_class, macro_average(per_class.values()),
                      ConfusionMatrix(tp, fp, tn, fn), flags)


def round2(x):
    """Two-decimal display rounding, half away from zero on the exact binary value."""
    return float(Decimal(x).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_table(report, title=None):
    """Aligned text table in the layout of the classic per-class report."""
    head = f"{'Evaluation Category':<22}{'Precision':>10}{'Recall':>10}{'F1-Score':>10}"
    lines = [title] if title else []
    lines.append(head)
    rows = [("Non-PD Signals", report.per_class["non-PD"]),
            ("PD Signals", report.per_class["PD"]),
            ("Average", report.macro)]
    for name, m in rows:
        lines.append(f"{name:<22}{round2(m.precision):>10.2f}{round2(m.recall):>10.2f}"
                     f"{round2(m.f1):>10.2f}")
    c = report.confusion
    lines.append(f"confusion: tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn}")
    for flag in report.flags:
        lines.append(f"flag: {flag}")
    return "\n".join(lines)
