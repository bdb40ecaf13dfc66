"""
Per-class metrics and the macro average
=======================================

Both classes get precision, recall and F1.  The Average row is their
unweighted mean.
"""

from pdstl.evaluation import evaluate, format_table

# 100 waveforms per class; the detector finds 83 of the PD ones and
# wrongly flags 42 non-PD ones
labels = [True] * 100 + [False] * 100
predictions = [True] * 83 + [False] * 17 + [False] * 58 + [True] * 42
report = evaluate(predictions, labels)
print(format_table(report, "Example detector"))

# a detector that never fires: PD precision is 0/0, reported as 0 and flagged
print()
print(format_table(evaluate([False] * 200, labels), "Silent detector"))
