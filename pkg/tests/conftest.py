import numpy as np
import pytest

import pdstl.pipeline
import pdstl.svm
from pdstl.svm import decision_function

TRAIN_RUNS = {"count": 0}


def kkt_violations(model, X, labels, slack=1e-9):
    """Indices of training rows breaking the soft-margin KKT conditions."""
    C, tol = model.train_config.c, model.train_config.tol
    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    alpha = np.zeros(len(y))
    alpha[model.support_indices] = np.abs(model.dual_coefs)
    margin = y * decision_function(model, X)
    bad = []
    for i, (a, m) in enumerate(zip(alpha, margin)):
        if a <= 0:
            ok = m >= 1 - tol - slack
        elif a >= C:
            ok = m <= 1 + tol + slack
        else:
            ok = abs(m - 1) <= tol + slack
        if not ok:
            bad.append(i)
    return bad


def assert_dual_feasible(model, n_train):
    C = model.train_config.c
    assert np.all(np.abs(model.dual_coefs) <= C)
    assert np.all(np.abs(model.dual_coefs) > 0)
    assert abs(model.dual_coefs.sum()) <= 1e-6 * C * n_train


@pytest.fixture(autouse=True)
def _check_every_training_run(monkeypatch):
    """Every successful in-process fit is checked for dual feasibility and KKT."""
    original = pdstl.svm.train

    def checked(X, labels, *args, **kwargs):
        model = original(X, labels, *args, **kwargs)
        assert_dual_feasible(model, len(labels))
        assert kkt_violations(model, np.asarray(X, dtype=float), labels) == []
        TRAIN_RUNS["count"] += 1
        return model

    monkeypatch.setattr(pdstl.svm, "train", checked)
    monkeypatch.setattr(pdstl.pipeline, "train", checked)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
