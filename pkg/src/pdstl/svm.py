"""Soft-margin kernel SVM trained by sequential minimal optimisation.

Labels are +1 for PD and -1 for non-PD.  The decision function is
``f(x) = sum_i coef_i * k(sv_i, x) + bias`` with ``coef_i = alpha_i * y_i``.
"""
from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, PdstlError
from .features import ScalerParams

MODEL_VERSION = 1
KERNELS = ("linear", "polynomial", "rbf", "sigmoid")

# Training sets up to this size get a fully precomputed Gram matrix
# (3000**2 doubles = 72 MB); larger ones use an LRU cache of kernel rows.
_FULL_GRAM_LIMIT = 3000
_ROW_CACHE_SIZE = 2000


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    degree: int = 6
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kind!r}; expected one of {KERNELS}")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")

    def resolved(self, n_features):
        """Fill in the default gamma of ``1 / n_features`` where one is needed."""
        if self.kind in ("rbf", "sigmoid") and self.gamma is None:
            return replace(self, gamma=1.0 / n_features)
        return self

    def to_dict(self):
        return {"kind": self.kind, "degree": self.degree, "gamma": self.gamma}


@dataclass(frozen=True)
class TrainConfig:
    c: float = 1.0
    tol: float = 1e-3
    max_passes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("c must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_passes is not None and self.max_passes < 1:
            raise ConfigError("max_passes must be >= 1")

    def to_dict(self):
        return {"c": self.c, "tol": self.tol, "max_passes": self.max_passes, "seed": self.seed}


@dataclass
class SvmModel:
    kernel: KernelSpec
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    scaler: ScalerParams | None = None
    train_config: TrainConfig = field(default_factory=TrainConfig)
    support_indices: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return self.support_vectors.shape[1]


class ConvergenceError(PdstlError):
    """SMO hit its pass budget; ``model`` holds the best iterate reached."""

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


# ------------------------------------------------------------------ kernels


def kernel_eval(spec, x1, x2):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError(f"kernel inputs must be 1-D of equal length, got {x1.shape} and {x2.shape}")
    return float(kernel_matrix(spec, x1[None], x2[None])[0, 0])


def kernel_matrix(spec, A, B):
    """Kernel values between rows of ``A`` (m, d) and ``B`` (n, d)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.kind in ("rbf", "sigmoid") and spec.gamma is None:
        raise ConfigError(f"{spec.kind} kernel needs a gamma")
    # elementwise products summed over the last axis: the value for a pair does
    # not depend on which other rows share the call
    if spec.kind == "rbf":
        diff = A[:, None, :] - B[None, :, :]
        return np.exp(-spec.gamma * (diff * diff).sum(axis=-1))
    dots = (A[:, None, :] * B[None, :, :]).sum(axis=-1)
    if spec.kind == "linear":
        return dots
    if spec.kind == "polynomial":
        return dots ** spec.degree
    return np.tanh(spec.gamma * dots)


class _KernelRows:
    """Kernel rows of the training matrix, precomputed or cached on demand."""

    def __init__(self, spec, X):
        self.spec, self.X = spec, X
        n = X.shape[0]
        self.full = None
        if n <= _FULL_GRAM_LIMIT:
            step = max(1, (1 << 20) // max(1, n * X.shape[1]))
            self.full = np.vstack([kernel_matrix(spec, X[i:i + step], X)
                                   for i in range(0, n, step)])
        self.cache = OrderedDict()
        self._diag = None

    def diagonal(self):
        if self._diag is None:
            if self.full is not None:
                self._diag = np.diagonal(self.full).copy()
            else:
                self._diag = np.array([kernel_matrix(self.spec, x[None], x[None])[0, 0]
                                       for x in self.X])
        return self._diag

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is None:
            r = kernel_matrix(self.spec, self.X[i:i + 1], self.X)[0]
            self.cache[i] = r
            if len(self.cache) > _ROW_CACHE_SIZE:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return r


# ----------------------------------------------------------------- training


class _Smo:
    def __init__(self, X, y, kernel, config, trace):
        self.X, self.y = X, y
        self.n = y.size
        self.C, self.tol = float(config.c), float(config.tol)
        self.eps = 1e-12
        self.K = _KernelRows(kernel, X)
        self.alpha = np.zeros(self.n)
        self.G = np.zeros(self.n)       # sum_j alpha_j y_j K_ij
        self.b = 0.0
        self.objective = 0.0
        self.trace = trace
        self.rng = np.random.default_rng(config.seed)

    def errors(self, i=None):
        if i is None:
            return self.G + self.b - self.y
        return self.G[i] + self.b - self.y[i]

    def _snap(self, a):
        """Multipliers within 1e-8*C of a bound are put on the bound."""
        if a < 1e-8 * self.C:
            return 0.0
        if a > self.C * (1 - 1e-8):
            return self.C
        return a

    def _gain(self, i1, i2, d1, d2, k11, k12, k22):
        """Change of the dual objective for alpha deltas (d1, d2)."""
        y1, y2 = self.y[i1], self.y[i2]
        quad = d1 * d1 * k11 + d2 * d2 * k22 + 2.0 * y1 * y2 * d1 * d2 * k12
        return d1 + d2 - (y1 * d1 * self.G[i1] + y2 * d2 * self.G[i2] + 0.5 * quad)

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        E1, E2 = self.errors(i1), self.errors(i2)
        s = y1 * y2
        C = self.C
        if y1 != y2:
            lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            lo, hi = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if lo >= hi:
            return False
        row1, row2 = self.K.row(i1), self.K.row(i2)
        k11, k12, k22 = row1[i1], row1[i2], row2[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = min(max(a2 + y2 * (E1 - E2) / eta, lo), hi)
        else:
            # objective is not concave along the pair: take the better end
            g_lo = self._gain(i1, i2, -s * (lo - a2), lo - a2, k11, k12, k22)
            g_hi = self._gain(i1, i2, -s * (hi - a2), hi - a2, k11, k12, k22)
            if g_lo > g_hi + self.eps:
                a2_new = lo
            elif g_hi > g_lo + self.eps:
                a2_new = hi
            else:
                a2_new = a2
        a2_new = self._snap(a2_new)
        if abs(a2_new - a2) < self.eps * (a2_new + a2 + self.eps):
            return False
        a1_new = self._snap(min(max(a1 + s * (a2 - a2_new), 0.0), C))
        d1, d2 = a1_new - a1, a2_new - a2
        gain = self._gain(i1, i2, d1, d2, k11, k12, k22)
        if not gain > 0:
            return False

        # bias that makes the unbound member of the pair satisfy f(x) = y exactly
        db1 = -E1 - d1 * y1 * k11 - d2 * y2 * k12
        db2 = -E2 - d1 * y1 * k12 - d2 * y2 * k22
        if 0 < a1_new < C:
            db = db1
        elif 0 < a2_new < C:
            db = db2
        else:
            db = 0.5 * (db1 + db2)

        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.G += (d1 * y1) * row1 + (d2 * y2) * row2
        self.b += db
        self.objective += gain
        if self.trace is not None:
            self.trace.append(self.objective)
        return True

    def violates(self, i):
        r = self.errors(i) * self.y[i]
        a = self.alpha[i]
        return (r < -self.tol and a < self.C) or (r > self.tol and a > 0)

    def examine(self, i2):
        if not self.violates(i2):
            return False
        E2 = self.errors(i2)
        free = np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]
        if free.size > 1:
            i1 = free[np.argmax(np.abs(E2 - self.errors()[free]))]
            if self.take_step(i1, i2):
                return True
        if free.size:
            start = self.rng.integers(free.size)
            for i1 in np.roll(free, -start):
                if self.take_step(i1, i2):
                    return True
        start = self.rng.integers(self.n)
        for i1 in np.roll(np.arange(self.n), -start):
            if self.take_step(i1, i2):
                return True
        return False

    def bias_interval(self):
        """Range of biases for which every point satisfies KKT within ``tol``."""
        F = self.G - self.y
        a, y, C = self.alpha, self.y, self.C
        free = (a > 0) & (a < C)
        low = free | ((a <= 0) & (y > 0)) | ((a >= C) & (y < 0))
        up = free | ((a <= 0) & (y < 0)) | ((a >= C) & (y > 0))
        lo_i = np.argmax(np.where(low, -F, -np.inf))
        up_i = np.argmin(np.where(up, -F, np.inf))
        return -F[lo_i] - self.tol, -F[up_i] + self.tol, lo_i, up_i

    def second_order_partner(self, i):
        """Partner for ``i`` maximising the guaranteed gain ``b**2 / eta``."""
        F = self.G - self.y
        a, y, C = self.alpha, self.y, self.C
        up = ((a > 0) & (a < C)) | ((a <= 0) & (y < 0)) | ((a >= C) & (y > 0))
        b = F - F[i]                    # (-F_i) - (-F_j)
        row = self.K.row(i)
        diag = self.K.diagonal()
        eta = np.maximum(row[i] + diag - 2.0 * row, 1e-12)
        score = np.where(up & (b > 0), b * b / eta, -np.inf)
        return int(np.argmax(score))

    def refresh(self):
        """Recompute the gradient cache from scratch to shed rounding drift."""
        G = np.zeros(self.n)
        for i in np.nonzero(self.alpha > 0)[0]:
            G += (self.alpha[i] * self.y[i]) * self.K.row(i)
        self.G = G

    def run(self, max_passes):
        """Platt's outer loop, then maximal-violating-pair steps to finish.

        The Platt phase gets half of the pass budget; whatever it leaves over
        (counted as ``n`` pair steps per pass) goes to the second phase.
        """
        passes = 0
        examine_all = True
        changed = 0
        platt_budget = max(1, max_passes // 2)
        while (changed > 0 or examine_all) and passes < platt_budget:
            changed = 0
            if examine_all:
                order = self.rng.permutation(self.n)
            else:
                free = np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]
                order = free[self.rng.permutation(free.size)]
            for i in order:
                changed += self.examine(i)
            passes += 1
            if examine_all:
                examine_all = False
            elif changed == 0:
                examine_all = True

        # Platt's loop can stall on a violator it cannot pair.  Pairing the
        # largest violator with its second-order best partner (falling back to
        # the steepest pair) always makes progress while no consistent bias
        # exists.
        self.refresh()
        for step in range((max_passes - passes) * self.n):
            lo, hi, i, j = self.bias_interval()
            if lo <= hi:
                break
            if not self.take_step(i, self.second_order_partner(i)) and not self.take_step(i, j):
                return False
            if step % self.n == self.n - 1:
                self.refresh()
        lo, hi, _, _ = self.bias_interval()
        if lo > hi:
            return False
        self.b = min(max(self.b, lo), hi)
        return True

    def dual_objective(self):
        """Dual objective recomputed from the multipliers (independent of the trace)."""
        ay = self.alpha * self.y
        return float(self.alpha.sum() - 0.5 * ay @ self.G)


def _labels_pm1(labels):
    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    if np.all(y > 0) or np.all(y < 0):
        raise ConfigError("training needs both PD and non-PD examples")
    return y


def train(X, labels, kernel=None, config=None, trace=None):
    """Fit an SVM on feature rows ``X`` with boolean ``labels`` (True = PD).

    ``trace``, if a list, receives the dual objective after each accepted SMO
    step.  Raises ConvergenceError (carrying the last iterate) if the pass
    budget runs out.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise ValueError("X must be (n_samples, n_features) and match labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    y = _labels_pm1(labels)
    config = config or TrainConfig()
    kernel = (kernel or KernelSpec()).resolved(X.shape[1])
    max_passes = config.max_passes or 10 * X.shape[0]

    smo = _Smo(X, y, kernel, config, trace)
    converged = smo.run(max_passes)
    sv = np.nonzero(smo.alpha > 0)[0]
    model = SvmModel(kernel=kernel, support_vectors=X[sv].copy(),
                     dual_coefs=smo.alpha[sv] * y[sv], bias=float(smo.b),
                     train_config=config, support_indices=sv)
    model.extra["dual_objective"] = smo.dual_objective()
    if not converged:
        raise ConvergenceError(
            f"SMO did not reach KKT tolerance {config.tol} within {max_passes} passes", model)
    return model


def decision_function(model, X):
    """Decision values for one vector or a (m, d) batch."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    out = np.empty(X.shape[0])
    step = max(1, (1 << 20) // max(1, model.support_vectors.size))
    for i in range(0, X.shape[0], step):
        out[i:i + step] = kernel_matrix(model.kernel, X[i:i + step],
                                        model.support_vectors) @ model.dual_coefs + model.bias
    return float(out[0]) if single else out


def predict(model, X):
    """True (PD) where the decision value is strictly positive."""
    return np.asarray(decision_function(model, X)) > 0


# -------------------------------------------------------------- persistence


def model_to_dict(model):
    d = {
        "version": MODEL_VERSION,
        "kernel": model.kernel.to_dict(),
        "bias": model.bias,
        "dual_coefs": model.dual_coefs.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "scaler": None if model.scaler is None else model.scaler.to_dict(),
        "train_config": model.train_config.to_dict(),
    }
    d.update(model.extra)
    return d


def model_from_dict(d):
    if d.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {d.get('version')!r}")
    try:
        k = d["kernel"]
        kernel = KernelSpec(k["kind"], int(k["degree"]), k["gamma"])
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        coefs = np.asarray(d["dual_coefs"], dtype=np.float64)
        if sv.ndim != 2 or sv.shape[0] != coefs.size:
            raise FormatError("support_vectors and dual_coefs disagree in length")
        scaler = None if d.get("scaler") is None else ScalerParams.from_dict(d["scaler"])
        cfg = TrainConfig(**d["train_config"])
        known = {"version", "kernel", "bias", "dual_coefs", "support_vectors",
                 "scaler", "train_config"}
        extra = {key: v for key, v in d.items() if key not in known}
        return SvmModel(kernel, sv, coefs, float(d["bias"]), scaler, cfg, extra=extra)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model file: {exc}") from None


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed model file ({exc})") from None
    return model_from_dict(d)
