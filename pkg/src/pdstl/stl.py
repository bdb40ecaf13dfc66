"""Loess smoothing and additive STL decomposition.

The decomposition follows the classic inner/outer loop recipe: cycle-subseries
smoothing, a low-pass filter made of three moving averages and a Loess pass,
trend smoothing, and bisquare robustness weights between outer passes.

All Loess work is vectorised over fit points (and, for the cycle-subseries
step, over all subseries of equal length at once) so that 800,000-sample
records decompose in seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNeighborhoodError

# Upper bound on the number of float64 cells in one (batch, fit point, neighbour)
# block.  Keeps peak memory around 32 MB per temporary.
_BLOCK_CELLS = 1 << 22
# Neighbourhoods up to this many (fit point, neighbour) cells are kept between
# the iterations of one decomposition.
_CACHE_CELLS = 1 << 20


@dataclass(frozen=True)
class LoessConfig:
    span: int
    degree: int = 1
    jump: int = 1

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if self.jump < 1:
            raise ValueError("jump must be >= 1")
        if self.degree == 0:
            if self.span < 1:
                raise ValueError("span must be >= 1")
        elif self.span < 3 or self.span % 2 == 0:
            raise ValueError(f"span must be odd and >= 3 for degree {self.degree}, got {self.span}")


def _next_odd(x):
    k = int(math.ceil(x))
    return k if k % 2 else k + 1


@dataclass(frozen=True)
class StlConfig:
    period: int
    seasonal_span: int = 11
    trend_span: int | None = None
    lowpass_span: int | None = None
    inner_iterations: int = 2
    outer_iterations: int = 1
    seasonal_jump: int | None = None
    trend_jump: int | None = None
    lowpass_jump: int | None = None

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("period must be >= 2")
        # unset spans and jumps resolve to the defaults derived from the period
        if self.trend_span is None:
            object.__setattr__(self, "trend_span", _next_odd(1.5 * self.period))
        if self.lowpass_span is None:
            object.__setattr__(self, "lowpass_span", _next_odd(self.period))
        for name in ("seasonal", "trend", "lowpass"):
            span = getattr(self, f"{name}_span")
            if span < 3 or span % 2 == 0:
                raise ValueError(f"{name}_span must be odd and >= 3, got {span}")
            if getattr(self, f"{name}_jump") is None:
                object.__setattr__(self, f"{name}_jump", int(math.ceil(span / 10)))
            if getattr(self, f"{name}_jump") < 1:
                raise ValueError(f"{name}_jump must be >= 1")
        if self.inner_iterations < 1:
            raise ValueError("inner_iterations must be >= 1")
        if self.outer_iterations < 0:
            raise ValueError("outer_iterations must be >= 0")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class StlTemplate:
    """Settings shared by every window length; ``config_for`` fills in the period.

    ``None`` spans and jumps fall back to the period-derived defaults of
    :class:`StlConfig`.
    """

    seasonal_span: int = 11
    inner_iterations: int = 2
    outer_iterations: int = 1
    trend_span: int | None = None
    lowpass_span: int | None = None
    seasonal_jump: int | None = None
    trend_jump: int | None = None
    lowpass_jump: int | None = None

    def config_for(self, window):
        return StlConfig(period=int(window), **self.as_dict())

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class StlDecomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    config: StlConfig


# --------------------------------------------------------------------- Loess


def _window_starts(xs, x_eval, q):
    """Left index of the ``q`` nearest neighbours of each point in ``x_eval``.

    Equal distances at the window edge keep the lower-index neighbour.
    """
    n = xs.size
    lo = np.zeros(x_eval.size, dtype=np.intp)
    hi = np.full(x_eval.size, n - q, dtype=np.intp)
    active = lo < hi
    while np.any(active):
        mid = (lo + hi) // 2
        right = np.minimum(mid + q, n - 1)
        shift = (x_eval - xs[mid]) > (xs[right] - x_eval)
        lo = np.where(active & shift, mid + 1, lo)
        hi = np.where(active & ~shift, mid, hi)
        active = lo < hi
    return lo


def _tricube(u):
    v = 1.0 - u * u * u
    return np.where(u < 1.0, v * v * v, 0.0)


def _neighbourhoods(xs, x_fit, q):
    """Neighbour indices, signed offsets, tricube weights and scales per fit point."""
    n = xs.size
    if q <= n:
        starts = _window_starts(xs, x_fit, q)
        idx = starts[:, None] + np.arange(q)
        offsets = xs[idx] - x_fit[:, None]
        h = np.max(np.abs(offsets), axis=1)
    else:
        idx = np.broadcast_to(np.arange(n), (x_fit.size, n))
        offsets = xs[idx] - x_fit[:, None]
        h = np.maximum(x_fit - xs[0], xs[-1] - x_fit)
        spacing = (xs[-1] - xs[0]) / (n - 1) if n > 1 else 1.0
        h = h + ((q - n) // 2) * spacing
    scale = np.where(h > 0, h, 1.0)
    u = np.where(h[:, None] > 0, np.abs(offsets) / scale[:, None], 0.0)
    return idx, offsets / scale[:, None], _tricube(u)


def _local_fit(d, w, ys, degree):
    """Value at offset 0 of the weighted polynomial fit; NaN where singular."""
    s0 = w.sum(axis=-1)
    t0 = (w * ys).sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if degree == 0:
            return t0 / s0
        wd = w * d
        s1 = wd.sum(axis=-1)
        s2 = (wd * d).sum(axis=-1)
        t1 = (wd * ys).sum(axis=-1)
        if degree == 1:
            return (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
        wdd = wd * d
        s3 = (wdd * d).sum(axis=-1)
        s4 = (wdd * d * d).sum(axis=-1)
        t2 = (wdd * ys).sum(axis=-1)
        m = np.stack([np.stack([s0, s1, s2], -1),
                      np.stack([s1, s2, s3], -1),
                      np.stack([s2, s3, s4], -1)], -2)
        rhs = np.stack([t0, t1, t2], -1)
        det = np.linalg.det(m)
        out = np.full(s0.shape, np.nan)
        ok = np.abs(det) > 0
        if np.any(ok):
            out[ok] = np.linalg.solve(m[ok], rhs[ok][..., None])[..., 0, 0]
        return out


def _fit_block(ys, rw, idx, d, w0, degree, strict):
    yy = ys[:, idx]
    w = w0[None] if rw is None else w0[None] * rw[:, idx]
    nnz = np.count_nonzero(w > 0, axis=-1)
    if strict and np.any(nnz < degree + 1):
        raise DegenerateNeighborhoodError(
            f"degenerate neighborhood: fewer than {degree + 1} points with nonzero weight")
    fit = _local_fit(d, w, yy, degree)
    short = nnz < degree + 1
    if np.any(short):
        # Lower the degree to what the neighbourhood supports.
        for deg in range(degree - 1, -1, -1):
            sel = short & (nnz == deg + 1)
            if np.any(sel):
                b, f = np.nonzero(sel)
                fit[b, f] = _local_fit(d[f], w[b, f], yy[b, f], deg)
        # No usable robustness weight at all: drop the robustness weights, and
        # failing that use a flat average of the neighbourhood.
        b, f = np.nonzero(nnz == 0)
        if b.size:
            w_plain = w0[f]
            flat = np.count_nonzero(w_plain > 0, axis=-1) == 0
            w_plain = np.where(flat[:, None], 1.0, w_plain)
            fit[b, f] = _local_fit(d[f], w_plain, yy[b, f], 0)
    return fit


def _loess(xs, ys, x_eval, span, degree, jump, rw=None, strict=True, cache=None, key=None):
    """Batched Loess: ``ys`` and ``rw`` are (batch, n); returns (batch, len(x_eval)).

    ``cache`` (a dict) with a ``key`` identifying ``(xs, x_eval, span, jump)``
    lets repeated calls reuse the neighbourhood weights.
    """
    n_eval = x_eval.size
    if jump > 1 and n_eval > 2:
        fit_at = np.arange(0, n_eval, jump)
        if fit_at[-1] != n_eval - 1:
            fit_at = np.append(fit_at, n_eval - 1)
    else:
        fit_at = np.arange(n_eval)
    x_fit = x_eval[fit_at]

    batch = ys.shape[0]
    fits = np.empty((batch, fit_at.size))
    hoods = None if cache is None else cache.get(key)
    if hoods is None and cache is not None and fit_at.size * min(span, xs.size) <= _CACHE_CELLS:
        hoods = cache[key] = _neighbourhoods(xs, x_fit, span)
    if hoods is not None:
        fits[:] = _fit_block(ys, rw, *hoods, degree, strict)
    else:
        chunk = max(1, _BLOCK_CELLS // max(1, batch * min(span, xs.size)))
        for start in range(0, fit_at.size, chunk):
            stop = min(start + chunk, fit_at.size)
            idx, d, w0 = _neighbourhoods(xs, x_fit[start:stop], span)
            fits[:, start:stop] = _fit_block(ys, rw, idx, d, w0, degree, strict)

    if fit_at.size == n_eval:
        return fits
    # linear interpolation between consecutive fit points
    out = np.empty((batch, n_eval))
    out[:, fit_at] = fits
    seg = np.searchsorted(fit_at, np.arange(n_eval), side="right") - 1
    seg = np.minimum(seg, fit_at.size - 2)
    between = np.setdiff1d(np.arange(n_eval), fit_at, assume_unique=True)
    s = seg[between]
    x0, x1 = x_fit[s], x_fit[s + 1]
    t = (x_eval[between] - x0) / (x1 - x0)
    f0, f1 = fits[:, s], fits[:, s + 1]
    out[:, between] = f0 + (f1 - f0) * t
    return out


def loess_smooth(xs, ys, eval_points, config, robustness_weights=None):
    """Locally weighted polynomial smoothing of ``ys`` sampled at ``xs``.

    Each fitted value comes from a weighted least-squares polynomial fit of
    degree ``config.degree`` over the ``config.span`` nearest points, with
    tricube distance weights multiplied by ``robustness_weights``.  With
    ``config.jump > 1`` only every ``jump``-th evaluation point (and the last
    one) is fitted and the rest are linearly interpolated; this requires
    strictly increasing ``eval_points``.

    Raises DegenerateNeighborhoodError when a neighbourhood has fewer than
    ``degree + 1`` points of nonzero weight.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ev = np.atleast_1d(np.asarray(eval_points, dtype=np.float64))
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size == 0:
        raise ValueError("xs and ys must be non-empty 1-D arrays of equal length")
    if xs.size > 1 and np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    if config.jump > 1 and ev.size > 1 and np.any(np.diff(ev) <= 0):
        raise ValueError("eval_points must be strictly increasing when jump > 1")
    rw = None
    if robustness_weights is not None:
        rw = np.asarray(robustness_weights, dtype=np.float64)
        if rw.shape != xs.shape:
            raise ValueError("robustness_weights must match xs in length")
        if np.any((rw < 0) | (rw > 1)):
            raise ValueError("robustness_weights must lie in [0, 1]")
        rw = rw[None]
    return _loess(xs, ys[None], ev, config.span, config.degree, config.jump,
                  rw, strict=True)[0]


# ----------------------------------------------------------------------- STL


def robustness_weights(residuals):
    """Bisquare weights with cutoff six times the median absolute residual."""
    r = np.abs(np.asarray(residuals, dtype=np.float64))
    if r.size == 0:
        raise ValueError("residuals must be non-empty")
    h = 6.0 * np.median(r)
    if h == 0:
        return np.ones_like(r)
    w = np.zeros_like(r)
    inside = r < h
    w[inside] = (1.0 - (r[inside] / h) ** 2) ** 2
    return w


def _moving_average(x, length):
    c = np.concatenate(([0.0], np.cumsum(x)))
    return (c[length:] - c[:-length]) / length


def _cycle_subseries(values, rw, period, span, jump, cache):
    """Smooth every cycle-subseries and extend each one by a point at both ends.

    Returns an array of length ``len(values) + 2*period`` laid out so that
    index ``j + period*t`` holds subseries ``j`` at position ``t - 1``.
    """
    n = values.size
    k, r = divmod(n, period)
    out = np.empty(n + 2 * period)
    for positions, m in ((np.arange(r), k + 1), (np.arange(r, period), k)):
        if positions.size == 0:
            continue
        grid = positions[:, None] + period * np.arange(m)
        sub = values[grid]
        sub_rw = None if rw is None else rw[grid]
        xs = np.arange(m, dtype=np.float64)
        inner = _loess(xs, sub, xs, span, 1, jump, sub_rw, strict=False,
                       cache=cache, key=("sub", m))
        ends = _loess(xs, sub, np.array([-1.0, float(m)]), span, 1, 1, sub_rw, strict=False,
                      cache=cache, key=("ends", m))
        extended = np.concatenate([ends[:, :1], inner, ends[:, 1:]], axis=1)
        out[positions[:, None] + period * np.arange(m + 2)] = extended
    return out


def _snap_to_grid(y, trend, seasonal):
    """Round trend and seasonal onto the binary grid of ``4 * max|y|``.

    Their sum is then exact, and so is ``y - sum`` for any ``y`` lying on the
    same grid (integer ADC data, float32-stored samples), which makes
    ``trend + seasonal + residual == y`` hold bitwise.
    """
    peak = float(np.max(np.abs(y)))
    if peak == 0.0 or not np.isfinite(peak):
        return trend, seasonal
    exp = math.frexp(4.0 * peak)[1] - 53
    snap = lambda a: np.ldexp(np.round(np.ldexp(a, -exp)), exp)
    return snap(trend), snap(seasonal)


def stl_decompose(series, config):
    """Split ``series`` into trend, seasonal and residual components.

    The residual is the remainder ``y - (trend + seasonal)``.  For inputs on a
    common binary grid (ADC counts, float32 samples) the sum of the three
    components reproduces the input bitwise; for arbitrary float64 input it
    agrees to within a rounding error of ``max|y|``.
    """
    y = np.asarray(series, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("series must be 1-D")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains non-finite values")
    n, p = y.size, config.period
    if n < 2 * p:
        raise ValueError(f"series of length {n} is too short for period {p} (needs >= {2 * p})")

    t_axis = np.arange(n, dtype=np.float64)
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rw = None
    cache = {}
    for outer in range(config.outer_iterations + 1):
        rw_b = None if rw is None else rw[None]
        for _ in range(config.inner_iterations):
            detrended = y - trend
            cycle = _cycle_subseries(detrended, rw, p, config.seasonal_span,
                                     config.seasonal_jump, cache)
            low = _moving_average(_moving_average(cycle, p), p)
            low = _moving_average(low, 3)
            low = _loess(t_axis, low[None], t_axis, config.lowpass_span, 1,
                         config.lowpass_jump, None, strict=False,
                         cache=cache, key="lowpass")[0]
            seasonal = cycle[p:p + n] - low
            trend = _loess(t_axis, (y - seasonal)[None], t_axis, config.trend_span, 1,
                           config.trend_jump, rw_b, strict=False,
                           cache=cache, key="trend")[0]
        if outer < config.outer_iterations:
            rw = robustness_weights(y - trend - seasonal)

    trend, seasonal = _snap_to_grid(y, trend, seasonal)
    return StlDecomposition(trend, seasonal, y - (trend + seasonal), config)
