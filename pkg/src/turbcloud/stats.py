"""Sample variance, rank correlation and power-law fits with bootstrap errors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InsufficientData, InvalidInput, InvalidParameter
from .rng import as_stream

N_BOOT = 500


def variance(samples):
    """Unbiased per-axis variance of ``samples`` (n, d) or (n,); returns (per_axis, total)."""
    a = np.asarray(samples, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] < 2:
        raise InsufficientData("variance needs at least 2 samples", module="stats")
    per_axis = a.var(axis=0, ddof=1)
    return per_axis, float(per_axis.sum())


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    n_points: int

    def footer(self, prefix: str = "") -> dict:
        return {f"{prefix}slope": self.slope, f"{prefix}intercept": self.intercept,
                f"{prefix}r_squared": self.r_squared, f"{prefix}slope_stderr": self.slope_stderr}


def _ols(x, y):
    xm = x.mean()
    ym = y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0.0:
        return math.nan, math.nan, math.nan
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, intercept, r2


def linear_fit(x, y):
    """Plain least squares ``y = intercept + slope x``; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput("x and y must be 1-D of equal length", module="stats")
    if x.size < 2:
        raise InsufficientData("a line needs at least 2 points", module="stats")
    return _ols(x, y)


def _check_positive(name, a):
    if np.any(~np.isfinite(a)) or np.any(a <= 0):
        raise InvalidParameter(f"{name} must be finite and positive for a log-log fit", module="stats")


def loglog_fit(x, y, rng=None, n_boot: int = N_BOOT, replicates=None) -> RegressionResult:
    """Least squares on (log x, log y) with a bootstrap slope standard error.

    By default the bootstrap resamples points. If ``replicates`` (R, n) is
    given, ``y`` is taken as its column mean and the bootstrap resamples
    replicate rows instead, which reflects Monte-Carlo error of the curve.
    """
    if replicates is not None:
        reps = np.asarray(replicates, dtype=float)
        return loglog_fit_statistic(x, [reps[:, j] for j in range(reps.shape[1])], lambda m, j: float(m),
                                    rng=rng, n_boot=n_boot)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lx, ly = _log_points(x, y)
    slope, intercept, r2 = _ols(lx, ly)
    n = x.size
    idx = _boot_indices(as_stream(rng).spawn("bootstrap"), n_boot, n)
    slopes = np.array([_ols(lx[i], ly[i])[0] for i in idx])
    return RegressionResult(slope, intercept, r2, _spread(slopes), int(n))


def loglog_fit_statistic(x, replicate_sets, statistic, rng=None, n_boot: int = N_BOOT) -> RegressionResult:
    """Log-log fit of ``y_j = statistic(mean of replicate_sets[j], j)`` with a bootstrap over replicates.

    Each bootstrap draw resamples the rows of every replicate set
    independently and recomputes all ``y_j``.
    """
    x = np.asarray(x, dtype=float)
    sets = [np.asarray(s, dtype=float) for s in replicate_sets]
    if len(sets) != x.size:
        raise InvalidInput("one replicate set per x value is required", module="stats")
    y = np.array([statistic(s.mean(axis=0), j) for j, s in enumerate(sets)])
    lx, ly = _log_points(x, y)
    slope, intercept, r2 = _ols(lx, ly)
    stream = as_stream(rng).spawn("bootstrap")
    draws = [_boot_indices(stream.spawn(j), n_boot, s.shape[0]) for j, s in enumerate(sets)]
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        yb = np.array([statistic(s[draws[j][b]].mean(axis=0), j) for j, s in enumerate(sets)])
        slopes[b] = _ols(lx, np.log(yb))[0] if np.all(yb > 0) else math.nan
    return RegressionResult(slope, intercept, r2, _spread(slopes), int(x.size))


def _log_points(x, y):
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput("x and y must be 1-D of equal length", module="stats")
    if x.size < 3:
        raise InsufficientData("log-log fit needs at least 3 points", module="stats")
    _check_positive("x", x)
    _check_positive("y", y)
    return np.log(x), np.log(y)


def _boot_indices(stream, n_boot, n):
    return np.minimum((stream.uniform(size=(n_boot, n)) * n).astype(np.int64), n - 1)


def _spread(slopes):
    slopes = slopes[np.isfinite(slopes)]
    return float(slopes.std(ddof=1)) if slopes.size > 1 else math.nan


def spearman(x, y) -> float:
    """Pearson correlation of midranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput("spearman needs two 1-D sequences of equal length", module="stats")
    if x.size < 3:
        raise InsufficientData("spearman needs at least 3 points", module="stats")
    rx = rankdata(x) - (x.size + 1) / 2.0
    ry = rankdata(y) - (y.size + 1) / 2.0
    den = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if den == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(np.dot(rx, ry)) / den))


def mean_and_stderr(samples, axis: int = 0):
    a = np.asarray(samples, dtype=float)
    n = a.shape[axis]
    mean = a.mean(axis=axis)
    se = a.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.full_like(mean, math.nan)
    return mean, se
