"""Quadratic-cost Wasserstein distance between equal-weight empirical measures."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInput, SizeError

MAX_EXACT_SIZE = 256


def _as_points(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInput("samples must be a sequence of points", module="meanfield")
    return a


def wasserstein2_1d(a, b) -> float:
    """W2 between two 1-D samples of equal size: sort both, RMS of the differences."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise InvalidInput(f"sample counts differ ({a.size} vs {b.size})", module="meanfield")
    if a.size == 0:
        raise InvalidInput("empty samples", module="meanfield")
    d = np.sort(a) - np.sort(b)
    return float(np.sqrt(np.dot(d, d) / a.size))


def squared_cost(a, b) -> np.ndarray:
    a = _as_points(a)
    b = _as_points(b)
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def assignment_cost(cost: np.ndarray, perm) -> float:
    """Root mean cost of the matching ``i -> perm[i]``, summed in row order."""
    n = cost.shape[0]
    return float(np.sqrt(cost[np.arange(n), np.asarray(perm)].sum() / n))


def optimal_matching(a, b, max_size: int | None = MAX_EXACT_SIZE):
    a = _as_points(a)
    b = _as_points(b)
    if a.shape != b.shape:
        raise InvalidInput(f"sample shapes differ ({a.shape} vs {b.shape})", module="meanfield")
    n = a.shape[0]
    if n == 0:
        raise InvalidInput("empty samples", module="meanfield")
    if max_size is not None and n > max_size:
        raise SizeError(f"{n} points exceed the exact-assignment cap of {max_size}; "
                        "use wasserstein2_1d for scalar samples or the coupled estimator", module="meanfield")
    cost = squared_cost(a, b)
    _, cols = linear_sum_assignment(cost)
    return cost, cols


def wasserstein2_exact_small(a, b, max_size: int | None = MAX_EXACT_SIZE) -> float:
    """Exact W2 between two equal-size point sets by optimal assignment (cubic time)."""
    cost, cols = optimal_matching(a, b, max_size)
    return assignment_cost(cost, cols)
