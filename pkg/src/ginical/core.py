"""Shared data types, order statistics and tie handling.

Every other module works on a :class:`Dataset`: paired non-negative responses
and real-valued predictions.  Ranking is always done with a stable sort so
that records with equal keys keep their input order, which makes every
downstream quantity a deterministic function of the input.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike


class GiniError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class InvalidInput(GiniError, ValueError):
    code = "invalid_input"


class DegenerateResponse(GiniError, ValueError):
    """Responses carry no information (zero total, or no dispersion)."""

    code = "degenerate_response"


class TiesNotAllowed(GiniError, ValueError):
    code = "ties_not_allowed"


class DomainError(GiniError, ValueError):
    code = "domain_error"


class PreconditionFailed(GiniError, ValueError):
    code = "precondition_failed"


class TiePolicy(enum.Enum):
    """How tied predictions enter rank-based curves.

    ``STRICT`` refuses tied predictions (the continuous setting).  ``MIDRANK``
    averages over all orderings of each tied group, which amounts to giving
    every member of the group the group's mean response.
    """

    STRICT = "strict"
    MIDRANK = "midrank"


def _as_float_array(values: ArrayLike, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Responses ``y`` and predictions ``mu``, one pair per record."""

    responses: np.ndarray
    predictions: np.ndarray

    def __init__(self, responses: ArrayLike, predictions: ArrayLike):
        y = _as_float_array(responses, "responses")
        m = _as_float_array(predictions, "predictions")
        if y.shape != m.shape:
            raise InvalidInput(
                f"responses and predictions differ in length ({y.size} != {m.size})"
            )
        if y.size < 2:
            raise InvalidInput("a dataset needs at least 2 records")
        if np.any(y < 0):
            raise InvalidInput("responses must be non-negative")
        if not y.sum() > 0:
            raise DegenerateResponse("responses sum to zero")
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "predictions", m)

    @property
    def n(self) -> int:
        return int(self.responses.size)

    def is_binary(self) -> bool:
        return bool(np.all((self.responses == 0.0) | (self.responses == 1.0)))

    def has_tied_predictions(self) -> bool:
        return has_ties(self.predictions)


def has_ties(values: np.ndarray) -> bool:
    s = np.sort(values)
    return bool(np.any(s[1:] == s[:-1]))


def stable_order(values: ArrayLike) -> np.ndarray:
    """Ascending permutation; equal keys keep their input order."""
    return np.argsort(np.asarray(values), kind="stable")


def tie_groups(sorted_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and sizes of runs of equal values in a sorted array."""
    n = sorted_values.size
    if n == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    breaks = np.flatnonzero(sorted_values[1:] != sorted_values[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    sizes = np.diff(np.concatenate((starts, [n])))
    return starts, sizes


def group_average(sorted_keys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Replace ``values`` by their mean within each run of equal ``sorted_keys``."""
    starts, sizes = tie_groups(sorted_keys)
    if starts.size == sorted_keys.size:
        return values
    sums = np.add.reduceat(values, starts)
    return np.repeat(sums / sizes, sizes)


def midranks(values: ArrayLike) -> np.ndarray:
    """1-based ranks with ties sharing the average of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = stable_order(values)
    starts, sizes = tie_groups(values[order])
    # average of positions start+1 .. start+size
    avg = starts + (sizes + 1) / 2.0
    ranks = np.empty(values.size, dtype=np.float64)
    ranks[order] = np.repeat(avg, sizes)
    return ranks


def ceil_index(x: float) -> int:
    """``ceil(x)`` that ignores floating noise around integers.

    Grid points such as ``(1 - 0.3) * 10`` evaluate to ``7.000000000000001``;
    a plain ceiling would jump to the next order statistic.
    """
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def ceil_indices(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ceil_index`."""
    x = np.asarray(x, dtype=np.float64)
    r = np.rint(x)
    snap = np.abs(x - r) <= 1e-9 * np.maximum(1.0, np.abs(x))
    return np.where(snap, r, np.ceil(x)).astype(np.intp)


def empirical_cdf(values: ArrayLike, threshold: float) -> float:
    """Fraction of ``values`` that are ``<= threshold``."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InvalidInput("empirical_cdf needs at least one value")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("values must be finite")
    count = np.searchsorted(np.sort(v), threshold, side="right")
    return count / v.size


def empirical_quantile(values: ArrayLike, alpha: float) -> float:
    """Left-continuous inverse of the empirical cdf.

    Returns the order statistic with 1-based index ``ceil(alpha * n)``; no
    interpolation.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InvalidInput("empirical_quantile needs at least one value")
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    k = min(max(ceil_index(alpha * v.size), 1), v.size)
    return float(np.sort(v)[k - 1])
