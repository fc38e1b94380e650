"""Gini indices, AUC and Somers' D.

Two Gini indices live here.  The machine-learning index (accuracy ratio)
compares the area under the CAP of the predictions with the area under the
self-CAP of the responses; it depends on the predictions only through their
ranks.  The economics index is the normalised mean absolute difference of the
predictions themselves and ignores the responses.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike

from .core import (
    Dataset,
    DegenerateResponse,
    InvalidInput,
    TiePolicy,
    midranks,
)
from .curves import ResponseType, cap_curve, self_cap_integral


class DenominatorMethod(enum.Enum):
    CONTINUOUS_SELF_CAP = "self-cap"
    BINARY = "binary"
    PAIRWISE_GENERAL = "pairwise"


@dataclass(frozen=True)
class GiniReport:
    gini_ml: float
    gini_eco: float | None
    denominator: float
    denominator_method: str
    pair_convention: str
    cap_integral: float
    auc: float | None
    somers_d: float | None
    n: int
    tie_policy: str

    @property
    def denominator_scale(self) -> float:
        """``2 * integral(self-CAP) - 1``, the factor linking both indices."""
        return 2.0 * self.denominator

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def mean_abs_difference(values: ArrayLike, unbiased: bool = True) -> float:
    """Average ``|v_i - v_j|`` over pairs, in O(n log n).

    ``unbiased=True`` averages over the ``n(n-1)`` ordered pairs with
    ``i != j``; otherwise over all ``n**2`` pairs including ``i == j``.
    Uses ``sum_{i<j} |v_i - v_j| = sum_i (2i - n - 1) v_(i)``.
    """
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    n = v.size
    if n < 2:
        raise InvalidInput("need at least 2 values for a pair average")
    coef = 2.0 * np.arange(1, n + 1, dtype=np.float64) - (n + 1)
    half_sum = np.sum(coef * v)
    pairs = n * (n - 1) if unbiased else n * n
    return 2.0 * half_sum / pairs


def gini_eco(predictions: ArrayLike, unbiased: bool = True) -> float:
    """Economics Gini index ``E|M - M'| / (2 E[M])`` of non-negative values."""
    m = np.asarray(predictions, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InvalidInput("gini_eco needs finite non-negative values")
    mean = m.mean() if m.size else 0.0
    if not mean > 0:
        raise DegenerateResponse("gini_eco needs a positive mean")
    return mean_abs_difference(m, unbiased) / (2.0 * mean)


def gini_denominator(
    responses: ArrayLike,
    method: DenominatorMethod = DenominatorMethod.CONTINUOUS_SELF_CAP,
    unbiased: bool = True,
) -> float:
    """Normaliser of the ML Gini index: ``integral(self-CAP) - 1/2`` or its proxies.

    ``PAIRWISE_GENERAL`` is ``E|Y - Y'| / (4 E[Y])``; with ``unbiased=False``
    it coincides exactly with the sample self-CAP form.
    """
    y = np.asarray(responses, dtype=np.float64).reshape(-1)
    if y.size < 2 or np.all(y == y[0]):
        raise DegenerateResponse("responses are deterministic; Gini normaliser is zero")
    if method is DenominatorMethod.CONTINUOUS_SELF_CAP:
        return self_cap_integral(y, ResponseType.CONTINUOUS) - 0.5
    if method is DenominatorMethod.BINARY:
        return self_cap_integral(y, ResponseType.BINARY) - 0.5
    if method is DenominatorMethod.PAIRWISE_GENERAL:
        mean = y.mean()
        if not mean > 0:
            raise DegenerateResponse("responses have zero mean")
        return mean_abs_difference(y, unbiased) / (4.0 * mean)
    raise InvalidInput(f"unknown denominator method {method!r}")


def gini_ml(
    dataset: Dataset,
    denominator_method: DenominatorMethod = DenominatorMethod.CONTINUOUS_SELF_CAP,
    tie_policy: TiePolicy = TiePolicy.MIDRANK,
    rank_stats: bool = True,
) -> GiniReport:
    """ML Gini index of ``dataset.predictions`` for ``dataset.responses``.

    Not clipped: a value below zero means the ranking is worse than random.
    The reported economics index averages over all ``n**2`` pairs (the
    plug-in convention) whatever the denominator: under auto-calibration the
    CAP area minus 1/2 is exactly half that quantity, so
    ``gini_ml == gini_eco / denominator_scale`` holds on the sample.

    ``rank_stats=False`` skips AUC and Somers' D, which simulations rarely need.
    """
    denominator = gini_denominator(dataset.responses, denominator_method)
    cap_area = cap_curve(dataset, None, tie_policy).integral()
    value = (cap_area - 0.5) / denominator

    m = dataset.predictions
    eco = None
    if np.all(m >= 0) and m.mean() > 0:
        eco = gini_eco(m, unbiased=False)

    auc_value = somers = None
    if rank_stats:
        if dataset.is_binary():
            auc_value = auc(dataset)
        somers = somers_d(dataset)

    return GiniReport(
        gini_ml=float(value),
        gini_eco=None if eco is None else float(eco),
        denominator=float(denominator),
        denominator_method=denominator_method.value,
        pair_convention="plugin",
        cap_integral=float(cap_area),
        auc=auc_value,
        somers_d=somers,
        n=dataset.n,
        tie_policy=tie_policy.value,
    )


def gini_binary(dataset: Dataset, tie_policy: TiePolicy = TiePolicy.MIDRANK) -> GiniReport:
    """ML Gini index for 0/1 responses, with the AUC filled in.

    Raises ``ArithmeticError`` if the result disagrees with ``2 * auc - 1``,
    which can only happen through a bug.
    """
    if not dataset.is_binary():
        raise InvalidInput("gini_binary needs responses in {0, 1}")
    report = gini_ml(dataset, DenominatorMethod.BINARY, tie_policy, rank_stats=True)
    if abs(report.gini_ml - (2.0 * report.auc - 1.0)) > 1e-9:
        raise ArithmeticError(
            f"gini {report.gini_ml!r} disagrees with 2*auc-1 = {2 * report.auc - 1!r}"
        )
    return report


def auc(dataset: Dataset) -> float:
    """Share of (positive, negative) pairs ranked correctly; ties count 1/2."""
    if not dataset.is_binary():
        raise InvalidInput("auc needs responses in {0, 1}")
    y = dataset.responses
    n_pos = int(np.count_nonzero(y == 1.0))
    n_neg = dataset.n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateResponse("auc needs both classes")
    ranks = midranks(dataset.predictions)
    rank_sum = float(np.sum(ranks[y == 1.0]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _tied_pairs(*keys: np.ndarray) -> int:
    """Number of unordered pairs equal in every key."""
    order = np.lexsort(keys[::-1])
    stacked = np.stack([k[order] for k in keys])
    change = np.any(stacked[:, 1:] != stacked[:, :-1], axis=0)
    starts = np.concatenate(([0], np.flatnonzero(change) + 1))
    sizes = np.diff(np.concatenate((starts, [order.size]))).astype(np.int64)
    return int(np.sum(sizes * (sizes - 1) // 2))


def count_inversions(seq: ArrayLike) -> int:
    """Pairs ``i < j`` with ``seq[i] > seq[j]`` (strict), in O(n log^2 n).

    Bottom-up merge sort: at each level the number of left-half elements
    greater than each right-half element is found with one global
    ``searchsorted`` over block-offset keys.
    """
    s = np.asarray(seq).reshape(-1)
    n = s.size
    if n < 2:
        return 0
    r = np.unique(s, return_inverse=True)[1].astype(np.int64).reshape(-1)
    size = 1
    while size < n:
        size *= 2
    # padding with the maximum at the tail creates no inversions
    a = np.full(size, n, dtype=np.int64)
    a[:n] = r
    span = n + 1
    total = 0
    width = 1
    while width < size:
        blocks = size // (2 * width)
        pairs = a.reshape(blocks, 2, width)
        offsets = (np.arange(blocks, dtype=np.int64) * span)[:, None]
        left = (pairs[:, 0, :] + offsets).ravel()
        right = (pairs[:, 1, :] + offsets).ravel()
        at_most = np.searchsorted(left, right, side="right")
        at_most -= np.repeat(np.arange(blocks, dtype=np.int64) * width, width)
        total += int(np.sum(width - at_most))
        a = np.sort(a.reshape(blocks, 2 * width), axis=1).ravel()
        width *= 2
    return total


def somers_d(dataset: Dataset) -> float:
    """Somers' D of predictions given responses.

    ``(concordant - discordant) / (pairs with distinct responses)``; pairs
    tied in the prediction count as neither.  Exact integer pair counts.
    """
    y = dataset.responses
    m = dataset.predictions
    n = dataset.n
    total_pairs = n * (n - 1) // 2
    y_pairs = total_pairs - _tied_pairs(y)
    if y_pairs == 0:
        raise DegenerateResponse("all responses are identical")
    order = np.lexsort((m, y))
    discordant = count_inversions(m[order])
    m_only_ties = _tied_pairs(m) - _tied_pairs(y, m)
    concordant = y_pairs - discordant - m_only_ties
    return (concordant - discordant) / y_pairs

