"""Auto-calibration: diagnosis, restoration and convex-order comparison.

A predictor is auto-calibrated when every cohort sharing the same prediction
has mean response equal to that prediction.  On a sample this is checked on
equal-count bins of the prediction ranks; it is restored by replacing each
prediction with an estimate of ``E[Y | prediction]`` (pool-adjacent-violators
or equal-count bin means).

The restored predictor is fitted in-sample.  Out-of-sample it is only
approximately calibrated; use :class:`BinCalibrator` to fit on one split and
apply on another.
"""

from __future__ import annotations

import enum
import io
import json
import re
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike

from .core import Dataset, InvalidInput, PreconditionFailed, stable_order, tie_groups


def rank_bins(scores: ArrayLike, k: int) -> np.ndarray:
    """Equal-count bin index per record, ranking by ``scores``.

    Position ``p`` (0-based, ascending) falls in bin ``floor(p k / n)``, except
    that a tied group goes wholly into the bin of its first member.  Empty
    bins are dropped, so ids run ``0..b-1`` with ``b <= k``.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    n = s.size
    if k < 1:
        raise InvalidInput("need at least one bin")
    order = stable_order(s)
    starts, sizes = tie_groups(s[order])
    group_bin = (starts * k) // n
    _, dense = np.unique(group_bin, return_inverse=True)
    ids = np.empty(n, dtype=np.intp)
    ids[order] = np.repeat(dense.reshape(-1), sizes)
    return ids


def bin_means(targets: ArrayLike, scores: ArrayLike, k: int) -> np.ndarray:
    """Each record receives the mean target of its equal-count score bin."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    ids = rank_bins(scores, k)
    counts = np.bincount(ids)
    sums = np.bincount(ids, weights=t)
    return (sums / counts)[ids]


@dataclass(frozen=True)
class BinCalibrator:
    """Piecewise-constant map from score to the training mean response.

    ``upper`` holds the largest training score in each bin; a new score goes
    to the first bin whose upper edge is not below it (the last bin if none).
    """

    upper: np.ndarray
    means: np.ndarray

    @classmethod
    def fit(cls, responses: ArrayLike, scores: ArrayLike, k: int) -> "BinCalibrator":
        y = np.asarray(responses, dtype=np.float64).reshape(-1)
        s = np.asarray(scores, dtype=np.float64).reshape(-1)
        ids = rank_bins(s, k)
        nb = int(ids.max()) + 1
        upper = np.full(nb, -np.inf)
        np.maximum.at(upper, ids, s)
        means = np.bincount(ids, weights=y) / np.bincount(ids)
        return cls(upper, means)

    def predict(self, scores: ArrayLike) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64).reshape(-1)
        idx = np.searchsorted(self.upper[:-1], s, side="left")
        return self.means[idx]


def pava(values: ArrayLike, weights: ArrayLike | None = None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit to ``values`` in the given order.

    Adjacent blocks are pooled while the left mean is >= the right mean, so
    output blocks have strictly increasing levels.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    sums: list[float] = []
    wts: list[float] = []
    lens: list[int] = []
    for vi, wi in zip((v * w).tolist(), w.tolist()):
        s, ww, ln = vi, wi, 1
        while sums and sums[-1] * ww >= s * wts[-1]:
            s += sums.pop()
            ww += wts.pop()
            ln += lens.pop()
        sums.append(s)
        wts.append(ww)
        lens.append(ln)
    levels = np.array(sums) / np.array(wts)
    return np.repeat(levels, lens)


@dataclass(frozen=True)
class Isotonic:
    """Monotone regression of responses on prediction rank (PAVA)."""


@dataclass(frozen=True)
class EqualCountBins:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInput("EqualCountBins needs k >= 1")


def parse_method(text: str) -> Isotonic | EqualCountBins:
    """``"isotonic"`` or ``"bins:<k>"``."""
    text = text.strip().lower()
    if text == "isotonic":
        return Isotonic()
    match = re.fullmatch(r"bins:(\d+)", text)
    if match:
        return EqualCountBins(int(match.group(1)))
    raise InvalidInput(f"unknown recalibration method {text!r}")


def recalibrate(dataset: Dataset, method: Isotonic | EqualCountBins | None = None) -> np.ndarray:
    """In-sample estimate of ``E[Y | prediction]`` for every record.

    Tied predictions always receive the same output.  The output mean equals
    the response mean up to rounding, and the output is non-decreasing in the
    prediction: ``EqualCountBins`` pools neighbouring bins whose means are out
    of order, which makes the map idempotent.
    """
    method = Isotonic() if method is None else method
    y = dataset.responses
    m = dataset.predictions
    if isinstance(method, EqualCountBins):
        # bins out of order are pooled; otherwise re-binning the output would regroup records
        ids = rank_bins(m, method.k)
        counts = np.bincount(ids)
        fitted = pava(np.bincount(ids, weights=y) / counts, counts.astype(np.float64))
        return fitted[ids]
    if not isinstance(method, Isotonic):
        raise InvalidInput(f"unknown recalibration method {method!r}")
    order = stable_order(m)
    starts, sizes = tie_groups(m[order])
    group_means = np.add.reduceat(y[order], starts) / sizes
    fitted = pava(group_means, sizes.astype(np.float64))
    out = np.empty(dataset.n, dtype=np.float64)
    out[order] = np.repeat(fitted, sizes)
    return out


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    mean_prediction: float
    mean_response: float
    count: int


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[CalibrationBin, ...]
    max_abs_gap: float
    global_bias: float
    mean_response: float
    tol: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    @property
    def relative_gap(self) -> float:
        return self.max_abs_gap / self.mean_response

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bins"] = [asdict(b) for b in self.bins]
        d["relative_gap"] = self.relative_gap
        d["verdict"] = self.verdict
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def bins_to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lower,upper,mean_prediction,mean_response,count\n")
        for b in self.bins:
            buf.write(f"{b.lower!r},{b.upper!r},{b.mean_prediction!r},{b.mean_response!r},{b.count}\n")
        return buf.getvalue()


def calibration_report(dataset: Dataset, num_bins: int = 10, tol: float = 1e-2) -> CalibrationReport:
    """Binned check of ``prediction == E[Y | prediction]``.

    ``tol`` is relative to the mean response: the verdict passes when both the
    largest bin gap and the global bias are within ``tol * mean(y)``.
    """
    if num_bins < 2:
        raise InvalidInput("num_bins must be at least 2")
    if dataset.n < num_bins:
        raise InvalidInput(f"n={dataset.n} is smaller than num_bins={num_bins}")
    y = dataset.responses
    m = dataset.predictions
    ids = rank_bins(m, num_bins)
    counts = np.bincount(ids)
    mp = np.bincount(ids, weights=m) / counts
    mr = np.bincount(ids, weights=y) / counts
    lo = np.full(counts.size, np.inf)
    hi = np.full(counts.size, -np.inf)
    np.minimum.at(lo, ids, m)
    np.maximum.at(hi, ids, m)
    bins = tuple(
        CalibrationBin(float(lo[b]), float(hi[b]), float(mp[b]), float(mr[b]), int(counts[b]))
        for b in range(counts.size)
    )
    gap = float(np.max(np.abs(mp - mr)))
    bias = float(np.mean(m) - np.mean(y))
    ybar = float(np.mean(y))
    passed = gap <= tol * ybar and abs(bias) <= tol * ybar
    return CalibrationReport(bins, gap, bias, ybar, tol, passed)


class Dominance(enum.Enum):
    DOMINATES = "dominates"
    DOMINATED_BY = "dominated_by"
    INCOMPARABLE = "incomparable"
    EQUAL = "equal"


@dataclass(frozen=True)
class ConvexOrderReport:
    thresholds: np.ndarray
    stop_loss_a: np.ndarray
    stop_loss_b: np.ndarray
    verdict: Dominance
    slack: float

    @property
    def gaps(self) -> np.ndarray:
        return self.stop_loss_a - self.stop_loss_b

    @property
    def violations(self) -> int:
        """Thresholds where ``a`` falls below ``b`` by more than the slack."""
        return int(np.count_nonzero(self.gaps < -self.slack))


def stop_loss(values: ArrayLike, thresholds: ArrayLike) -> np.ndarray:
    """``mean((values - K)_+)`` for each threshold ``K``."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    k = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    return np.mean(np.maximum(v[None, :] - k[:, None], 0.0), axis=1)


def convex_order_check(
    pred_a: ArrayLike,
    pred_b: ArrayLike,
    grid: ArrayLike | None = None,
    slack: float = 1e-9,
    num_thresholds: int = 50,
) -> ConvexOrderReport:
    """Compare two equal-mean samples in convex order via stop-loss transforms.

    At equal means, ``a`` dominates ``b`` in convex order iff its stop-loss
    transform is pointwise at least as large.  Only the given thresholds are
    checked (default: ``num_thresholds`` points spanning the pooled range).
    """
    a = np.asarray(pred_a, dtype=np.float64).reshape(-1)
    b = np.asarray(pred_b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise InvalidInput("convex_order_check needs non-empty samples")
    ma, mb = float(np.mean(a)), float(np.mean(b))
    if abs(ma - mb) > 1e-9 * max(1.0, abs(ma), abs(mb)):
        raise PreconditionFailed(f"means differ ({ma!r} vs {mb!r}); convex order needs equal means")
    if grid is None:
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        grid = np.linspace(lo, hi, num_thresholds)
    k = np.asarray(grid, dtype=np.float64).reshape(-1)
    sa = stop_loss(a, k)
    sb = stop_loss(b, k)
    gaps = sa - sb
    if np.all(np.abs(gaps) <= slack):
        verdict = Dominance.EQUAL
    elif np.all(gaps >= -slack):
        verdict = Dominance.DOMINATES
    elif np.all(gaps <= slack):
        verdict = Dominance.DOMINATED_BY
    else:
        verdict = Dominance.INCOMPARABLE
    return ConvexOrderReport(k, sa, sb, verdict, slack)
