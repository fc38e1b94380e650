"""Empirical CAP, mirrored CAP, Lorenz and self-CAP curves.

All curves are step functions of the order statistics evaluated on a grid of
``alpha`` values in (0, 1).  The default grid is the sample resolution
``alpha = j/n``; at those points the CAP equals the response share of the top
``j`` predictions, and the Lorenz curve the value share of the bottom ``j``.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .core import (
    Dataset,
    DegenerateResponse,
    InvalidInput,
    TiePolicy,
    TiesNotAllowed,
    ceil_indices,
    group_average,
    has_ties,
    stable_order,
)


class CurveKind(enum.Enum):
    CAP = "cap"
    MIRRORED_CAP = "mirrored-cap"
    LORENZ = "lorenz"
    SELF_CAP = "self-cap"


class ResponseType(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True, eq=False)
class Curve:
    alphas: np.ndarray
    values: np.ndarray
    kind: CurveKind

    def integral(self) -> float:
        """Trapezoid area after pinning the curve to (0, 0) and (1, 1)."""
        a = np.concatenate(([0.0], self.alphas, [1.0]))
        v = np.concatenate(([0.0], self.values, [1.0]))
        return float(np.sum(np.diff(a) * (v[1:] + v[:-1])) / 2.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("alpha,value\n")
        for a, v in zip(self.alphas.tolist(), self.values.tolist()):
            buf.write(f"{a!r},{v!r}\n")
        return buf.getvalue()


def sample_grid(n: int) -> np.ndarray:
    """``j/n`` for ``j = 1, ..., n-1``."""
    return np.arange(1, n, dtype=np.float64) / n


def _check_grid(grid: ArrayLike | None, n: int) -> np.ndarray:
    if grid is None:
        return sample_grid(n)
    g = np.asarray(grid, dtype=np.float64).reshape(-1)
    if g.size == 0:
        raise InvalidInput("grid is empty")
    if np.any(~np.isfinite(g)) or np.any(g <= 0.0) or np.any(g >= 1.0):
        raise InvalidInput("grid alphas must lie strictly inside (0, 1)")
    if np.any(np.diff(g) <= 0.0):
        raise InvalidInput("grid alphas must be strictly increasing")
    return g


def _cumulative_shares(sorted_values: np.ndarray) -> np.ndarray:
    """Shares of the total held by the first ``j`` entries, ``j = 0..n``."""
    cum = np.concatenate(([0.0], np.cumsum(sorted_values)))
    total = cum[-1]
    if not total > 0:
        raise DegenerateResponse("total is zero")
    return cum / total


def top_shares(dataset: Dataset, tie_policy: TiePolicy = TiePolicy.MIDRANK) -> np.ndarray:
    """Response share captured by the ``j`` largest predictions, ``j = 0..n``.

    Only the ordering and tie structure of the predictions are used, never
    their values, so any strictly increasing transform of the predictions
    gives bit-identical output.
    """
    m = dataset.predictions
    if tie_policy is TiePolicy.STRICT and has_ties(m):
        raise TiesNotAllowed("tied predictions under strict tie policy")
    order = stable_order(-m)
    y = dataset.responses[order]
    if tie_policy is TiePolicy.MIDRANK:
        y = group_average(m[order], y)
    return _cumulative_shares(y)


def cap_curve(
    dataset: Dataset,
    grid: ArrayLike | None = None,
    tie_policy: TiePolicy = TiePolicy.MIDRANK,
) -> Curve:
    """Share of total response held by records ranked in the top ``alpha``.

    A record counts at ``alpha`` when its prediction is strictly above the
    ``ceil((1 - alpha) n)``-th prediction order statistic.  Under
    ``MIDRANK`` a tied group at the cutoff contributes its mean response per
    selected slot.
    """
    n = dataset.n
    g = _check_grid(grid, n)
    shares = top_shares(dataset, tie_policy)
    selected = n - ceil_indices((1.0 - g) * n)
    return Curve(g, shares[np.clip(selected, 0, n)], CurveKind.CAP)


def mirrored_cap(curve: Curve) -> Curve:
    """Reflect a CAP at the diagonal: ``alpha -> 1 - CAP(1 - alpha)``."""
    if curve.kind is CurveKind.CAP:
        kind = CurveKind.MIRRORED_CAP
    elif curve.kind is CurveKind.MIRRORED_CAP:
        kind = CurveKind.CAP
    else:
        raise InvalidInput(f"cannot mirror a {curve.kind.value} curve")
    return Curve(1.0 - curve.alphas[::-1], 1.0 - curve.values[::-1], kind)


def lorenz_curve(values: ArrayLike, grid: ArrayLike | None = None) -> Curve:
    """Share of the total held by the ``ceil(alpha n)`` smallest values."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise InvalidInput("lorenz_curve needs values")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise InvalidInput("Lorenz values must be finite and non-negative")
    n = v.size
    g = _check_grid(grid, n)
    shares = _cumulative_shares(np.sort(v))
    idx = ceil_indices(g * n)
    return Curve(g, shares[np.clip(idx, 0, n)], CurveKind.LORENZ)


def self_cap_curve(responses: ArrayLike, grid: ArrayLike | None = None) -> Curve:
    """CAP of the responses ranked by themselves (the perfect-ordering curve)."""
    y = np.asarray(responses, dtype=np.float64).reshape(-1)
    ds = Dataset(y, y)
    curve = cap_curve(ds, grid, TiePolicy.MIDRANK)
    return Curve(curve.alphas, curve.values, CurveKind.SELF_CAP)


def self_cap_integral(
    responses: Sequence[float] | np.ndarray,
    response_type: ResponseType = ResponseType.CONTINUOUS,
) -> float:
    """Area under the self-CAP of the responses.

    For binary responses the self-CAP rises linearly from the share of zeros
    to 1, which gives the closed form ``1 - sum(y) / (2n)``.
    """
    y = np.asarray(responses, dtype=np.float64).reshape(-1)
    if response_type is ResponseType.BINARY:
        if not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidInput("binary self-CAP needs responses in {0, 1}")
        if y.size == 0 or not y.sum() > 0:
            raise DegenerateResponse("no positive responses")
        return 1.0 - y.sum() / (2.0 * y.size)
    return self_cap_curve(y).integral()
