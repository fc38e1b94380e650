"""Bregman divergences and expected scores.

Scores follow the maximisation convention: the score of a forecast is the
negative mean Bregman divergence, so higher is better and a perfect forecast
scores 0.
"""

from __future__ import annotations

import enum

import numpy as np
from numpy.typing import ArrayLike

from .core import Dataset, DomainError


class ConvexGenerator(enum.Enum):
    """Closed set of convex functions ``psi`` generating a Bregman divergence.

    ``SQUARED``: ``psi(y) = y**2`` on the real line.
    ``POISSON_DEVIANCE``: ``psi(y) = y log y`` with ``0 log 0 = 0``; ``y >= 0``, ``m > 0``.
    ``GAMMA_DEVIANCE``: ``psi(y) = -log y``; ``y > 0``, ``m > 0``.
    """

    SQUARED = "squared"
    POISSON_DEVIANCE = "poisson"
    GAMMA_DEVIANCE = "gamma"

    def psi(self, y: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self is ConvexGenerator.SQUARED:
            return y * y
        if self is ConvexGenerator.POISSON_DEVIANCE:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
        return -np.log(y)

    def dpsi(self, m: ArrayLike) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if self is ConvexGenerator.SQUARED:
            return 2.0 * m
        if self is ConvexGenerator.POISSON_DEVIANCE:
            return np.log(m) + 1.0
        return -1.0 / m

    def in_domain(self, y: ArrayLike, m: ArrayLike) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        m = np.asarray(m, dtype=np.float64)
        ok = np.isfinite(y) & np.isfinite(m)
        if self is ConvexGenerator.POISSON_DEVIANCE:
            ok &= (y >= 0) & (m > 0)
        elif self is ConvexGenerator.GAMMA_DEVIANCE:
            ok &= (y > 0) & (m > 0)
        return ok


def bregman_array(gen: ConvexGenerator, y: ArrayLike, m: ArrayLike) -> np.ndarray:
    """Elementwise divergence; ``nan`` where ``(y, m)`` is outside the domain.

    Closed forms are used instead of ``psi(y) - psi(m) - psi'(m)(y - m)`` to
    avoid cancellation.
    """
    y, m = np.broadcast_arrays(np.asarray(y, dtype=np.float64), np.asarray(m, dtype=np.float64))
    ok = gen.in_domain(y, m)
    ys = np.where(ok, y, 1.0)
    ms = np.where(ok, m, 1.0)
    if gen is ConvexGenerator.SQUARED:
        d = (ys - ms) ** 2
    elif gen is ConvexGenerator.POISSON_DEVIANCE:
        with np.errstate(divide="ignore", invalid="ignore"):
            ylog = np.where(ys > 0, ys * np.log(np.where(ys > 0, ys, 1.0) / ms), 0.0)
        d = ylog - ys + ms
    else:
        r = ys / ms
        d = r - np.log(r) - 1.0
    # rounding can leave tiny negatives
    d = np.maximum(d, 0.0)
    return np.where(ok, d, np.nan)


def bregman(gen: ConvexGenerator, y: float, m: float) -> float:
    """``D_psi(y, m) = psi(y) - psi(m) - psi'(m) (y - m)``."""
    d = float(bregman_array(gen, y, m))
    if np.isnan(d):
        raise DomainError(f"({y!r}, {m!r}) outside the {gen.value} domain")
    return d


def expected_score(dataset: Dataset, gen: ConvexGenerator) -> float:
    """``-(1/n) sum_i D_psi(y_i, m_i)``."""
    d = bregman_array(gen, dataset.responses, dataset.predictions)
    bad = np.flatnonzero(np.isnan(d))
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"record {i}: (y={dataset.responses[i]!r}, m={dataset.predictions[i]!r}) "
            f"outside the {gen.value} domain"
        )
    return -float(np.mean(d))


def masked_score(gen: ConvexGenerator, y: ArrayLike, m: ArrayLike) -> tuple[float, int]:
    """Score over in-domain records only, with the number of records dropped."""
    d = bregman_array(gen, y, m)
    keep = ~np.isnan(d)
    dropped = int(d.size - np.count_nonzero(keep))
    if not keep.any():
        return float("nan"), dropped
    return -float(np.mean(d[keep])), dropped
