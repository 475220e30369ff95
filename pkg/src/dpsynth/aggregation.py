"""Numeric kernels for private logit aggregation.

Everything here is a pure function of its arguments: shift-and-clip of a
logit vector, the clipped componentwise mean, and the three adjacent order
statistics around the componentwise median (lower neighbor, median, upper
neighbor). All kernels operate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatchError, InvalidInputError

__all__ = [
    "MedianTriple",
    "clip",
    "clip_stack",
    "aggregate_mean",
    "median_triple",
    "aggregate_median",
]


@dataclass(frozen=True)
class MedianTriple:
    """Componentwise median of a batch of vectors plus its two neighbors.

    ``left <= mid <= right`` holds componentwise. For a batch of identical
    vectors the three are equal, which is what makes the per-token privacy
    cost of a fully homogeneous batch exactly zero.
    """

    left: np.ndarray
    mid: np.ndarray
    right: np.ndarray


def _validated(vectors) -> np.ndarray:
    z = np.asarray(vectors, dtype=np.float64)
    if z.size == 0:
        raise EmptyBatchError("expected at least one logit vector")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logit values must be finite")
    return z


def _check_bound(bound: float) -> float:
    bound = float(bound)
    if not np.isfinite(bound) or bound <= 0.0:
        raise InvalidInputError(f"clip bound must be a positive real, got {bound!r}")
    return bound


def clip(logits, bound: float) -> np.ndarray:
    """Shift a logit vector so its maximum equals ``bound``, then floor at ``-bound``.

    Every output entry lies in ``[-bound, bound]``, the maximum is exactly
    ``bound``, and the argmax set is unchanged.
    """
    z = _validated(logits)
    if z.ndim != 1:
        raise InvalidInputError(f"clip expects a 1-D logit vector, got shape {z.shape}")
    bound = _check_bound(bound)
    return np.maximum(-bound, z - z.max() + bound)


def clip_stack(vectors, bound: float) -> np.ndarray:
    """Apply :func:`clip` to each row of a ``(batch, vocab)`` array."""
    z = _validated(vectors)
    if z.ndim == 1:
        z = z[np.newaxis, :]
    if z.ndim != 2:
        raise InvalidInputError(f"expected a stack of logit vectors, got shape {z.shape}")
    bound = _check_bound(bound)
    return np.maximum(-bound, z - z.max(axis=1, keepdims=True) + bound)


def aggregate_mean(vectors, bound: float) -> np.ndarray:
    """Componentwise arithmetic mean of the clipped vectors."""
    return clip_stack(vectors, bound).mean(axis=0)


def median_triple(vectors, bound: float) -> MedianTriple:
    """Clip each vector, then take the median and its adjacent order statistics.

    Per component, with the ``m`` clipped values sorted ascending:

    * ``m`` odd, ``m >= 3``: the three middle values are left, mid, right.
    * ``m`` even: the two middle values ``a <= b`` give left ``a``,
      mid ``(a + b) / 2``, right ``b``.
    * ``m == 1``: all three equal the single value.

    Duplicates count with multiplicity; no deduplication happens.
    """
    clipped = clip_stack(vectors, bound)
    ordered = np.sort(clipped, axis=0)
    m = ordered.shape[0]
    if m == 1:
        row = ordered[0]
        return MedianTriple(left=row.copy(), mid=row.copy(), right=row.copy())
    half = m // 2
    if m % 2 == 1:
        return MedianTriple(
            left=ordered[half - 1].copy(),
            mid=ordered[half].copy(),
            right=ordered[half + 1].copy(),
        )
    lo = ordered[half - 1]
    hi = ordered[half]
    return MedianTriple(left=lo.copy(), mid=(lo + hi) / 2.0, right=hi.copy())


def aggregate_median(vectors, bound: float) -> np.ndarray:
    """Componentwise median of the clipped vectors."""
    return median_triple(vectors, bound).mid
