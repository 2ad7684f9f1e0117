"""Region histograms and Kullback-Leibler divergence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BinCountMismatchError, EmptyRegionError
from .imagecore import as_mask

DEFAULT_BINS = 32
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class Histogram:
    """Floored, normalised distribution of a [0, 1] feature over a region.

    ``raw`` keeps the normalised counts before flooring; ``bins`` is what the
    divergence uses.
    """

    bins: np.ndarray
    raw: np.ndarray
    floor_epsilon: float = DEFAULT_FLOOR

    @property
    def bin_count(self) -> int:
        return len(self.bins)

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return (self.floor_epsilon == other.floor_epsilon
                and np.array_equal(self.bins, other.bins)
                and np.array_equal(self.raw, other.raw))

    __hash__ = None


def bin_index(values: np.ndarray, bin_count: int) -> np.ndarray:
    """Bin of each value: ``floor(z * bin_count)`` clamped to the valid range."""
    idx = np.floor(np.asarray(values, dtype=np.float64) * bin_count).astype(np.int64)
    return np.clip(idx, 0, bin_count - 1)


def from_counts(counts: np.ndarray, floor_epsilon: float = DEFAULT_FLOOR) -> Histogram:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyRegionError("histogram of an empty region")
    raw = counts / total
    floored = raw + floor_epsilon
    return Histogram(bins=floored / floored.sum(), raw=raw, floor_epsilon=floor_epsilon)


def build_histogram(feature: np.ndarray, mask: np.ndarray, bin_count: int = DEFAULT_BINS,
                    floor_epsilon: float = DEFAULT_FLOOR) -> Histogram:
    feature = np.asarray(feature, dtype=np.float64)
    if feature.ndim != 2:
        raise ValueError("histogram feature must be a single-channel image")
    if bin_count < 2:
        raise ValueError("bin_count must be at least 2")
    mask = as_mask(mask, feature.shape)
    if not mask.any():
        raise EmptyRegionError("histogram of an empty region")
    counts = np.bincount(bin_index(feature[mask], bin_count), minlength=bin_count)
    return from_counts(counts, floor_epsilon)


def kl_divergence(p: Histogram, q: Histogram) -> float:
    """``sum_b p(b) ln(p(b) / q(b))`` with the convention ``0 ln 0 = 0``."""
    if p.bin_count != q.bin_count:
        raise BinCountMismatchError(f"{p.bin_count} bins vs {q.bin_count} bins")
    pb, qb = p.bins, q.bins
    nz = pb > 0
    value = float(np.sum(pb[nz] * np.log(pb[nz] / qb[nz])))
    # Rounding can leave a tiny negative residue when p == q.
    return max(value, 0.0)


def complement_mask(mask: np.ndarray) -> np.ndarray:
    return ~as_mask(mask)
