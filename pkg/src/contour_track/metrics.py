"""Coverage scores of a tracked region against the ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DimensionError, EmptyRegionError
from .imagecore import as_mask


@dataclass(frozen=True)
class CoverageScore:
    drc: float
    urc: float
    intersection_area: int
    tracked_area: int
    desired_area: int


def coverage(tracked, desired) -> CoverageScore:
    """Desired region coverage (DRC) and undesired region coverage (URC).

    DRC is the fraction of the desired region covered by the tracked one;
    URC is the fraction of the tracked region lying outside the desired one.
    """
    tracked = as_mask(tracked)
    desired = as_mask(desired)
    if tracked.shape != desired.shape:
        raise DimensionError(f"mask shapes differ: {tracked.shape} vs {desired.shape}")
    t = int(np.count_nonzero(tracked))
    d = int(np.count_nonzero(desired))
    if t == 0 or d == 0:
        raise EmptyRegionError("coverage needs non-empty tracked and desired masks")
    inter = int(np.count_nonzero(tracked & desired))
    return CoverageScore(drc=inter / d, urc=(t - inter) / t,
                         intersection_area=inter, tracked_area=t, desired_area=d)


def mean_coverage(scores: Iterable[CoverageScore]) -> tuple[float, float]:
    """Per-frame arithmetic mean of ``(drc, urc)``."""
    scores = list(scores)
    if not scores:
        raise ValueError("no scores to average")
    return (float(np.mean([s.drc for s in scores])), float(np.mean([s.urc for s in scores])))
