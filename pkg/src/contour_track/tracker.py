"""Frame-to-frame region tracking by level-set gradient descent."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import functionals as fn
from . import levelset
from .errors import ChannelMismatchError, DegenerateMaskError, DimensionError, EmptyRegionError
from .imagecore import as_image, as_mask
from .metrics import CoverageScore, coverage
from .statistics import DEFAULT_BINS

log = logging.getLogger(__name__)

# Calibrated on the synthetic benchmarks; the acceptance suite pins them.
DEFAULT_WEIGHTS: dict[str, dict[str, float]] = {
    "1": {"lambda1": 1000.0, "lambda": 0.02},
    "1b": {"lambda1": 1000.0, "lambda2": 0.002, "lambda": 0.02},
    "2": {"lambda1": 50.0, "lambda": 0.02},
    "2b": {"lambda1": 20.0, "lambda2": 20.0, "lambda": 0.02},
    "3": {"lambda1": 10.0, "lambda2": 10.0, "lambda": 0.02},
    "4": {"lambda1": 10.0, "lambda2": 10.0, "lambda3": 10.0, "lambda": 0.02},
    "4b": {"lambda1": 10.0, "lambda2": 10.0, "lambda3": 10.0, "lambda4": 0.002, "lambda": 0.02},
}


@dataclass
class TrackConfig:
    design: str = "1b"
    weights: Mapping[str, float] | Sequence[float] | None = None
    max_iterations: int = 500
    convergence_tol: float = 1e-5
    convergence_window: int = 10
    reinit_every: int = 20
    histogram_bins: int = DEFAULT_BINS

    def __post_init__(self):
        self.design = fn.normalize_design(self.design)
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if self.reinit_every < 1:
            raise ValueError("reinit_every must be >= 1")
        if self.histogram_bins < 2:
            raise ValueError("histogram_bins must be >= 2")

    def resolved_weights(self) -> tuple[float, ...]:
        weights = self.weights
        if weights is None:
            weights = DEFAULT_WEIGHTS[self.design]
        elif isinstance(weights, Mapping):
            weights = {**DEFAULT_WEIGHTS[self.design], **weights}
        return fn.weight_vector(self.design, dict(weights) if isinstance(weights, Mapping) else weights)

    def terms(self) -> list[fn.EnergyTerm]:
        return fn.make_design(self.design, self.resolved_weights())


@dataclass
class FrameReport:
    frame_index: int
    final_mask: np.ndarray
    iterations: int
    energy_trace: list[float]
    initial_energy: float
    converged: bool
    lost_track: bool
    final_energy: float = math.nan
    best_iteration: int = 0
    score: CoverageScore | None = None
    final_grid: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass
class TrackReport:
    reference: fn.RefStats
    frames: list[FrameReport] = field(default_factory=list)

    def mean_coverage(self) -> tuple[float, float] | None:
        scores = [f.score for f in self.frames if f.score is not None]
        if not scores:
            return None
        return (float(np.mean([s.drc for s in scores])), float(np.mean([s.urc for s in scores])))

    @property
    def total_iterations(self) -> int:
        return sum(f.iterations for f in self.frames)


def _check_nondegenerate(mask: np.ndarray) -> None:
    n = np.count_nonzero(mask)
    if n == 0 or n == mask.size:
        raise DegenerateMaskError("mask is empty or covers the whole frame")


def build_reference(img0, r0, cfg: TrackConfig) -> fn.RefStats:
    img0 = as_image(img0)
    r0 = as_mask(r0, img0.shape)
    _check_nondegenerate(r0)
    if cfg.design in fn.COLOR_DESIGNS and img0.ndim != 3:
        raise ChannelMismatchError(f"design {cfg.design} needs a 3-channel image")
    return fn.reference_stats(img0, r0, cfg.histogram_bins)


def _degenerate(u: np.ndarray) -> bool:
    n = np.count_nonzero(u <= 0)
    return n == 0 or n == u.size


class LostTrack(Exception):
    """The region vanished or filled the frame during descent."""

    def __init__(self, u: np.ndarray):
        super().__init__("region lost")
        self.u = u


def descend(features: fn.FrameFeatures, u: np.ndarray, ref: fn.RefStats,
            terms: Sequence[fn.EnergyTerm], reinit_every: int = 20):
    """Yield ``(u, energy)`` after each gradient-descent iteration, forever.

    Raises :class:`LostTrack` when the zero level set disappears.
    """
    lam = fn.curvature_weight(terms)
    state = fn.TermState(features, u, ref)
    k = 0
    while True:
        k += 1
        v = fn.total_speed(terms, state)
        u = levelset.evolve_step(u, v, lam, levelset.stable_dt(v, lam))
        if _degenerate(u):
            raise LostTrack(u)
        if k % reinit_every == 0:
            u = levelset.reinitialize(u)
        state = fn.TermState(features, u, ref)
        try:
            energy = fn.total_energy(terms, state)
        except EmptyRegionError:
            raise LostTrack(u) from None
        yield u, energy


def track_frame(ref: fn.RefStats, prev_mask, img, cfg: TrackConfig,
                frame_index: int = 0, terms: Sequence[fn.EnergyTerm] | None = None,
                ) -> tuple[np.ndarray, FrameReport]:
    """Evolve the previous mask on ``img`` until the energy stops decreasing.

    The frame has converged once the energy has dropped by less than
    ``convergence_tol`` (relative) over the last ``convergence_window``
    iterations. The returned mask is the lowest-energy state visited, which
    may be the starting one: on a pixel grid the descent can settle into a
    small limit cycle, and its last iterate is then an arbitrary point of it.
    Losing the region (empty or full mask) ends the frame with
    ``lost_track=True`` rather than raising.
    """
    img = as_image(img)
    prev_mask = as_mask(prev_mask, img.shape)
    _check_nondegenerate(prev_mask)
    if cfg.design in fn.COLOR_DESIGNS and img.ndim != 3:
        raise ChannelMismatchError(f"design {cfg.design} needs a 3-channel image")
    terms = list(terms) if terms is not None else cfg.terms()
    features = fn.FrameFeatures(img, ref.bin_count)

    u = levelset.init_signed_distance(prev_mask)
    initial = fn.total_energy(terms, fn.TermState(features, u, ref))
    history = [initial]
    trace: list[float] = []
    best_u, best_energy, best_k = u, initial, 0
    converged = lost = False
    window = cfg.convergence_window
    steps = descend(features, u, ref, terms, cfg.reinit_every)
    try:
        for u, energy in steps:
            trace.append(energy)
            history.append(energy)
            if energy < best_energy:
                best_u, best_energy, best_k = u, energy, len(trace)
            if len(history) > window:
                old = history[-1 - window]
                if (old - energy) / max(abs(old), 1e-12) < cfg.convergence_tol:
                    converged = True
                    break
            if len(trace) >= cfg.max_iterations:
                break
    except LostTrack as exc:
        lost = True
        best_u, best_energy, best_k = exc.u, math.nan, len(trace) + 1
        trace.append(math.nan)

    mask = levelset.extract_mask(best_u)
    log.debug("frame %d: %d iterations, converged=%s lost=%s, best at %d", frame_index,
              len(trace), converged, lost, best_k)
    report = FrameReport(frame_index, mask, len(trace), trace, initial, converged, lost,
                         final_energy=best_energy, best_iteration=best_k, final_grid=best_u)
    return mask, report


def track_sequence(img0, r0, frames: Sequence, cfg: TrackConfig,
                   ground_truth: Sequence | None = None, warm_start: bool = True) -> TrackReport:
    """Track ``r0`` from ``img0`` through ``frames``.

    Each frame starts from the previous frame's result (or from ``r0`` when
    ``warm_start`` is false, or after the track was lost). Reference
    statistics come from ``img0`` only and are never updated.
    """
    if len(frames) == 0:
        raise ValueError("no frames to track")
    img0 = as_image(img0)
    r0 = as_mask(r0, img0.shape)
    for k, f in enumerate(frames):
        if np.shape(f)[:2] != img0.shape[:2]:
            raise DimensionError(f"frame {k} has shape {np.shape(f)}, expected {img0.shape[:2]}")
    if ground_truth is not None and len(ground_truth) != len(frames):
        raise ValueError("ground truth must have one mask per frame")
    ref = build_reference(img0, r0, cfg)
    terms = cfg.terms()
    report = TrackReport(ref)
    prev = r0
    for k, img in enumerate(frames):
        start = prev if warm_start else r0
        mask, frame = track_frame(ref, start, img, cfg, frame_index=k, terms=terms)
        if ground_truth is not None and not frame.lost_track:
            frame.score = coverage(mask, ground_truth[k])
        report.frames.append(frame)
        prev = r0 if frame.lost_track else mask
    return report
