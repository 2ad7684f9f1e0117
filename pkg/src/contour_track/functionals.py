"""Energy terms for region tracking and the designs assembled from them.

Every term exposes its energy on the current state and the outward normal
speed of its gradient descent flow (``v > 0`` grows the region). The speeds
are first variations of the region integrals with respect to moving the
boundary outward by one pixel; ``tests/test_functionals.py`` checks each of
them against brute-force single-pixel flips.

The length term is the exception: its flow is curvature motion, which the
level-set update discretises as a parabolic term, so :func:`total_speed`
leaves it out and :func:`curvature_weight` reports its weight instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import levelset
from .errors import ChannelMismatchError, EmptyRegionError, UnknownDesignError, WeightArityError
from .imagecore import as_image, gradient_magnitude, to_grayscale
from .statistics import DEFAULT_BINS, DEFAULT_FLOOR, Histogram, bin_index, build_histogram, from_counts, kl_divergence

SPEED_BAND = 3.0


class FrameFeatures:
    """Per-frame features shared by all iterations on that frame."""

    def __init__(self, image, bin_count: int = DEFAULT_BINS):
        self.image = as_image(image)
        self.bin_count = bin_count

    @property
    def is_color(self) -> bool:
        return self.image.ndim == 3

    @cached_property
    def gray(self) -> np.ndarray:
        return to_grayscale(self.image)

    @cached_property
    def gradient(self) -> np.ndarray:
        return gradient_magnitude(self.gray)

    @cached_property
    def gray_bins(self) -> np.ndarray:
        return bin_index(self.gray, self.bin_count)

    @cached_property
    def gradient_bins(self) -> np.ndarray:
        return bin_index(self.gradient, self.bin_count)

    @cached_property
    def color_bins(self) -> tuple[np.ndarray, ...]:
        if not self.is_color:
            raise ChannelMismatchError("color terms need a 3-channel image")
        return tuple(bin_index(self.image[:, :, c], self.bin_count) for c in range(3))


@dataclass(frozen=True)
class RefStats:
    """Everything the energies need from the reference frame and region."""

    ref_mean: float
    ref_area: float
    ref_intensity_hist: Histogram
    ref_complement_hist: Histogram | None
    ref_grad_hist: Histogram
    ref_color_hists: tuple[Histogram, Histogram, Histogram] | None
    source_frame: int = 0
    bin_count: int = DEFAULT_BINS
    floor_epsilon: float = DEFAULT_FLOOR


def reference_stats(image, mask, bin_count: int = DEFAULT_BINS,
                    floor_epsilon: float = DEFAULT_FLOOR, source_frame: int = 0) -> RefStats:
    feats = FrameFeatures(image, bin_count)
    mask = np.asarray(mask, dtype=bool)
    area = np.count_nonzero(mask)
    if area == 0:
        raise EmptyRegionError("reference region is empty")
    comp = ~mask
    colors = None
    if feats.is_color:
        colors = tuple(build_histogram(feats.image[:, :, c], mask, bin_count, floor_epsilon)
                       for c in range(3))
    return RefStats(
        ref_mean=float(feats.gray[mask].mean()),
        ref_area=float(area),
        ref_intensity_hist=build_histogram(feats.gray, mask, bin_count, floor_epsilon),
        ref_complement_hist=(build_histogram(feats.gray, comp, bin_count, floor_epsilon)
                             if comp.any() else None),
        ref_grad_hist=build_histogram(feats.gradient, mask, bin_count, floor_epsilon),
        ref_color_hists=colors,
        source_frame=source_frame,
        bin_count=bin_count,
        floor_epsilon=floor_epsilon,
    )


class TermState:
    """Frozen snapshot of one iteration: frame features, level set, reference."""

    def __init__(self, features: FrameFeatures, grid: np.ndarray, ref: RefStats):
        self.features = features
        self.grid = np.asarray(grid, dtype=np.float64)
        self.ref = ref
        if self.grid.shape != features.image.shape[:2]:
            raise ValueError("level set and image dimensions differ")

    @classmethod
    def from_mask(cls, features: FrameFeatures, mask, ref: RefStats) -> "TermState":
        return cls(features, levelset.init_signed_distance(mask), ref)

    @cached_property
    def mask(self) -> np.ndarray:
        return levelset.extract_mask(self.grid)

    @cached_property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask))

    @cached_property
    def band(self) -> np.ndarray:
        return np.abs(self.grid) <= SPEED_BAND

    def require_region(self) -> None:
        if self.area == 0:
            raise EmptyRegionError("tracked region is empty")

    def require_complement(self) -> None:
        if self.area == self.mask.size:
            raise EmptyRegionError("tracked region covers the whole frame")

    def histogram(self, bins: np.ndarray, inside: bool = True) -> Histogram:
        sel = self.mask if inside else ~self.mask
        counts = np.bincount(bins[sel], minlength=self.ref.bin_count)
        return from_counts(counts, self.ref.floor_epsilon)

    @cached_property
    def mean(self) -> float:
        self.require_region()
        return float(self.features.gray[self.mask].mean())


def _banded(state: TermState, v: np.ndarray) -> np.ndarray:
    return np.where(state.band, v, 0.0)


def _kl_speed(state: TermState, ref_hist: Histogram, bins: np.ndarray, weight: float,
              inside: bool = True) -> np.ndarray:
    cur = state.histogram(bins, inside)
    ratio = ref_hist.bins[bins] / cur.bins[bins]
    if inside:
        return weight / state.area * (ratio - 1.0)
    return -weight / (state.mask.size - state.area) * (ratio - 1.0)


@dataclass(frozen=True)
class Length:
    weight: float

    def energy(self, state: TermState) -> float:
        state.require_region()
        return self.weight * levelset.perimeter(state.grid)

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        return _banded(state, -self.weight * levelset.curvature_field(state.grid))


@dataclass(frozen=True)
class MeanIntensity:
    weight: float

    def energy(self, state: TermState) -> float:
        return self.weight * (state.mean - state.ref.ref_mean) ** 2

    def speed(self, state: TermState) -> np.ndarray:
        mu1 = state.mean
        v = -2.0 * self.weight * (mu1 - state.ref.ref_mean) * (state.features.gray - mu1) / state.area
        return _banded(state, v)


@dataclass(frozen=True)
class AreaMatch:
    weight: float

    def energy(self, state: TermState) -> float:
        state.require_region()
        return self.weight * (state.area - state.ref.ref_area) ** 2

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        v = np.full(state.grid.shape, -2.0 * self.weight * (state.area - state.ref.ref_area))
        return _banded(state, v)


@dataclass(frozen=True)
class KLIntensity:
    weight: float

    def energy(self, state: TermState) -> float:
        state.require_region()
        cur = state.histogram(state.features.gray_bins)
        return self.weight * kl_divergence(state.ref.ref_intensity_hist, cur)

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        return _banded(state, _kl_speed(state, state.ref.ref_intensity_hist,
                                        state.features.gray_bins, self.weight))


@dataclass(frozen=True)
class KLComplement:
    weight: float

    def _ref(self, state: TermState) -> Histogram:
        if state.ref.ref_complement_hist is None:
            raise EmptyRegionError("reference region has an empty complement")
        return state.ref.ref_complement_hist

    def energy(self, state: TermState) -> float:
        state.require_region()
        state.require_complement()
        cur = state.histogram(state.features.gray_bins, inside=False)
        return self.weight * kl_divergence(self._ref(state), cur)

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        state.require_complement()
        return _banded(state, _kl_speed(state, self._ref(state), state.features.gray_bins,
                                        self.weight, inside=False))


@dataclass(frozen=True)
class KLGradient:
    weight: float

    def energy(self, state: TermState) -> float:
        state.require_region()
        cur = state.histogram(state.features.gradient_bins)
        return self.weight * kl_divergence(state.ref.ref_grad_hist, cur)

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        return _banded(state, _kl_speed(state, state.ref.ref_grad_hist,
                                        state.features.gradient_bins, self.weight))


@dataclass(frozen=True)
class KLColor:
    """Per-channel (R, G, B) divergences, weighted separately and summed."""

    weights: tuple[float, float, float]

    def _refs(self, state: TermState):
        if state.ref.ref_color_hists is None:
            raise ChannelMismatchError("reference statistics carry no color histograms")
        return state.ref.ref_color_hists

    def energy(self, state: TermState) -> float:
        state.require_region()
        total = 0.0
        for w, ref, bins in zip(self.weights, self._refs(state), state.features.color_bins):
            total += w * kl_divergence(ref, state.histogram(bins))
        return total

    def speed(self, state: TermState) -> np.ndarray:
        state.require_region()
        v = np.zeros(state.grid.shape)
        for w, ref, bins in zip(self.weights, self._refs(state), state.features.color_bins):
            v += _kl_speed(state, ref, bins, w)
        return _banded(state, v)


EnergyTerm = Union[Length, MeanIntensity, AreaMatch, KLIntensity, KLComplement, KLGradient, KLColor]


def term_energy(term: EnergyTerm, state: TermState) -> float:
    return term.energy(state)


def term_speed(term: EnergyTerm, state: TermState) -> np.ndarray:
    return term.speed(state)


def total_energy(terms: Sequence[EnergyTerm], state: TermState) -> float:
    if not terms:
        raise ValueError("empty term list")
    return float(sum(t.energy(state) for t in terms))


def total_speed(terms: Sequence[EnergyTerm], state: TermState) -> np.ndarray:
    """Summed advective speed of all terms except :class:`Length`."""
    if not terms:
        raise ValueError("empty term list")
    v = np.zeros(state.grid.shape)
    for t in terms:
        if not isinstance(t, Length):
            v += t.speed(state)
    return v


def curvature_weight(terms: Sequence[EnergyTerm]) -> float:
    return float(sum(t.weight for t in terms if isinstance(t, Length)))


# Weight names per design, in the order make_design expects them.
DESIGN_WEIGHTS: dict[str, tuple[str, ...]] = {
    "1": ("lambda1", "lambda"),
    "1b": ("lambda1", "lambda2", "lambda"),
    "2": ("lambda1", "lambda"),
    "2b": ("lambda1", "lambda2", "lambda"),
    "3": ("lambda1", "lambda2", "lambda"),
    "4": ("lambda1", "lambda2", "lambda3", "lambda"),
    "4b": ("lambda1", "lambda2", "lambda3", "lambda4", "lambda"),
}

COLOR_DESIGNS = frozenset({"4", "4b"})


def normalize_design(design_id) -> str:
    key = str(design_id).strip().lower().lstrip("#")
    if key not in DESIGN_WEIGHTS:
        raise UnknownDesignError(f"unknown design {design_id!r}")
    return key


def weight_vector(design_id, weights) -> tuple[float, ...]:
    """Resolve ``weights`` (a sequence or a name -> value mapping) to design order."""
    key = normalize_design(design_id)
    names = DESIGN_WEIGHTS[key]
    if isinstance(weights, dict):
        missing = [n for n in names if n not in weights]
        extra = [n for n in weights if n not in names]
        if missing or extra:
            raise WeightArityError(
                f"design {key} takes weights {names}; missing {missing}, unexpected {extra}")
        values = tuple(float(weights[n]) for n in names)
    else:
        values = tuple(float(w) for w in weights)
        if len(values) != len(names):
            raise WeightArityError(f"design {key} takes {len(names)} weights {names}, got {len(values)}")
    if any(w < 0 for w in values):
        raise ValueError("weights must be non-negative")
    return values


def make_design(design_id, weights) -> list[EnergyTerm]:
    key = normalize_design(design_id)
    w = weight_vector(key, weights)
    if key == "1":
        return [MeanIntensity(w[0]), Length(w[1])]
    if key == "1b":
        return [MeanIntensity(w[0]), AreaMatch(w[1]), Length(w[2])]
    if key == "2":
        return [KLIntensity(w[0]), Length(w[1])]
    if key == "2b":
        return [KLIntensity(w[0]), KLComplement(w[1]), Length(w[2])]
    if key == "3":
        return [KLIntensity(w[0]), KLGradient(w[1]), Length(w[2])]
    if key == "4":
        return [KLColor((w[0], w[1], w[2])), Length(w[3])]
    return [KLColor((w[0], w[1], w[2])), AreaMatch(w[3]), Length(w[4])]


def scale_terms(terms: Sequence[EnergyTerm], factor: float) -> list[EnergyTerm]:
    out = []
    for t in terms:
        if isinstance(t, KLColor):
            out.append(KLColor(tuple(factor * w for w in t.weights)))
        else:
            out.append(type(t)(factor * t.weight))
    return out
