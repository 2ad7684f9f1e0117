"""Image containers and the pixel-level features used by the energy terms.

Images are plain numpy arrays with values in [0, 1]: shape ``(H, W)`` for
grayscale and ``(H, W, 3)`` for RGB. Region masks are boolean ``(H, W)``
arrays where ``True`` marks the inside of the region.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionError, EmptyRegionError

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(data) -> np.ndarray:
    """Validate and return ``data`` as a float64 image array."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise DimensionError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")
    if img.size == 0:
        raise DimensionError("image has no pixels")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    return img


def as_mask(data, shape: tuple[int, int] | None = None) -> np.ndarray:
    mask = np.asarray(data, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError(f"mask must be 2-D, got shape {mask.shape}")
    if shape is not None and mask.shape != tuple(shape[:2]):
        raise DimensionError(f"mask shape {mask.shape} does not match image {tuple(shape[:2])}")
    return mask


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B); gray input is returned as is."""
    img = as_image(img)
    if img.ndim == 2:
        return img
    return np.clip(img @ GRAY_WEIGHTS, 0.0, 1.0)


def channel(img: np.ndarray, index: int) -> np.ndarray:
    img = as_image(img)
    if img.ndim == 2:
        raise DimensionError("grayscale image has no color channels")
    return img[:, :, index]


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Norm of the intensity gradient with unit pixel spacing.

    Central differences are used in the interior and one-sided differences on
    the border. The result is divided by its maximum only when that maximum
    exceeds 1, so it always lies in [0, 1].
    """
    img = as_image(img)
    if img.ndim != 2:
        raise DimensionError("gradient_magnitude expects a single-channel image")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise DimensionError(f"image too small for gradient: {img.shape}")
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > 1.0:
        mag = mag / peak
    return mag


def region_mean(img: np.ndarray, mask: np.ndarray) -> float:
    img = as_image(img)
    if img.ndim != 2:
        raise DimensionError("region_mean expects a single-channel image")
    mask = as_mask(mask, img.shape)
    n = np.count_nonzero(mask)
    if n == 0:
        raise EmptyRegionError("region mean of an empty mask")
    return float(img[mask].sum() / n)


def region_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(as_mask(mask)))
