"""Level-set grid operations.

The tracked curve is the zero level set of a scalar field ``u`` sampled on the
pixel lattice (rows are ``y``, columns are ``x``). Pixels with ``u <= 0`` are
inside the region. A speed ``v > 0`` moves the curve along its outward
normal, growing the region, so the evolution solves ``u_t + v |grad u| = 0``
with first-order upwinding plus an explicit curvature term.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import CFLViolationError, DegenerateMaskError
from .imagecore import as_mask

CFL_FACTOR = 0.9
DT_CAP = 1.0
CFL_SLACK = 1.01
_GRAD_EPS = 1e-12
REINIT_BAND = 8.0


def _pad(u: np.ndarray) -> np.ndarray:
    # Linear extrapolation: a missing neighbor makes the one-sided difference
    # on that side equal to the one on the other side.
    return np.pad(u, 1, mode="reflect", reflect_type="odd")


def one_sided_differences(u: np.ndarray, h: float = 1.0):
    """Return ``(D-x, D+x, D-y, D+y)`` as arrays shaped like ``u``."""
    p = _pad(np.asarray(u, dtype=np.float64))
    c = p[1:-1, 1:-1]
    dmx = (c - p[1:-1, :-2]) / h
    dpx = (p[1:-1, 2:] - c) / h
    dmy = (c - p[:-2, 1:-1]) / h
    dpy = (p[2:, 1:-1] - c) / h
    return dmx, dpx, dmy, dpy


def upwind_gradients(u: np.ndarray, h: float = 1.0):
    """Upwind gradient norms ``(delta_plus, delta_minus)`` over the whole grid.

    ``delta_plus`` is the one to use where the outward speed is non-negative,
    ``delta_minus`` where it is negative.
    """
    dmx, dpx, dmy, dpy = one_sided_differences(u, h)
    plus = np.sqrt(
        np.maximum(dmx, 0.0) ** 2 + np.minimum(dpx, 0.0) ** 2
        + np.maximum(dmy, 0.0) ** 2 + np.minimum(dpy, 0.0) ** 2
    )
    minus = np.sqrt(
        np.maximum(dpx, 0.0) ** 2 + np.minimum(dmx, 0.0) ** 2
        + np.maximum(dpy, 0.0) ** 2 + np.minimum(dmy, 0.0) ** 2
    )
    return plus, minus


def _local(u: np.ndarray, i: int, j: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if not (0 <= i < u.shape[0] and 0 <= j < u.shape[1]):
        raise IndexError(f"({i}, {j}) outside grid of shape {u.shape}")
    return _pad(u)[i:i + 3, j:j + 3]


def upwind_gradient_plus(u: np.ndarray, i: int, j: int, h: float = 1.0) -> float:
    p = _local(u, i, j)
    dmx, dpx = (p[1, 1] - p[1, 0]) / h, (p[1, 2] - p[1, 1]) / h
    dmy, dpy = (p[1, 1] - p[0, 1]) / h, (p[2, 1] - p[1, 1]) / h
    return float(np.sqrt(max(dmx, 0.0) ** 2 + min(dpx, 0.0) ** 2
                         + max(dmy, 0.0) ** 2 + min(dpy, 0.0) ** 2))


def upwind_gradient_minus(u: np.ndarray, i: int, j: int, h: float = 1.0) -> float:
    p = _local(u, i, j)
    dmx, dpx = (p[1, 1] - p[1, 0]) / h, (p[1, 2] - p[1, 1]) / h
    dmy, dpy = (p[1, 1] - p[0, 1]) / h, (p[2, 1] - p[1, 1]) / h
    return float(np.sqrt(max(dpx, 0.0) ** 2 + min(dmx, 0.0) ** 2
                         + max(dpy, 0.0) ** 2 + min(dmy, 0.0) ** 2))


def _central_derivatives(p: np.ndarray, h: float):
    c = p[1:-1, 1:-1]
    ux = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * h)
    uy = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * h)
    uxx = (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / h**2
    uyy = (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / h**2
    uxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * h**2)
    return ux, uy, uxx, uyy, uxy


def central_gradient_norm(u: np.ndarray, h: float = 1.0) -> np.ndarray:
    ux, uy, *_ = _central_derivatives(_pad(np.asarray(u, dtype=np.float64)), h)
    return np.hypot(ux, uy)


def _curvature_from_padded(p: np.ndarray, h: float) -> np.ndarray:
    ux, uy, uxx, uyy, uxy = _central_derivatives(p, h)
    g2 = ux**2 + uy**2
    safe = np.where(g2 < _GRAD_EPS, 1.0, g2)
    kappa = (uxx * uy**2 - 2 * ux * uy * uxy + uyy * ux**2) / safe**1.5
    kappa = np.where(g2 < _GRAD_EPS, 0.0, kappa)
    return np.clip(kappa, -1.0 / h, 1.0 / h)


def curvature_field(u: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Mean curvature of the level sets, ``div(grad u / |grad u|)``.

    Zero where the gradient vanishes; clamped to ``[-1/h, 1/h]``.
    """
    return _curvature_from_padded(_pad(np.asarray(u, dtype=np.float64)), h)


def curvature(u: np.ndarray, i: int, j: int, h: float = 1.0) -> float:
    return float(_curvature_from_padded(_local(u, i, j), h)[0, 0])


def stable_dt(v, curvature_weight: float, h: float = 1.0) -> float:
    """Largest explicit time step: ``0.9 / (max|v|/h + 4 lambda/h^2)``, capped at 1."""
    vmax = float(np.max(np.abs(v))) if np.size(v) else 0.0
    rate = vmax / h + 4.0 * curvature_weight / h**2
    if rate <= 0.0:
        return DT_CAP
    return min(CFL_FACTOR / rate, DT_CAP)


def evolve_step(u: np.ndarray, v, curvature_weight: float, dt: float,
                h: float = 1.0) -> np.ndarray:
    """One explicit step of ``u_t + v |grad u| = lambda kappa |grad u|``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=np.float64)
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), u.shape)
    limit = stable_dt(v, curvature_weight, h)
    if dt > CFL_SLACK * limit:
        raise CFLViolationError(f"dt={dt:g} exceeds stable bound {limit:g}")
    plus, minus = upwind_gradients(u, h)
    out = u - dt * (np.maximum(v, 0.0) * plus + np.minimum(v, 0.0) * minus)
    if curvature_weight != 0.0:
        out += dt * curvature_weight * curvature_field(u, h) * central_gradient_norm(u, h)
    return out


def extract_mask(u: np.ndarray) -> np.ndarray:
    return np.asarray(u) <= 0


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Inside pixels with at least one 4-neighbour outside (off-grid counts as outside)."""
    mask = as_mask(mask)
    p = np.pad(mask, 1, constant_values=False)
    all_in = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return mask & ~all_in


def _front_pixels(inside: np.ndarray) -> np.ndarray:
    # Pixels with an in-grid 4-neighbour on the other side of the front.
    p = np.pad(inside, 1, mode="edge")
    c = p[1:-1, 1:-1]
    return ((p[:-2, 1:-1] != c) | (p[2:, 1:-1] != c)
            | (p[1:-1, :-2] != c) | (p[1:-1, 2:] != c))


def extract_boundary(u: np.ndarray) -> np.ndarray:
    """Boundary pixels of the region as an ``(N, 2)`` array of ``(row, col)``."""
    return np.argwhere(boundary_mask(extract_mask(u)))


def init_signed_distance(mask: np.ndarray) -> np.ndarray:
    """Signed distance to the region boundary built from a binary mask.

    The boundary is taken half-way between adjacent inside and outside pixel
    centres, so ``|u| >= 0.5`` everywhere and the mask is reproduced exactly.
    """
    mask = as_mask(mask)
    n = np.count_nonzero(mask)
    if n == 0 or n == mask.size:
        raise DegenerateMaskError("mask is empty or covers the whole grid")
    outside = ndimage.distance_transform_edt(~mask)
    inside = ndimage.distance_transform_edt(mask)
    return np.where(mask, 0.5 - inside, outside - 0.5)


def zero_crossing_segments(u: np.ndarray) -> np.ndarray:
    """Marching-squares segments of the zero level set.

    Returns an ``(N, 2, 2)`` array of segment endpoints in ``(y, x)`` pixel
    coordinates. Crossings are located by linear interpolation along cell
    edges; saddle cells are split according to the sign of the cell average.
    """
    u = np.asarray(u, dtype=np.float64)
    a, b = u[:-1, :-1], u[:-1, 1:]   # top-left, top-right
    d, c = u[1:, :-1], u[1:, 1:]     # bottom-left, bottom-right
    ia, ib, ic, id_ = a <= 0, b <= 0, c <= 0, d <= 0
    rows, cols = np.mgrid[0:a.shape[0], 0:a.shape[1]].astype(np.float64)

    def frac(p, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = p / (p - q)
        return np.nan_to_num(t)

    # Crossing point on each of the four cell edges.
    top = np.stack([rows, cols + frac(a, b)], axis=-1)
    right = np.stack([rows + frac(b, c), cols + 1], axis=-1)
    bottom = np.stack([rows + 1, cols + frac(d, c)], axis=-1)
    left = np.stack([rows + frac(a, d), cols], axis=-1)
    cross = {"t": ia != ib, "r": ib != ic, "b": id_ != ic, "l": ia != id_}
    pts = {"t": top, "r": right, "b": bottom, "l": left}
    ncross = cross["t"].astype(int) + cross["r"] + cross["b"] + cross["l"]

    segments = []
    two = ncross == 2
    for e1, e2 in (("t", "r"), ("t", "b"), ("t", "l"), ("r", "b"), ("r", "l"), ("b", "l")):
        sel = two & cross[e1] & cross[e2]
        if sel.any():
            segments.append(np.stack([pts[e1][sel], pts[e2][sel]], axis=1))

    saddle = ncross == 4
    if saddle.any():
        centre_in = (a + b + c + d) / 4.0 <= 0
        # A corner whose status differs from the centre is cut off on its own.
        for corner_in, e1, e2 in ((ia, "l", "t"), (ib, "t", "r"), (ic, "r", "b"), (id_, "b", "l")):
            sel = saddle & (corner_in != centre_in)
            if sel.any():
                segments.append(np.stack([pts[e1][sel], pts[e2][sel]], axis=1))

    if not segments:
        return np.zeros((0, 2, 2))
    return np.concatenate(segments, axis=0)


def perimeter(u: np.ndarray) -> float:
    """Length of the zero level set (sum of marching-squares segment lengths)."""
    seg = zero_crossing_segments(u)
    if len(seg) == 0:
        return 0.0
    return float(np.sum(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)))


def _distance_to_segments(points: np.ndarray, seg: np.ndarray, k: int = 4,
                          samples: int = 16) -> np.ndarray:
    """Euclidean distance from each ``(y, x)`` point to the nearest segment."""
    t = np.linspace(0.0, 1.0, samples)
    p0, p1 = seg[:, 0], seg[:, 1]
    cloud = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    owner = np.repeat(np.arange(len(seg)), samples)
    tree = cKDTree(cloud.reshape(-1, 2))
    k = min(k, len(owner))
    _, idx = tree.query(points, k=k)
    idx = np.asarray(idx).reshape(len(points), k)
    best = np.full(len(points), np.inf)
    for col in range(k):
        s = owner[idx[:, col]]
        a, b = p0[s], p1[s]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        proj = np.einsum("ij,ij->i", points - a, ab) / np.where(denom > 0, denom, 1.0)
        proj = np.clip(np.where(denom > 0, proj, 0.0), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(points - (a + proj[:, None] * ab), axis=1))
    return best


def _front_slope(u: np.ndarray) -> np.ndarray:
    """Gradient estimate for pixels next to the front.

    The larger of the central-difference norm and every in-grid one-sided
    difference. On a distance function this is the central norm; on a steep
    nonlinear profile the difference across the crossing dominates.
    """
    g = central_gradient_norm(u)
    p = np.pad(u, 1, mode="edge")
    c = p[1:-1, 1:-1]
    for sl in ((slice(1, -1), slice(None, -2)), (slice(1, -1), slice(2, None)),
               (slice(None, -2), slice(1, -1)), (slice(2, None), slice(1, -1))):
        g = np.maximum(g, np.abs(p[sl] - c))
    return g


def reinitialize(u: np.ndarray) -> np.ndarray:
    """Restore the signed-distance property without moving the zero level set.

    Distances are measured to the sub-pixel zero crossings of ``u`` and the
    sign of every pixel is kept, so ``extract_mask`` is unchanged.
    """
    u = np.asarray(u, dtype=np.float64)
    inside = u <= 0
    n = np.count_nonzero(inside)
    if n == 0 or n == u.size:
        raise DegenerateMaskError("level set has uniform sign")
    # Far from the front the pixel-mask distance transform is accurate enough.
    dist = np.abs(init_signed_distance(inside))
    band = dist <= REINIT_BAND
    dist[band] = _distance_to_segments(np.argwhere(band).astype(np.float64),
                                       zero_crossing_segments(u))
    # Pixels next to the front keep their own crossing: u / slope leaves the
    # zero set in place for any rescaled distance function.
    near = _front_pixels(inside)
    slope = _front_slope(u)
    near &= slope > 1e-12
    dist[near] = np.abs(u[near]) / slope[near]
    return np.where(inside, -dist, np.maximum(dist, 1e-9))
