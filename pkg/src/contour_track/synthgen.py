"""Deterministic synthetic scenes with exact ground-truth masks.

A scene is a background plus an ordered list of disks and rectangles, each
translating by a fixed number of pixels per frame. Shapes are painted in
order (later ones on top), then an optional linear shading ramp and uniform
noise are applied. The ground truth of every frame is the pixel coverage of
the first shape, computed from its geometry. Pixel centres sit at integer
coordinates: column ``x``, row ``y``.

Scenes round-trip through a flat ``key = value`` text format::

    # two-tone test scene
    width = 64
    height = 64
    frames = 3
    seed = 0
    noise = 0.02
    background = 0.1
    shading = 0, 0.3            # direction in degrees, strength
    shape = disk cx=32 cy=32 r=10 color=0.9 velocity=3,0
    shape = rect cx=10 cy=10 w=6 h=4 color=0.8,0.2,0.2 velocity=0,0

Colors are a single gray level or an ``r,g,b`` triple in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterOrderError, ShapeOutOfBoundsError
from .imagecore import GRAY_WEIGHTS

Color = Union[float, tuple[float, float, float]]


@dataclass(frozen=True)
class Shape:
    kind: str                      # "disk" or "rect"
    center: tuple[float, float]    # (x, y) in frame 0
    size: tuple[float, ...]        # (r,) for disks, (w, h) for rectangles
    color: Color
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("disk", "rect"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if len(self.size) != (1 if self.kind == "disk" else 2) or min(self.size) <= 0:
            raise ValueError(f"bad size {self.size} for {self.kind}")

    def center_at(self, frame: int) -> tuple[float, float]:
        return (self.center[0] + frame * self.velocity[0],
                self.center[1] + frame * self.velocity[1])

    def half_extent(self) -> tuple[float, float]:
        if self.kind == "disk":
            return self.size[0], self.size[0]
        return self.size[0] / 2.0, self.size[1] / 2.0

    def coverage(self, frame: int, height: int, width: int) -> np.ndarray:
        cx, cy = self.center_at(frame)
        yy, xx = np.mgrid[0:height, 0:width]
        if self.kind == "disk":
            return (xx - cx) ** 2 + (yy - cy) ** 2 <= self.size[0] ** 2
        hw, hh = self.half_extent()
        return (np.abs(xx - cx) <= hw) & (np.abs(yy - cy) <= hh)


@dataclass(frozen=True)
class Shading:
    direction_deg: float
    strength: float


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    background: Color
    shapes: tuple[Shape, ...]
    frames: int = 1
    seed: int = 0
    noise: float = 0.0
    shading: Shading | None = None

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("scene must be at least 3x3")
        if self.frames < 1:
            raise ValueError("scene needs at least one frame")
        if not self.shapes:
            raise ValueError("scene needs at least one shape")
        if not 0.0 <= self.noise <= 0.2:
            raise ValueError("noise amplitude must lie in [0, 0.2]")
        if self.shading is not None and not 0.0 <= self.shading.strength <= 1.0:
            raise ValueError("shading strength must lie in [0, 1]")

    @property
    def is_color(self) -> bool:
        colors = [self.background] + [s.color for s in self.shapes]
        return any(not isinstance(c, (int, float)) for c in colors)


def _as_rgb(color: Color) -> np.ndarray:
    if isinstance(color, (int, float)):
        return np.full(3, float(color))
    return np.asarray(color, dtype=np.float64)


def check_bounds(spec: SceneSpec) -> None:
    for k, shape in enumerate(spec.shapes):
        hw, hh = shape.half_extent()
        for f in range(spec.frames):
            cx, cy = shape.center_at(f)
            if (cx - hw < -0.5 or cx + hw > spec.width - 0.5
                    or cy - hh < -0.5 or cy + hh > spec.height - 0.5):
                raise ShapeOutOfBoundsError(f"shape {k} leaves the frame at frame {f}")


def shading_ramp(spec: SceneSpec) -> np.ndarray:
    """Per-pixel position along the shading direction, scaled to [0, 1]."""
    theta = math.radians(spec.shading.direction_deg)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    proj = xx * math.cos(theta) + yy * math.sin(theta)
    span = proj.max() - proj.min()
    return (proj - proj.min()) / span if span > 0 else np.zeros_like(proj, dtype=np.float64)


def render(spec: SceneSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Render every frame and its ground-truth mask (coverage of the first shape)."""
    check_bounds(spec)
    rng = np.random.default_rng(spec.seed)
    color = spec.is_color
    h, w = spec.height, spec.width
    factor = None
    if spec.shading is not None and spec.shading.strength > 0:
        factor = 1.0 - spec.shading.strength * shading_ramp(spec)
    images, masks = [], []
    for f in range(spec.frames):
        img = np.empty((h, w, 3))
        img[:] = _as_rgb(spec.background)
        for shape in spec.shapes:
            img[shape.coverage(f, h, w)] = _as_rgb(shape.color)
        if factor is not None:
            img *= factor[:, :, None]
        if not color:
            img = img[:, :, 0]
        if spec.noise > 0:
            img = img + rng.uniform(-spec.noise, spec.noise, img.shape)
        images.append(np.clip(img, 0.0, 1.0))
        masks.append(spec.shapes[0].coverage(f, h, w))
    return images, masks


def equal_gray_color(red: float, blue: float, gray: float) -> tuple[float, float, float]:
    """RGB color with the given red and blue channels whose luma equals ``gray``."""
    wr, wg, wb = GRAY_WEIGHTS
    green = (gray - wr * red - wb * blue) / wg
    if not 0.0 <= green <= 1.0:
        raise ValueError("no green level in [0, 1] reaches that gray value")
    return (red, green, blue)


def disk_scene(width=64, height=64, radius=10.0, center=None, velocity=(3.0, 0.0),
               frames=5, foreground=0.8, background=0.2, noise=0.0, seed=0) -> SceneSpec:
    """A single uniform gray disk drifting over a uniform background."""
    if center is None:
        center = (width / 2.0 - 0.5 - velocity[0] * (frames - 1) / 2.0,
                  height / 2.0 - 0.5 - velocity[1] * (frames - 1) / 2.0)
    disk = Shape("disk", tuple(center), (radius,), foreground, tuple(velocity))
    return SceneSpec(width, height, background, (disk,), frames, seed, noise)


def two_color_scene(width=64, height=64, radius=9.0, gap=4.0, frames=2, noise=0.02,
                    seed=0) -> SceneSpec:
    """Two side-by-side disks of equal luma but different RGB color.

    The left disk is the tracked one. A grayscale view cannot tell them apart.
    """
    target = (0.8, 0.3, 0.2)
    gray = float(np.dot(GRAY_WEIGHTS, target))
    distractor = equal_gray_color(0.2, 0.8, gray)
    cy = height / 2.0 - 0.5
    cx1 = width / 2.0 - 0.5 - radius - gap / 2.0
    cx2 = width / 2.0 - 0.5 + radius + gap / 2.0
    shapes = (Shape("disk", (cx1, cy), (radius,), target),
              Shape("disk", (cx2, cy), (radius,), distractor))
    return SceneSpec(width, height, (0.85, 0.85, 0.85), shapes, frames, seed, noise)


EYE_SCLERA = (0.62, 0.6, 0.58)
EYE_IRIS = (0.25, 0.55, 0.3)
EYE_PUPIL = (0.05, 0.04, 0.04)


def eye_scene(width=96, height=96, iris_radius=16.0, pupil_radius=6.0, center=None,
              drift=(1.5, 0.0), frames=5, shading=0.0, shading_direction=180.0,
              noise=0.02, seed=0, sclera=EYE_SCLERA, iris=EYE_IRIS,
              pupil=EYE_PUPIL) -> SceneSpec:
    """Synthetic eye: sclera background, colored iris, dark pupil, linear shadow.

    The ground truth is the iris disk (iris and pupil together). With the
    default direction the shadow darkens the left side of the frame.
    """
    if not iris_radius > pupil_radius > 0:
        raise ParameterOrderError("need iris_radius > pupil_radius > 0")
    if center is None:
        center = (width / 2.0 - 0.5 - drift[0] * (frames - 1) / 2.0,
                  height / 2.0 - 0.5 - drift[1] * (frames - 1) / 2.0)
    drift = (float(drift[0]), float(drift[1]))
    shapes = (Shape("disk", tuple(center), (iris_radius,), tuple(iris), drift),
              Shape("disk", tuple(center), (pupil_radius,), tuple(pupil), drift))
    shade = Shading(shading_direction, shading) if shading > 0 else None
    return SceneSpec(width, height, tuple(sclera), shapes, frames, seed, noise, shade)


# -- text format -----------------------------------------------------------

def _parse_color(text: str) -> Color:
    parts = [float(p) for p in text.replace(" ", "").split(",") if p]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 3:
        return tuple(parts)
    raise ValueError(f"color needs 1 or 3 components: {text!r}")


def _format_color(color: Color) -> str:
    if isinstance(color, (int, float)):
        return repr(float(color))
    return ",".join(repr(float(c)) for c in color)


def _parse_pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers: {text!r}")
    return parts[0], parts[1]


def _parse_shape(text: str) -> Shape:
    tokens = text.split()
    if not tokens:
        raise ValueError("empty shape line")
    kind, fields = tokens[0], {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"shape field {tok!r} is not key=value")
        fields[key] = value
    try:
        center = (float(fields.pop("cx")), float(fields.pop("cy")))
        if kind == "disk":
            size = (float(fields.pop("r")),)
        else:
            size = (float(fields.pop("w")), float(fields.pop("h")))
        color = _parse_color(fields.pop("color"))
    except KeyError as exc:
        raise ValueError(f"shape is missing field {exc.args[0]!r}") from None
    velocity = _parse_pair(fields.pop("velocity", "0,0"))
    if fields:
        raise ValueError(f"unknown shape fields {sorted(fields)}")
    return Shape(kind, center, size, color, velocity)


def parse_scene(text: str) -> SceneSpec:
    values: dict[str, str] = {}
    shapes: list[Shape] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "shape":
            shapes.append(_parse_shape(value))
        else:
            values[key] = value
    known = {"width", "height", "frames", "seed", "noise", "background", "shading"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown scene keys {sorted(unknown)}")
    shading = None
    if "shading" in values:
        direction, strength = _parse_pair(values["shading"])
        shading = Shading(direction, strength)
    try:
        return SceneSpec(
            width=int(values["width"]),
            height=int(values["height"]),
            background=_parse_color(values.get("background", "0")),
            shapes=tuple(shapes),
            frames=int(values.get("frames", "1")),
            seed=int(values.get("seed", "0")),
            noise=float(values.get("noise", "0")),
            shading=shading,
        )
    except KeyError as exc:
        raise ValueError(f"scene is missing key {exc.args[0]!r}") from None


def format_scene(spec: SceneSpec) -> str:
    lines = [
        f"width = {spec.width}",
        f"height = {spec.height}",
        f"frames = {spec.frames}",
        f"seed = {spec.seed}",
        f"noise = {spec.noise!r}",
        f"background = {_format_color(spec.background)}",
    ]
    if spec.shading is not None:
        lines.append(f"shading = {spec.shading.direction_deg!r}, {spec.shading.strength!r}")
    for s in spec.shapes:
        if s.kind == "disk":
            size = f"r={s.size[0]!r}"
        else:
            size = f"w={s.size[0]!r} h={s.size[1]!r}"
        lines.append(
            f"shape = {s.kind} cx={s.center[0]!r} cy={s.center[1]!r} {size} "
            f"color={_format_color(s.color)} velocity={s.velocity[0]!r},{s.velocity[1]!r}")
    return "\n".join(lines) + "\n"
