"""Command-line front end for tracking image sequences and rendering test scenes.

Settings come from an optional flat ``key = value`` config file (``#`` starts
a comment) and are overridden by flags of the same name. Weight keys start with
``lambda`` (``lambda``, ``lambda1`` ... ``lambda4``); on the command line they
are given as ``--lambda lambda1=10``.

Exit status is 0 on success, 1 on any error and 2 when a benchmark fails.
"""
from __future__ import annotations

import argparse
import csv
import glob
import io
import logging
import os
import struct
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from . import synthgen, tracker
from .errors import ContourTrackError
from .functionals import DESIGN_WEIGHTS, normalize_design
from .imagecore import GRAY_WEIGHTS
from .levelset import boundary_mask
from .metrics import coverage

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_BENCHMARK = 0, 1, 2
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")
SCENE_SUFFIXES = (".scene", ".txt", ".cfg")
REPORT_HEADER = ("frame", "iterations", "energy", "converged", "lost_track", "drc", "urc")
OVERLAY_COLOR = (0, 255, 0)
THREADS_ENV = "CONTOUR_TRACK_THREADS"


class CliError(Exception):
    """An error reported to the user as ``<kind>: <message>`` with exit status 1."""

    kind = "error"

    def __str__(self):
        return f"{self.kind}: {super().__str__()}"


class MissingFileError(CliError):
    kind = "missing file"


class UnreadableImageError(CliError):
    kind = "unreadable image"


class ConfigParseError(CliError):
    kind = "config parse error"


class OutputDirError(CliError):
    kind = "output directory error"


@dataclass
class RunConfig:
    mode: str = "track"
    input: str | None = None
    seed_mask: str | None = None
    ground_truth: str | None = None
    design: str = "1b"
    weights: dict[str, float] = field(default_factory=dict)
    max_iter: int = 500
    tol: float = 1e-5
    window: int = 10
    reinit_every: int = 20
    bins: int = 32
    out: str = "out"
    overlay: bool = True
    trace: bool = True
    dump_grids: bool = False

    def track_config(self) -> tracker.TrackConfig:
        return tracker.TrackConfig(design=self.design, weights=dict(self.weights) or None,
                                   max_iterations=self.max_iter, convergence_tol=self.tol,
                                   convergence_window=self.window,
                                   reinit_every=self.reinit_every, histogram_bins=self.bins)


# -- config file -----------------------------------------------------------

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in _BOOL_TRUE:
        return True
    if low in _BOOL_FALSE:
        return False
    raise ConfigParseError(f"{key}: expected a boolean, got {text!r}")


def _parse_weight(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigParseError(f"{key}: expected a number, got {text!r}") from None


_CONVERTERS = {
    "mode": str, "input": str, "seed_mask": str, "ground_truth": str, "design": str,
    "max_iter": int, "tol": float, "window": int, "reinit_every": int, "bins": int,
    "out": str, "overlay": None, "trace": None, "dump_grids": None,
}


def _apply_setting(values: dict, key: str, text: str, origin: str) -> None:
    key = key.strip().replace("-", "_")
    if key.startswith("lambda"):
        values.setdefault("weights", {})[key] = _parse_weight(key, text)
        return
    if key not in _CONVERTERS:
        raise ConfigParseError(f"{origin}: unknown key {key!r}")
    conv = _CONVERTERS[key]
    if conv is None:
        values[key] = _parse_bool(key, text)
        return
    try:
        values[key] = conv(text.strip())
    except ValueError:
        raise ConfigParseError(f"{origin}: bad value {text!r} for {key}") from None


def read_config_file(path: str | os.PathLike) -> dict:
    """Parse a flat ``key = value`` file into a dict of RunConfig fields."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"config file not found: {path}")
    values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigParseError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        _apply_setting(values, key, value, f"{path}:{lineno}")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="contour-track",
        description="Track a seeded region through an image sequence with level-set descent.")
    p.add_argument("--config", help="flat key = value config file; flags override its keys")
    p.add_argument("--mode", choices=("track", "synth", "validate"))
    p.add_argument("--input",
                   help="image directory, glob pattern, or scene file")
    p.add_argument("--seed-mask", dest="seed_mask",
                   help="mask PNG for the first frame (inside where luminance > 127)")
    p.add_argument("--ground-truth", dest="ground_truth",
                   help="directory or glob of ground-truth masks, one per frame")
    p.add_argument("--design", type=str.lower, choices=sorted(DESIGN_WEIGHTS))
    p.add_argument("--lambda", dest="lambdas", action="append", default=[],
                   metavar="NAME=VALUE", help="set one weight, e.g. lambda1=10 (repeatable)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--window", type=int, help="convergence window in iterations")
    p.add_argument("--reinit-every", dest="reinit_every", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--overlay", action=argparse.BooleanOptionalAction, default=None,
                   help="write overlay PNGs (default on)")
    p.add_argument("--trace", action=argparse.BooleanOptionalAction, default=None,
                   help="write energy_trace.csv (default on)")
    p.add_argument("--dump-grids", dest="dump_grids", action=argparse.BooleanOptionalAction,
                   default=None, help="write final level-set grids as raw float32")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = read_config_file(args.config) if args.config else {}
    for name in ("mode", "input", "seed_mask", "ground_truth", "design", "max_iter", "tol",
                 "window", "reinit_every", "bins", "out", "overlay", "trace", "dump_grids"):
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    for item in args.lambdas:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigParseError(f"--lambda expects NAME=VALUE, got {item!r}")
        _apply_setting(values, key, value, "--lambda")
    cfg = RunConfig(**values)
    if cfg.mode not in ("track", "synth", "validate"):
        raise ConfigParseError(f"unknown mode {cfg.mode!r}")
    try:
        cfg.design = normalize_design(cfg.design)
    except KeyError as exc:
        raise ConfigParseError(str(exc.args[0])) from None
    allowed = set(DESIGN_WEIGHTS[cfg.design])
    unknown = sorted(set(cfg.weights) - allowed)
    if unknown:
        raise ConfigParseError(
            f"design {cfg.design} has weights {sorted(allowed)}, not {unknown}")
    return cfg


def thread_cap() -> int:
    """Worker cap from the environment; 0 means let the libraries decide."""
    text = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(text)
    except ValueError:
        raise ConfigParseError(f"{THREADS_ENV} must be an integer, got {text!r}") from None
    if n < 0:
        raise ConfigParseError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n


def apply_thread_cap(n: int) -> None:
    # The pipeline itself is single-threaded; the cap only reaches the BLAS
    # pools, and only for those that read these variables lazily.
    if n > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


# -- image I/O -------------------------------------------------------------

def read_image(path: str | os.PathLike) -> np.ndarray:
    """Load PNG/PGM/PPM as float in [0, 1]; gray stays 2-D, color becomes (H, W, 3)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"image not found: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("L", "1", "I;16", "I", "F", "LA") or (
                    im.mode == "P" and not _palette_has_color(im)):
                arr = np.asarray(im.convert("F"), dtype=np.float64)
                top = 65535.0 if im.mode in ("I;16", "I") and arr.max() > 255 else 255.0
                return np.clip(arr / top, 0.0, 1.0)
            return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise UnreadableImageError(f"cannot decode {path}: {exc}") from None


def _palette_has_color(im: Image.Image) -> bool:
    rgb = np.asarray(im.convert("RGB"))
    return bool(np.any(rgb[..., 0] != rgb[..., 1]) or np.any(rgb[..., 1] != rgb[..., 2]))


def read_mask(path: str | os.PathLike) -> np.ndarray:
    img = read_image(path)
    if img.ndim == 3:
        img = img @ GRAY_WEIGHTS
    return np.rint(img * 255.0) > 127


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(arr: np.ndarray, path: Path) -> None:
    # Fixed encoder settings so repeated runs write identical bytes.
    Image.fromarray(arr).save(path, format="PNG", optimize=False, compress_level=6)


def write_mask(mask: np.ndarray, path: Path) -> None:
    save_png(np.where(mask, 255, 0).astype(np.uint8), path)


def overlay(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """The frame as 8-bit RGB with the region's 1-px inner outline painted green."""
    rgb = to_uint8(img)
    if rgb.ndim == 2:
        rgb = np.repeat(rgb[..., None], 3, axis=2)
    rgb = rgb.copy()
    rgb[boundary_mask(mask)] = OVERLAY_COLOR
    return rgb


def write_grid(u: np.ndarray, path: Path) -> None:
    """Raw dump: uint32 width, uint32 height, then row-major float32, all little-endian."""
    h, w = u.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", w, h))
        fh.write(np.ascontiguousarray(u, dtype="<f4").tobytes())


def read_grid(path: str | os.PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise UnreadableImageError(f"grid dump too short: {path}")
    w, h = struct.unpack("<II", data[:8])
    if len(data) != 8 + 4 * w * h:
        raise UnreadableImageError(f"grid dump size does not match its header: {path}")
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(h, w).astype(np.float64)


def list_images(spec: str) -> list[Path]:
    """Frames from a directory or glob pattern, in sorted filename order."""
    path = Path(spec)
    if path.is_dir():
        files = [p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    else:
        files = [Path(p) for p in glob.glob(spec)]
        if not files and path.suffix.lower() in IMAGE_SUFFIXES:
            raise MissingFileError(f"image not found: {spec}")
    files = sorted(files)
    if not files:
        raise MissingFileError(f"no images match {spec}")
    return files


def is_scene_file(spec: str) -> bool:
    return Path(spec).suffix.lower() in SCENE_SUFFIXES


def load_scene(path: str | os.PathLike) -> synthgen.SceneSpec:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"scene file not found: {path}")
    try:
        return synthgen.parse_scene(path.read_text())
    except ValueError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None


def _prepare_out(out: str) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputDirError(f"cannot create {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise OutputDirError(f"not writable: {path}")
    return path


# -- modes -----------------------------------------------------------------

def _load_track_inputs(cfg: RunConfig):
    if not cfg.input:
        raise ConfigParseError("track mode needs --input")
    truth = None
    if is_scene_file(cfg.input):
        frames, truth = synthgen.render(load_scene(cfg.input))
        seed = read_mask(cfg.seed_mask) if cfg.seed_mask else truth[0]
    else:
        if not cfg.seed_mask:
            raise ConfigParseError("track mode on images needs --seed-mask")
        seed = read_mask(cfg.seed_mask)
        frames = [read_image(p) for p in list_images(cfg.input)]
    if cfg.ground_truth:
        truth = [read_mask(p) for p in list_images(cfg.ground_truth)]
        if len(truth) != len(frames):
            raise ConfigParseError(
                f"{len(truth)} ground-truth masks for {len(frames)} frames")
    return frames, seed, truth


def _fmt(x: float) -> str:
    return repr(float(x))


def format_report(report: tracker.TrackReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for f in report.frames:
        drc = _fmt(f.score.drc) if f.score else ""
        urc = _fmt(f.score.urc) if f.score else ""
        writer.writerow([f.frame_index, f.iterations, _fmt(f.final_energy),
                         int(f.converged), int(f.lost_track), drc, urc])
    return buf.getvalue()


def format_trace(report: tracker.TrackReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("frame", "iteration", "energy"))
    for f in report.frames:
        writer.writerow([f.frame_index, 0, _fmt(f.initial_energy)])
        for k, e in enumerate(f.energy_trace, 1):
            writer.writerow([f.frame_index, k, _fmt(e)])
    return buf.getvalue()


def run_track(cfg: RunConfig) -> int:
    frames, seed, truth = _load_track_inputs(cfg)
    out = _prepare_out(cfg.out)
    report = tracker.track_sequence(frames[0], seed, frames, cfg.track_config(),
                                    ground_truth=truth)
    (out / "report.csv").write_text(format_report(report))
    if cfg.trace:
        (out / "energy_trace.csv").write_text(format_trace(report))
    for f, img in zip(report.frames, frames):
        if cfg.overlay:
            save_png(overlay(img, f.final_mask), out / f"overlay_{f.frame_index:03d}.png")
        if cfg.dump_grids and f.final_grid is not None:
            write_grid(f.final_grid, out / f"grid_{f.frame_index:03d}.f32")
    mean = report.mean_coverage()
    if mean is not None:
        print(f"{len(report.frames)} frames, mean DRC {mean[0]:.3f}, mean URC {mean[1]:.3f}")
    else:
        print(f"{len(report.frames)} frames tracked")
    return EXIT_OK


def run_synth(cfg: RunConfig) -> int:
    spec = load_scene(cfg.input) if cfg.input else synthgen.disk_scene()
    out = _prepare_out(cfg.out)
    frames, masks = synthgen.render(spec)
    for k, (img, mask) in enumerate(zip(frames, masks)):
        save_png(to_uint8(img), out / f"frame_{k:03d}.png")
        write_mask(mask, out / f"mask_{k:03d}.png")
    (out / "scene.txt").write_text(synthgen.format_scene(spec))
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


@dataclass
class BenchmarkResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _sequence_benchmark(design: str, spec: synthgen.SceneSpec):
    frames, masks = synthgen.render(spec)
    report = tracker.track_sequence(frames[0], masks[0], frames[1:],
                                    tracker.TrackConfig(design), ground_truth=masks[1:])
    scores = [f.score for f in report.frames]
    return report, scores


def _bench_disk():
    _, scores = _sequence_benchmark("1b", synthgen.disk_scene(velocity=(5.0, 0.0), frames=2))
    ok = all(s is not None and s.drc >= 0.95 and s.urc <= 0.05 for s in scores)
    worst = min((s.drc for s in scores if s), default=0.0)
    return ok, f"design 1b moving disk: min DRC {worst:.3f} (need >= 0.95, URC <= 0.05)"


def _bench_two_color():
    spec = synthgen.two_color_scene()
    frames, masks = synthgen.render(spec)
    cfg = tracker.TrackConfig("4")
    ref = tracker.build_reference(frames[0], masks[0], cfg)
    # Start over-grown so the contour touches the distractor and must reject it.
    start = ndimage.binary_dilation(masks[0], iterations=3)
    mask, frame = tracker.track_frame(ref, start, frames[1], cfg)
    if frame.lost_track:
        return False, "design 4 two-color: lost track"
    s = coverage(mask, masks[1])
    ok = s.drc >= 0.90 and s.urc <= 0.10
    return ok, f"design 4 two-color: DRC {s.drc:.3f}, URC {s.urc:.3f} (need >= 0.90, <= 0.10)"


def shaded_eye_scene() -> synthgen.SceneSpec:
    """The 5-frame shaded drift sequence behind the eye benchmarks (plus a reference frame)."""
    return synthgen.eye_scene(64, 64, iris_radius=12.0, pupil_radius=5.0, drift=(3.0, 2.0),
                              frames=6, shading=0.3)


def _bench_eye_4b():
    report, _ = _sequence_benchmark("4b", shaded_eye_scene())
    mean = report.mean_coverage()
    if mean is None or len([f for f in report.frames if f.score]) != len(report.frames):
        return False, "design 4b shaded eye: lost track"
    ok = mean[0] >= 0.80 and mean[1] <= 0.20
    return ok, f"design 4b shaded eye: mean DRC {mean[0]:.3f}, URC {mean[1]:.3f} (need >= 0.80, <= 0.20)"


def _bench_eye_1():
    report, _ = _sequence_benchmark("1", shaded_eye_scene())
    mean = report.mean_coverage()
    if mean is None:
        return False, "design 1 shaded eye: lost track"
    return mean[1] > 0.10, f"design 1 shaded eye: mean URC {mean[1]:.3f} (need > 0.10)"


BENCHMARKS = (
    ("disk-1b", _bench_disk),
    ("two-color-4", _bench_two_color),
    ("shaded-eye-4b", _bench_eye_4b),
    ("shaded-eye-1", _bench_eye_1),
)


def run_benchmarks() -> list[BenchmarkResult]:
    results = []
    for name, bench in BENCHMARKS:
        t0 = time.perf_counter()
        ok, detail = bench()
        results.append(BenchmarkResult(name, ok, detail, time.perf_counter() - t0))
    return results


def run_validate(cfg: RunConfig) -> int:
    results = run_benchmarks()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.seconds:6.1f}s  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_BENCHMARK


MODES = {"track": run_track, "synth": run_synth, "validate": run_validate}


def run(cfg: RunConfig) -> int:
    return MODES[cfg.mode](cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        apply_thread_cap(thread_cap())
        cfg = resolve_config(args)
        return run(cfg)
    except CliError as exc:
        print(exc, file=sys.stderr)
    except (ContourTrackError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
