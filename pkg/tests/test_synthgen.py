import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contour_track import synthgen as sg
from contour_track.errors import ParameterOrderError, ShapeOutOfBoundsError
from contour_track.imagecore import to_grayscale


def test_static_disk_area():
    spec = sg.SceneSpec(64, 64, 0.1, (sg.Shape("disk", (31.5, 31.5), (12.0,), 0.9),))
    _, masks = sg.render(spec)
    assert masks[0].sum() == pytest.approx(math.pi * 144, rel=0.02)


def test_translation_shifts_mask():
    frames, masks = sg.render(sg.disk_scene(velocity=(3.0, 0.0), frames=2))
    np.testing.assert_array_equal(np.roll(masks[0], 3, axis=1), masks[1])
    assert frames[0].shape == (64, 64)


def test_two_color_fixture_equal_luma():
    frames, masks = sg.render(sg.two_color_scene(noise=0.0))
    img = frames[0]
    gray = to_grayscale(img)
    left = masks[0]
    right = np.zeros_like(left)
    right[:, 32:] = True
    right &= ~np.isclose(img, 0.85).all(axis=2)
    assert abs(gray[left].mean() - gray[right].mean()) < 1e-9
    assert np.abs(img[left].mean(axis=0) - img[right].mean(axis=0)).max() > 0.3


def test_equal_gray_color():
    rgb = sg.equal_gray_color(0.2, 0.8, 0.5)
    assert np.dot([0.299, 0.587, 0.114], rgb) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        sg.equal_gray_color(1.0, 1.0, 0.0)


def test_same_seed_bit_identical():
    spec = sg.eye_scene(shading=0.3, noise=0.05, seed=11)
    a, ma = sg.render(spec)
    b, mb = sg.render(spec)
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()
    c, _ = sg.render(sg.eye_scene(shading=0.3, noise=0.05, seed=12))
    assert not np.array_equal(a[0], c[0])


def test_ground_truth_is_iris_disk():
    spec = sg.eye_scene(64, 64, iris_radius=12, pupil_radius=5, drift=(0, 0), frames=1,
                        noise=0.0)
    frames, masks = sg.render(spec)
    cx, cy = spec.shapes[0].center
    yy, xx = np.mgrid[0:64, 0:64]
    np.testing.assert_array_equal(masks[0], np.hypot(xx - cx, yy - cy) <= 12)
    # The pupil is painted on top of the iris.
    assert frames[0][int(round(cy)), int(round(cx))].max() < 0.1


def test_eye_parameter_order():
    with pytest.raises(ParameterOrderError):
        sg.eye_scene(iris_radius=5, pupil_radius=6)
    with pytest.raises(ParameterOrderError):
        sg.eye_scene(pupil_radius=0)


def test_shading_darkens_along_direction():
    frames, _ = sg.render(sg.eye_scene(shading=0.3, noise=0.0, frames=1))
    img = to_grayscale(frames[0])
    assert img[5, 2] < img[5, -3]          # default direction shades the left


def test_out_of_bounds():
    with pytest.raises(ShapeOutOfBoundsError):
        sg.render(sg.disk_scene(center=(40.0, 32.0), velocity=(10.0, 0.0), frames=3))


def test_spec_validation():
    disk = sg.Shape("disk", (10, 10), (3,), 0.5)
    with pytest.raises(ValueError):
        sg.SceneSpec(32, 32, 0.0, (disk,), noise=0.3)
    with pytest.raises(ValueError):
        sg.SceneSpec(32, 32, 0.0, ())
    with pytest.raises(ValueError):
        sg.Shape("triangle", (1, 1), (1,), 0.5)


def test_text_round_trip():
    spec = sg.eye_scene(shading=0.3, drift=(1.5, -0.5))
    assert sg.parse_scene(sg.format_scene(spec)) == spec
    two = sg.two_color_scene()
    assert sg.parse_scene(sg.format_scene(two)) == two


def test_parse_documented_example():
    text = """
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
    """
    spec = sg.parse_scene(text)
    assert spec.frames == 3 and spec.shading == sg.Shading(0.0, 0.3)
    assert spec.shapes[1].kind == "rect" and spec.shapes[1].color == (0.8, 0.2, 0.2)
    assert spec.is_color


@pytest.mark.parametrize("text", ["width = 10\n", "width = 10\nheight = 10\nshape = disk cx=5\n",
                                  "bogus = 1\n", "width 10\n"])
def test_parse_errors(text):
    with pytest.raises(ValueError):
        sg.parse_scene(text)


@settings(max_examples=40, deadline=None)
@given(st.floats(2.0, 12.0), st.floats(14.0, 49.0), st.floats(14.0, 49.0),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_mask_exactness(r, cx, cy, fx, fy):
    spec = sg.SceneSpec(64, 64, 0.0, (sg.Shape("disk", (cx + fx, cy + fy), (r,), 1.0),))
    _, masks = sg.render(spec)
    yy, xx = np.mgrid[0:64, 0:64]
    dist = np.hypot(xx - cx - fx, yy - cy - fy)
    assert np.all(dist[masks[0]] <= r)
    assert np.all(masks[0][dist <= r - 1.0])
