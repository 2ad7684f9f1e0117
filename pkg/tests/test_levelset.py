import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from contour_track import levelset as ls
from contour_track.errors import CFLViolationError, DegenerateMaskError

import oracles


def disk_sdf(n, r, cy=None, cx=None):
    cy = (n - 1) / 2 if cy is None else cy
    cx = (n - 1) / 2 if cx is None else cx
    yy, xx = np.mgrid[0:n, 0:n]
    return np.hypot(yy - cy, xx - cx) - r


def equivalent_radius(u):
    return math.sqrt(np.count_nonzero(u <= 0) / math.pi)


# -- upwind operators --------------------------------------------------------

def test_upwind_constant():
    u = np.full((5, 5), 3.0)
    plus, minus = ls.upwind_gradients(u)
    assert np.all(plus == 0) and np.all(minus == 0)


def test_upwind_ramp():
    u = np.tile(np.arange(7.0), (5, 1))
    for i in range(1, 4):
        for j in range(1, 6):
            assert ls.upwind_gradient_plus(u, i, j) == 1.0
            assert ls.upwind_gradient_minus(u, i, j) == 1.0


def test_upwind_kink():
    u = np.tile(np.abs(np.arange(7.0) - 3), (5, 1))
    assert ls.upwind_gradient_plus(u, 2, 3) == 0.0
    assert ls.upwind_gradient_minus(u, 2, 3) == math.sqrt(2.0)


def test_upwind_matches_loop_oracle_including_borders():
    u = np.random.default_rng(0).normal(size=(6, 7))
    plus, minus = ls.upwind_gradients(u)
    for i in range(6):
        for j in range(7):
            p, m = oracles.upwind_pair(u.tolist(), i, j)
            assert plus[i, j] == pytest.approx(p, abs=1e-12)
            assert minus[i, j] == pytest.approx(m, abs=1e-12)
            assert ls.upwind_gradient_plus(u, i, j) == pytest.approx(p, abs=1e-12)


def test_update_ignores_downwind_neighbour():
    # Growing front (v > 0) on a ramp increasing to the right: the left
    # difference is the upwind one, so the right neighbour must not matter.
    u = np.tile(np.arange(9.0), (5, 1))
    v = np.ones_like(u)
    base = ls.evolve_step(u, v, 0.0, 0.5)
    bumped = u.copy()
    bumped[2, 5] += 3.0
    out = ls.evolve_step(bumped, v, 0.0, 0.5)
    assert out[2, 4] == base[2, 4]
    bumped = u.copy()
    bumped[2, 3] -= 3.0
    assert ls.evolve_step(bumped, v, 0.0, 0.5)[2, 4] != base[2, 4]


# -- curvature ---------------------------------------------------------------

@pytest.mark.parametrize("r", [5.0, 8.0, 12.0])
def test_curvature_of_circle(r):
    u = disk_sdf(48, r, 23.5 + 0.3, 23.5)
    for ang in np.linspace(0, 2 * math.pi, 12, endpoint=False):
        i = int(round(23.8 + r * math.sin(ang)))
        j = int(round(23.5 + r * math.cos(ang)))
        assert ls.curvature(u, i, j) == pytest.approx(1 / r, rel=0.10, abs=0.1 / r)


def test_curvature_line_and_flat():
    u = np.tile(np.arange(8.0) - 3.5, (6, 1))
    assert np.all(ls.curvature_field(u) == 0)
    assert ls.curvature(np.full((5, 5), 2.0), 2, 2) == 0.0


def test_curvature_clamped():
    u = np.ones((5, 5))
    u[2, 2] = -1.0
    k = ls.curvature_field(u)
    assert np.all(np.abs(k) <= 1.0)


# -- time step and evolution -------------------------------------------------

def test_stable_dt_examples():
    assert ls.stable_dt(np.zeros((3, 3)), 0.0) == 1.0
    assert ls.stable_dt(np.ones((3, 3)), 0.0) == pytest.approx(0.9)
    assert ls.stable_dt(np.zeros((3, 3)), 1.0) == pytest.approx(0.225)


def test_evolve_identity():
    u = disk_sdf(20, 5)
    np.testing.assert_array_equal(ls.evolve_step(u, np.zeros_like(u), 0.0, 1.0), u)


def test_cfl_violation():
    u = disk_sdf(20, 5)
    with pytest.raises(CFLViolationError):
        ls.evolve_step(u, np.full_like(u, 2.0), 0.0, 0.5)
    ls.evolve_step(u, np.full_like(u, 2.0), 0.0, 0.45 * 1.009)
    with pytest.raises(ValueError):
        ls.evolve_step(u, np.zeros_like(u), 0.0, 0.0)


def test_unit_outward_motion():
    r0 = 8.0
    u = disk_sdf(48, r0)
    v = np.ones_like(u)
    t = 0.0
    dt = ls.stable_dt(v, 0.0)
    while t + dt <= 5.0 + 1e-9:
        u = ls.evolve_step(u, v, 0.0, dt)
        t += dt
    assert abs(equivalent_radius(u) - (r0 + t)) <= 1.0


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_constant_speed_area_monotone(c):
    u = disk_sdf(40, 10)
    v = np.full_like(u, c)
    areas = [np.count_nonzero(u <= 0)]
    for _ in range(6):
        u = ls.evolve_step(u, v, 0.0, 0.9)
        areas.append(np.count_nonzero(u <= 0))
    diffs = np.diff(areas)
    assert np.all(diffs > 0) if c > 0 else np.all(diffs < 0)


# -- masks, boundaries, distance --------------------------------------------

def test_extract_mask_and_boundary_extremes():
    assert not ls.extract_mask(np.ones((4, 4))).any()
    assert len(ls.extract_boundary(np.ones((4, 4)))) == 0
    full = ls.extract_boundary(-np.ones((4, 5)))
    assert len(full) == 2 * 4 + 2 * 5 - 4


def test_boundary_count_of_disk():
    n = len(ls.extract_boundary(disk_sdf(40, 10)))
    assert 2 * math.pi * 10 * 0.8 <= n <= 2 * math.pi * 10 * 1.5


def test_signed_distance_of_disk():
    mask = disk_sdf(64, 10, 32, 32) <= 0
    u = ls.init_signed_distance(mask)
    assert u[32, 32] == pytest.approx(-10, abs=0.6)
    assert u[0, 0] == pytest.approx(math.hypot(32, 32) - 10, abs=0.6)


def test_signed_distance_half_plane():
    mask = np.zeros((16, 64), bool)
    mask[:, :32] = True
    u = ls.init_signed_distance(mask)
    np.testing.assert_allclose(u, np.tile(np.arange(64) - 31.5, (16, 1)), atol=0.6)


def test_signed_distance_single_pixel():
    mask = np.zeros((9, 9), bool)
    mask[4, 6] = True
    u = ls.init_signed_distance(mask)
    assert np.unravel_index(np.argmin(u), u.shape) == (4, 6)


def test_signed_distance_degenerate():
    with pytest.raises(DegenerateMaskError):
        ls.init_signed_distance(np.zeros((4, 4), bool))
    with pytest.raises(DegenerateMaskError):
        ls.init_signed_distance(np.ones((4, 4), bool))


mask_strategy = arrays(bool, st.tuples(st.integers(2, 16), st.integers(2, 16))).filter(
    lambda m: m.any() and not m.all())


@settings(max_examples=100, deadline=None)
@given(mask_strategy)
def test_signed_distance_round_trip(mask):
    u = ls.init_signed_distance(mask)
    np.testing.assert_array_equal(ls.extract_mask(u), mask)
    assert np.all(np.isfinite(u))


def _gradient_ok_fraction(u):
    g = ls.central_gradient_norm(u)
    near = np.abs(u) <= 5
    return np.mean((g[near] >= 0.5) & (g[near] <= 1.5))


def test_signed_distance_gradient_property():
    u = ls.init_signed_distance(disk_sdf(48, 12) <= 0)
    assert _gradient_ok_fraction(u) >= 0.9


# -- reinitialisation -------------------------------------------------------

def test_reinit_fixed_point():
    u = disk_sdf(48, 11.3)
    out = ls.reinitialize(u)
    np.testing.assert_array_equal(ls.extract_mask(out), ls.extract_mask(u))
    near = np.abs(u) <= 5
    np.testing.assert_allclose(out[near], u[near], atol=0.1)


def test_reinit_rescaled_distance():
    d = disk_sdf(48, 9.6)
    out = ls.reinitialize(5.0 * d)
    np.testing.assert_array_equal(ls.extract_mask(out), ls.extract_mask(d))
    near = np.abs(d) <= 5
    np.testing.assert_allclose(out[near], d[near], atol=0.15)
    assert _gradient_ok_fraction(out) >= 0.9


def test_reinit_steep_front_against_mask_distance():
    d = disk_sdf(48, 10.2, 23.1, 24.4)
    u = np.tanh(d)
    out = ls.reinitialize(u)
    mask = ls.extract_mask(u)
    edt = np.where(mask, 0.5 - ndimage.distance_transform_edt(mask),
                   ndimage.distance_transform_edt(~mask) - 0.5)
    near = np.abs(d) <= 3
    assert np.max(np.abs(out[near] - edt[near])) <= 0.6
    np.testing.assert_array_equal(ls.extract_mask(out), mask)


def test_reinit_keeps_mask_of_evolved_front():
    u = disk_sdf(40, 9)
    for _ in range(30):
        u = ls.evolve_step(u, np.full_like(u, 0.3), 0.5, ls.stable_dt(0.3, 0.5))
    before = ls.extract_mask(u)
    after = ls.extract_mask(ls.reinitialize(u))
    assert np.count_nonzero(before ^ after) <= 0.02 * np.count_nonzero(before)


def test_reinit_degenerate():
    with pytest.raises(DegenerateMaskError):
        ls.reinitialize(np.ones((5, 5)))


# -- perimeter ---------------------------------------------------------------

def test_perimeter_of_circle():
    assert ls.perimeter(disk_sdf(64, 15)) == pytest.approx(2 * math.pi * 15, rel=0.01)


def test_perimeter_matches_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        u = rng.normal(size=(9, 11))
        assert ls.perimeter(u) == pytest.approx(oracles.perimeter(u.tolist()), abs=1e-12)
