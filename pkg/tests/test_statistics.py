import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contour_track import statistics as stats
from contour_track.errors import BinCountMismatchError, EmptyRegionError

import oracles


def test_uniform_half_goes_to_bin_16():
    h = stats.build_histogram(np.full((4, 4), 0.5), np.ones((4, 4), bool), 32)
    assert h.raw[16] == 1.0 and h.raw.sum() == 1.0


def test_extremes_split_between_end_bins():
    feat = np.array([[0.0, 1.0]])
    h = stats.build_histogram(feat, np.ones((1, 2), bool), 8)
    assert h.raw[0] == 0.5 and h.raw[7] == 0.5


def test_one_is_clamped_to_last_bin():
    assert stats.bin_index(np.array([1.0, 0.999999, 0.0]), 10).tolist() == [9, 9, 0]


def test_floor_and_normalisation():
    eps = 1e-6
    h = stats.build_histogram(np.full((3, 3), 0.2), np.ones((3, 3), bool), 16, eps)
    assert h.bins.sum() == pytest.approx(1.0, abs=1e-9)
    assert h.bins.min() >= eps / (1 + 16 * eps) * (1 - 1e-12)


def test_matches_loop_histogram():
    rng = np.random.default_rng(2)
    feat = rng.uniform(size=(9, 9))
    mask = rng.random((9, 9)) < 0.5
    h = stats.build_histogram(feat, mask, 12)
    ref = oracles.histogram(feat[mask].tolist(), 12)
    np.testing.assert_allclose(h.bins, ref, atol=1e-15)


def test_empty_region():
    with pytest.raises(EmptyRegionError):
        stats.build_histogram(np.zeros((3, 3)), np.zeros((3, 3), bool))


def test_bin_count_validation():
    with pytest.raises(ValueError):
        stats.build_histogram(np.zeros((3, 3)), np.ones((3, 3), bool), 1)


def test_kl_self_is_zero():
    h = stats.from_counts(np.array([3, 0, 5, 2]))
    assert stats.kl_divergence(h, h) == 0.0


def test_kl_two_bin_hand_value():
    eps = 1e-6
    p = stats.from_counts(np.array([1.0, 0.0]), eps)
    q = stats.from_counts(np.array([0.0, 1.0]), eps)
    hi, lo = (1 + eps) / (1 + 2 * eps), eps / (1 + 2 * eps)
    expected = hi * math.log(hi / lo) + lo * math.log(lo / hi)
    assert stats.kl_divergence(p, q) == pytest.approx(expected, rel=1e-12)
    assert expected > 0


def test_kl_four_bin_hand_value():
    eps = 1e-6
    p = stats.from_counts(np.ones(4), eps)
    q = stats.from_counts(np.array([0.7, 0.1, 0.1, 0.1]), eps)
    expected = sum(0.25 * math.log(0.25 / qb) for qb in (0.7, 0.1, 0.1, 0.1))
    assert stats.kl_divergence(p, q) == pytest.approx(expected, rel=1e-5)


def test_kl_bin_mismatch():
    with pytest.raises(BinCountMismatchError):
        stats.kl_divergence(stats.from_counts(np.ones(4)), stats.from_counts(np.ones(5)))


def test_complement_mask():
    m = np.array([[True, False], [False, False]])
    np.testing.assert_array_equal(stats.complement_mask(m), ~m)


def test_histogram_equality():
    a = stats.from_counts(np.array([1, 2, 3]))
    assert a == stats.from_counts(np.array([1, 2, 3]))
    assert a != stats.from_counts(np.array([3, 2, 1]))


counts = st.lists(st.integers(0, 50), min_size=8, max_size=8).filter(lambda c: sum(c) > 0)


@settings(max_examples=200, deadline=None)
@given(counts, counts)
def test_kl_properties(a, b):
    p, q = stats.from_counts(np.array(a)), stats.from_counts(np.array(b))
    d = stats.kl_divergence(p, q)
    assert d >= 0.0
    assert d == pytest.approx(oracles.kl(p.bins.tolist(), q.bins.tolist()), abs=1e-12)
