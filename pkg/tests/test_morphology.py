import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mattebench.morphology import (
    BACKGROUND,
    FOREGROUND,
    UNKNOWN,
    StructuringElement,
    border_map,
    dilate,
    erode,
    make_trimap,
    trimap_counts,
)

from oracles import naive_morph as naive

SQ1 = StructuringElement("square", 1)


def test_structuring_element_validation():
    with pytest.raises(ValueError):
        StructuringElement("square", 0)
    with pytest.raises(ValueError):
        StructuringElement("cross", 1)
    assert len(StructuringElement("disk", 1).offsets) == 5
    assert len(StructuringElement("square", 2).offsets) == 25


def test_erode_full_5x5():
    out = erode(np.ones((5, 5), bool), SQ1)
    expected = np.zeros((5, 5), bool)
    expected[1:4, 1:4] = True
    np.testing.assert_array_equal(out, expected)


def test_erode_trivial():
    assert not erode(np.zeros((5, 5), bool), SQ1).any()
    single = np.zeros((5, 5), bool)
    single[2, 2] = True
    assert not erode(single, SQ1).any()
    assert not erode(single, StructuringElement("disk", 2)).any()


def test_dilate_examples():
    single = np.zeros((5, 5), bool)
    single[2, 2] = True
    expected = np.zeros((5, 5), bool)
    expected[1:4, 1:4] = True
    np.testing.assert_array_equal(dilate(single, SQ1), expected)
    assert dilate(np.ones((5, 5), bool), SQ1).all()
    assert not dilate(np.zeros((5, 5), bool), SQ1).any()


def test_border_map_24():
    seg = np.zeros((5, 5), bool)
    seg[1:4, 1:4] = True
    bm = border_map(seg, SQ1)
    assert bm.mask.sum() == 24
    assert not bm.mask[2, 2]
    assert bm.source_radius == 1


@pytest.mark.parametrize("r", [1, 2])
def test_border_map_full_and_empty(r):
    se = StructuringElement("square", r)
    assert not border_map(np.zeros((7, 7), bool), se).mask.any()
    ring = border_map(np.ones((7, 7), bool), se).mask
    expected = np.ones((7, 7), bool)
    expected[r:-r, r:-r] = False
    np.testing.assert_array_equal(ring, expected)


def masks(n=16):
    return arrays(np.bool_, (n, n))


ses = st.builds(StructuringElement, st.sampled_from(["square", "disk"]), st.integers(1, 3))


@settings(max_examples=60, deadline=None)
@given(masks(), masks(), ses)
def test_morphology_properties(a, b, se):
    er, di = erode(a, se), dilate(a, se)
    assert np.all(er <= a) and np.all(a <= di)
    np.testing.assert_array_equal(er, ~dilate(~a, se, outside=True))
    np.testing.assert_array_equal(di, ~erode(~a, se, outside=True))
    lo, hi = a & b, a | b
    assert np.all(erode(lo, se) <= erode(hi, se))
    assert np.all(dilate(lo, se) <= dilate(hi, se))
    ring = border_map(a, se).mask
    assert not (ring & er).any()
    assert np.all(ring <= di)


@settings(max_examples=40, deadline=None)
@given(arrays(np.bool_, st.tuples(st.integers(1, 9), st.integers(1, 9))), ses, st.booleans())
def test_matches_naive(a, se, outside):
    np.testing.assert_array_equal(erode(a, se, outside), naive(a, se, True, outside))
    np.testing.assert_array_equal(dilate(a, se, outside), naive(a, se, False, outside))


def test_trimap_binary_alpha_unknown_is_border(rng):
    alpha = (rng.random((12, 12)) > 0.5).astype(float)
    tri = make_trimap(alpha, 0.5, SQ1)
    b = alpha >= 0.5
    np.testing.assert_array_equal(tri == UNKNOWN, border_map(b, SQ1).mask)
    assert set(np.unique(tri)) <= {BACKGROUND, UNKNOWN, FOREGROUND}


def test_trimap_extremes():
    assert np.all(make_trimap(np.zeros((6, 6)), 0.5, SQ1) == BACKGROUND)
    tri = make_trimap(np.ones((6, 6)), 0.5, SQ1)
    assert np.all(tri[1:-1, 1:-1] == FOREGROUND)
    ring = np.ones((6, 6), bool)
    ring[1:-1, 1:-1] = False
    assert np.all(tri[ring] == UNKNOWN)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (10, 11), elements=st.floats(0, 1)), st.floats(0.05, 0.95), ses)
def test_trimap_partition(alpha, thr, se):
    c = trimap_counts(make_trimap(alpha, thr, se))
    assert sum(c.values()) == alpha.size


def test_trimap_threshold_validation():
    with pytest.raises(ValueError):
        make_trimap(np.zeros((3, 3)), 1.0, SQ1)
