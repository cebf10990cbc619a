import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meteorflow.imgproc import BinaryMask, GrayFrame, ThresholdParams, binarize

frames = arrays(np.uint8, st.tuples(st.integers(2, 24), st.integers(2, 24)))


def test_zero_frame_gives_empty_mask(backend):
    mask = binarize(GrayFrame(np.zeros((4, 4), np.uint8)), 1)
    assert mask.count() == 0
    assert mask.shape == (4, 4)


def test_single_bright_pixel(backend):
    data = np.zeros((6, 6), np.uint8)
    data[3, 2] = 255
    mask = binarize(GrayFrame(data), 100)
    assert np.argwhere(mask.bits).tolist() == [[3, 2]]


def test_matches_per_pixel_loop(backend):
    rng = np.random.default_rng(11)
    data = rng.integers(0, 256, (16, 16), dtype=np.uint8)
    mask = binarize(GrayFrame(data), 128)
    expected = np.zeros((16, 16), bool)
    for y in range(16):
        for x in range(16):
            expected[y, x] = int(data[y, x]) >= 128
    assert np.array_equal(mask.bits, expected)


def test_threshold_is_inclusive(backend):
    data = np.array([[54, 55], [56, 0]], np.uint8)
    assert binarize(GrayFrame(data), 55).bits.tolist() == [[False, True], [True, False]]


@settings(max_examples=60, deadline=None)
@given(frames, st.integers(0, 255), st.integers(0, 255))
def test_raising_threshold_never_adds_pixels(data, a, b):
    lo, hi = sorted((a, b))
    f = GrayFrame(data)
    m_lo, m_hi = binarize(f, lo), binarize(f, hi)
    assert not np.any(m_hi.bits & ~m_lo.bits)
    assert m_lo.shape == data.shape


@settings(max_examples=30, deadline=None)
@given(frames)
def test_zero_threshold_marks_everything(data):
    assert binarize(GrayFrame(data), 0).bits.all()


def test_frame_validation():
    with pytest.raises(ValueError):
        GrayFrame(np.zeros((1, 5), np.uint8))
    with pytest.raises(ValueError):
        GrayFrame(np.zeros((4, 4), np.uint16))
    with pytest.raises(ValueError):
        GrayFrame(np.zeros((4, 4), np.uint8), t=-1)
    f = GrayFrame(np.zeros((3, 5), np.uint8), 7)
    assert (f.width, f.height, f.t) == (5, 3, 7)


def test_threshold_params_validation():
    ThresholdParams(0, 255)
    with pytest.raises(ValueError):
        ThresholdParams(90, 80)
    with pytest.raises(ValueError):
        ThresholdParams(-1, 80)


def test_mask_equality():
    a = BinaryMask(np.eye(3, dtype=bool))
    assert a == BinaryMask(np.eye(3, dtype=bool))
    assert a != BinaryMask(np.zeros((3, 3), bool))
