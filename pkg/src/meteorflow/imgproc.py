"""Pixel-level front end: frames, masks and low-threshold binarization."""
from dataclasses import dataclass

import numpy as np

from . import _kernels

DEFAULT_LIGHT_MIN = 55
DEFAULT_LIGHT_MAX = 80


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """One 8-bit grayscale image of a stream.

    ``data`` is a C-contiguous ``(height, width)`` uint8 array, i.e. row-major.
    """

    data: np.ndarray
    t: int = 0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data)
        if data.dtype != np.uint8:
            raise ValueError(f"frame data must be uint8, got {data.dtype}")
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
            raise ValueError(f"frame must be 2-D and at least 2x2, got shape {data.shape}")
        if self.t < 0:
            raise ValueError(f"frame index must be non-negative, got {self.t}")
        object.__setattr__(self, "data", data)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def shape(self):
        return self.bits.shape

    def count(self):
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class ThresholdParams:
    light_min: int = DEFAULT_LIGHT_MIN
    light_max: int = DEFAULT_LIGHT_MAX

    def __post_init__(self):
        if not 0 <= self.light_min <= self.light_max <= 255:
            raise ValueError(
                f"need 0 <= light_min <= light_max <= 255, got {self.light_min}, {self.light_max}"
            )


def binarize(frame: GrayFrame, light_min: int) -> BinaryMask:
    """Keep pixels with intensity >= ``light_min``."""
    return BinaryMask(_kernels.binarize(frame.data, int(light_min)))
