"""Connected-component labeling with fused component analysis.

Components use 8-connectivity.  Labels follow the raster order of each
component's first pixel, so results are deterministic and identical across
kernel backends.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import GeometryMismatchError
from .imgproc import BinaryMask, GrayFrame

DEFAULT_SURFACE_MIN = 3
DEFAULT_SURFACE_MAX = 1000


class CC(NamedTuple):
    """A connected component and its features.

    ``cx``/``cy`` is the (unweighted) centroid in pixel coordinates, x being
    the column.  The bounding box is inclusive on both ends.
    """

    label: int
    area: int
    cx: float
    cy: float
    xmin: int
    xmax: int
    ymin: int
    ymax: int
    vmax: int


@dataclass(frozen=True, eq=False)
class LabelMap:
    labels: np.ndarray

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]


@dataclass(frozen=True)
class SurfaceParams:
    surface_min: int = DEFAULT_SURFACE_MIN
    surface_max: float = DEFAULT_SURFACE_MAX

    def __post_init__(self):
        if not 1 <= self.surface_min <= self.surface_max:
            raise ValueError(
                f"need 1 <= surface_min <= surface_max, got {self.surface_min}, {self.surface_max}"
            )


def label_and_analyze(mask: BinaryMask, frame: GrayFrame):
    """Label ``mask`` and measure every component against ``frame``.

    Returns ``(LabelMap, ccs)`` with ``ccs`` sorted by label.
    """
    if mask.shape != frame.shape:
        raise GeometryMismatchError(
            f"mask shape {mask.shape} does not match frame shape {frame.shape}"
        )
    bits = mask.bits
    if _kernels.BACKEND == "cython":
        bits = np.ascontiguousarray(bits, dtype=np.bool_).view(np.uint8)
    labels, area, sx, sy, xmin, xmax, ymin, ymax, vmax = _kernels.label(bits, frame.data)
    ccs = [
        CC(i + 1, a, x / a, y / a, x0, x1, y0, y1, v)
        for i, (a, x, y, x0, x1, y0, y1, v) in enumerate(zip(
            area.tolist(), sx.tolist(), sy.tolist(), xmin.tolist(), xmax.tolist(),
            ymin.tolist(), ymax.tolist(), vmax.tolist(),
        ))
    ]
    return LabelMap(labels), ccs


def filter_hysteresis(ccs, light_max):
    """Keep components whose brightest pixel reaches ``light_max``."""
    return [cc for cc in ccs if cc.vmax >= light_max]


def filter_surface(ccs, params: SurfaceParams):
    lo, hi = params.surface_min, params.surface_max
    return [cc for cc in ccs if lo <= cc.area <= hi]


UNBOUNDED_SURFACE = SurfaceParams(1, math.inf)
