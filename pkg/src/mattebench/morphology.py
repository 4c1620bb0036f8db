"""Binary erosion/dilation, border maps and trimap synthesis.

Pixels outside the raster count as background for both operators, so a
subject touching the image edge keeps its edge pixels in the border band.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mattebench.imagecore import as_mask, as_plane

BACKGROUND = 0
UNKNOWN = 128
FOREGROUND = 255


@dataclass(frozen=True)
class StructuringElement:
    shape: str = "square"
    radius: int = 5

    def __post_init__(self):
        if self.shape not in ("square", "disk"):
            raise ValueError(f"structuring element shape must be 'square' or 'disk', got {self.shape!r}")
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"structuring element radius must be an integer >= 1, got {self.radius}")

    @cached_property
    def offsets(self):
        """(dy, dx) pairs covered by the footprint, origin included."""
        r = self.radius
        out = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if self.shape == "square" or dy * dy + dx * dx <= r * r:
                    out.append((dy, dx))
        return tuple(out)

    def footprint(self):
        r = self.radius
        fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        for dy, dx in self.offsets:
            fp[dy + r, dx + r] = True
        return fp


@dataclass(frozen=True)
class BorderMap:
    mask: np.ndarray
    source_radius: int


def _sweep(mask, se, reduce_and, outside):
    r = se.radius
    h, w = mask.shape
    padded = np.pad(mask, r, constant_values=outside)
    out = np.full((h, w), reduce_and, dtype=bool)
    for dy, dx in se.offsets:
        window = padded[r + dy : r + dy + h, r + dx : r + dx + w]
        if reduce_and:
            out &= window
        else:
            out |= window
    return out


def erode(mask, se, outside=False):
    """True where every pixel under the footprint is true.

    ``outside`` is the value assumed beyond the raster edge.
    """
    return _sweep(as_mask(mask), se, True, outside)


def dilate(mask, se, outside=False):
    """True where any pixel under the footprint is true."""
    return _sweep(as_mask(mask), se, False, outside)


def border_map(seg, se):
    """Ring of pixels in the dilation but not the erosion of ``seg``."""
    seg = as_mask(seg, "seg")
    return BorderMap(dilate(seg, se) & ~erode(seg, se), se.radius)


def make_trimap(alpha, fg_threshold=0.5, unknown_se=StructuringElement()):
    """Ternary map (0 / 128 / 255) from a matte.

    Binarise at ``fg_threshold``; the eroded binary region is foreground,
    everything outside the dilation is background, the rest unknown.
    """
    if not 0.0 < fg_threshold < 1.0:
        raise ValueError(f"fg_threshold must lie in (0, 1), got {fg_threshold}")
    alpha = as_plane(alpha, "alpha")
    b = alpha >= fg_threshold
    trimap = np.full(alpha.shape, UNKNOWN, dtype=np.uint8)
    trimap[erode(b, unknown_se)] = FOREGROUND
    trimap[~dilate(b, unknown_se)] = BACKGROUND
    return trimap


def trimap_counts(trimap):
    return {
        "background": int(np.count_nonzero(trimap == BACKGROUND)),
        "unknown": int(np.count_nonzero(trimap == UNKNOWN)),
        "foreground": int(np.count_nonzero(trimap == FOREGROUND)),
    }
