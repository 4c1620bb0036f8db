"""Raster carriers, validation, bilinear resize and lossless file I/O.

Rasters are plain numpy arrays:

* RGB image   -- float64, shape (H, W, 3), samples in [0, 1]
* plane/alpha -- float64, shape (H, W), samples in [0, 1]
* binary mask -- bool, shape (H, W)

The ``as_*`` helpers check those invariants and return float64/bool
copies or views; every public operation in the package funnels its inputs
through them.
"""

from pathlib import Path

import cv2
import numpy as np

from mattebench.errors import DimensionMismatch, ImageIOError, InvalidRaster

LOSSLESS_SUFFIXES = {".png", ".tif", ".tiff", ".bmp", ".pgm", ".ppm"}

_MAGIC = (
    b"\x89PNG\r\n\x1a\n",
    b"II*\x00",
    b"MM\x00*",
    b"BM",
    b"P5",
    b"P6",
)


def _check_range(arr, what):
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise InvalidRaster(f"{what}: samples must lie in [0, 1]")


def as_plane(arr, what="plane"):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or 0 in arr.shape:
        raise InvalidRaster(f"{what}: expected a non-empty (H, W) array, got shape {arr.shape}")
    _check_range(arr, what)
    return arr


def as_rgb(arr, what="image"):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or 0 in arr.shape:
        raise InvalidRaster(f"{what}: expected a non-empty (H, W, 3) array, got shape {arr.shape}")
    _check_range(arr, what)
    return arr


def as_raster(arr, what="raster"):
    """Accept either an RGB image or a single plane."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        return as_plane(arr, what)
    return as_rgb(arr, what)


def as_mask(arr, what="mask"):
    arr = np.asarray(arr)
    if arr.ndim != 2 or 0 in arr.shape:
        raise InvalidRaster(f"{what}: expected a non-empty (H, W) array, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidRaster(f"{what}: non-boolean values in mask")
        arr = arr.astype(bool)
    return arr


def size_of(arr):
    """(width, height) of any raster."""
    return arr.shape[1], arr.shape[0]


def check_same_size(where, **rasters):
    sizes = {name: a.shape[:2] for name, a in rasters.items()}
    if len(set(sizes.values())) > 1:
        desc = ", ".join(f"{n} {w}x{h}" for n, (h, w) in sizes.items())
        raise DimensionMismatch(f"{where}: dimension mismatch: {desc}")


def load_image(path, kind="rgb"):
    """Read an 8- or 16-bit lossless raster and normalise to [0, 1].

    ``kind`` is ``"rgb"`` (returns (H, W, 3)) or ``"gray"`` (returns (H, W)).
    """
    if kind not in ("rgb", "gray"):
        raise ValueError(f"kind must be 'rgb' or 'gray', got {kind!r}")
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(path, "file-not-found")
    if path.suffix.lower() not in LOSSLESS_SUFFIXES:
        raise ImageIOError(path, "unsupported-format", f"suffix {path.suffix or '(none)'}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if not head.startswith(_MAGIC):
        raise ImageIOError(path, "unsupported-format", "unrecognised file signature")

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(path, "corrupt-data", "decoder rejected the file")
    if raw.dtype == np.uint8:
        maxval = 255.0
    elif raw.dtype == np.uint16:
        maxval = 65535.0
    else:
        raise ImageIOError(path, "unsupported-format", f"sample type {raw.dtype}")

    if raw.ndim == 3 and raw.shape[2] == 4:
        raw = raw[:, :, :3]
    if raw.ndim == 3 and raw.shape[2] == 1:
        raw = raw[:, :, 0]

    if kind == "rgb":
        if raw.ndim == 2:
            data = np.repeat(raw[:, :, None], 3, axis=2)
        else:
            data = raw[:, :, ::-1]
    else:
        if raw.ndim == 2:
            data = raw
        elif np.array_equal(raw[:, :, 0], raw[:, :, 1]) and np.array_equal(raw[:, :, 1], raw[:, :, 2]):
            data = raw[:, :, 0]
        else:
            data = cv2.cvtColor(raw, cv2.COLOR_BGR2GRAY)
    return np.ascontiguousarray(data, dtype=np.float64) / maxval


def quantize(arr, bit_depth):
    maxval = (1 << bit_depth) - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.rint(np.clip(arr, 0.0, 1.0) * maxval).astype(dtype)


def save_image(img, path, bit_depth=8):
    """Write an RGB image or plane as a lossless raster (PNG by suffix)."""
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    img = as_raster(img)
    path = Path(path)
    if path.suffix.lower() not in LOSSLESS_SUFFIXES:
        raise ImageIOError(path, "invalid-path", "suffix must name a lossless format")
    if not path.parent.is_dir():
        raise ImageIOError(path, "invalid-path", "parent directory does not exist")
    q = quantize(img, bit_depth)
    if q.ndim == 3:
        q = np.ascontiguousarray(q[:, :, ::-1])
    try:
        ok = cv2.imwrite(str(path), q)
    except cv2.error as exc:
        raise ImageIOError(path, "io-failure", str(exc).strip()) from exc
    if not ok:
        raise ImageIOError(path, "io-failure", "encoder refused to write")


def _axis_weights(n_out, n_in):
    # half-pixel centres, edge-clamped
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def resize(img, target_w, target_h):
    """Bilinear resize to exactly ``target_w`` x ``target_h``."""
    if target_w < 1 or target_h < 1:
        raise InvalidRaster(f"resize: zero-dimension target {target_w}x{target_h}")
    img = as_raster(img)
    h, w = img.shape[:2]
    if (w, h) == (target_w, target_h):
        return img.copy()

    y0, y1, wy = _axis_weights(target_h, h)
    x0, x1, wx = _axis_weights(target_w, w)
    if img.ndim == 3:
        wy = wy[:, None, None]
        wx = wx[None, :, None]
    else:
        wy = wy[:, None]
        wx = wx[None, :]

    top = img[y0][:, x0] + wx * (img[y0][:, x1] - img[y0][:, x0])
    bot = img[y1][:, x0] + wx * (img[y1][:, x1] - img[y1][:, x0])
    out = top + wy * (bot - top)
    return np.clip(out, 0.0, 1.0)


def box_downsample(img, factor):
    """Average non-overlapping ``factor`` x ``factor`` blocks.

    Output dims are ceil(dim / factor); blocks clipped by the image edge
    average only the pixels they contain.
    """
    img = np.asarray(img, dtype=np.float64)
    if factor == 1:
        return img.copy()
    h, w = img.shape[:2]
    oh, ow = -(-h // factor), -(-w // factor)
    pad = [(0, oh * factor - h), (0, ow * factor - w)] + [(0, 0)] * (img.ndim - 2)
    summed = np.pad(img, pad).reshape(oh, factor, ow, factor, *img.shape[2:]).sum(axis=(1, 3))
    ones = np.pad(np.ones((h, w)), pad[:2]).reshape(oh, factor, ow, factor).sum(axis=(1, 3))
    if img.ndim == 3:
        ones = ones[:, :, None]
    return summed / ones
