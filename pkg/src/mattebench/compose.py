"""Compositing I = a*F + (1 - a)*B and the multiplicative extractions built on it."""

from dataclasses import dataclass

import numpy as np

from mattebench.imagecore import as_mask, as_plane, as_rgb, check_same_size


@dataclass(frozen=True)
class CompositePair:
    composite: np.ndarray
    alpha: np.ndarray
    fg_source: str
    bg_source: str

    def __post_init__(self):
        check_same_size("CompositePair", composite=self.composite, alpha=self.alpha)


def composite(fg, bg, alpha):
    """Blend ``fg`` over ``bg`` with the per-pixel opacity ``alpha``.

    The same alpha applies to all three channels.
    """
    fg = as_rgb(fg, "fg")
    bg = as_rgb(bg, "bg")
    alpha = as_plane(alpha, "alpha")
    check_same_size("compose.composite", fg=fg, bg=bg, alpha=alpha)
    a = alpha[:, :, None]
    return np.clip(a * fg + (1.0 - a) * bg, 0.0, 1.0)


def extract_foreground(img, alpha):
    """The "foreground subject": image scaled by its matte."""
    img = as_rgb(img)
    alpha = as_plane(alpha, "alpha")
    check_same_size("compose.extract_foreground", img=img, alpha=alpha)
    return alpha[:, :, None] * img


def apply_segmentation(img, seg):
    """Zero every pixel outside the binary segmentation."""
    img = as_rgb(img)
    seg = as_mask(seg, "seg")
    check_same_size("compose.apply_segmentation", img=img, seg=seg)
    return np.where(seg[:, :, None], img, 0.0)


def concat_alpha(img, alpha):
    """Depth-wise stack RGB + alpha into an (H, W, 4) array."""
    img = as_rgb(img)
    alpha = as_plane(alpha, "alpha")
    check_same_size("compose.concat_alpha", img=img, alpha=alpha)
    return np.concatenate([img, alpha[:, :, None]], axis=2)
