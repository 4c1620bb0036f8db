"""Training-loss suite for the alpha generator.

Masked L1 terms report a sum, a count and a mean; the weighted aggregate
consumes the means so the coefficients do not depend on resolution.
The adversarial term is not computed here and enters ``total_loss`` as a
caller-supplied scalar.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from mattebench.compose import extract_foreground
from mattebench.errors import DimensionMismatch, MatteError
from mattebench.imagecore import as_mask, as_plane, as_raster, as_rgb, box_downsample, check_same_size
from mattebench.morphology import BorderMap, StructuringElement, border_map

DEFAULT_EPS = 0.5 / 255
N_LEVELS = 5
STUB_STRIDES = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class LossCoefficients:
    lambda_per: float = 10.0
    beta_alpha: float = 25.0
    gamma_border: float = 50.0
    theta_ac: float = 25.0

    def __post_init__(self):
        for name in ("lambda_per", "beta_alpha", "gamma_border", "theta_ac"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"loss coefficient {name} must be >= 0")


@dataclass(frozen=True)
class LossBreakdown:
    cgan: float = 0.0
    perceptual: float = 0.0
    alpha: float = 0.0
    border: float = 0.0
    alpha_coeff: float = 0.0


@dataclass(frozen=True)
class MaskedL1Result:
    sum: float
    count: int
    mean: float


@dataclass
class FeatureStack:
    levels: list
    level_weights: list = field(default_factory=lambda: [1.0 / N_LEVELS] * N_LEVELS)

    def __post_init__(self):
        if len(self.levels) != N_LEVELS or len(self.level_weights) != N_LEVELS:
            raise ValueError(f"a feature stack holds exactly {N_LEVELS} levels and {N_LEVELS} weights")


class FeatureExtractor(Protocol):
    def __call__(self, img: np.ndarray) -> FeatureStack: ...


def masked_l1(pred, gt, mask):
    pred = as_raster(pred, "pred")
    gt = as_raster(gt, "gt")
    mask = as_mask(mask)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"losses.masked_l1: pred {pred.shape} vs gt {gt.shape}")
    check_same_size("losses.masked_l1", pred=pred, mask=mask)
    diff = np.abs(pred - gt)
    if diff.ndim == 3:
        diff = diff.sum(axis=2)
        channels = pred.shape[2]
    else:
        channels = 1
    total = float(diff[mask].sum())
    count = int(np.count_nonzero(mask)) * channels
    return MaskedL1Result(total, count, total / count if count else 0.0)


def _check_eps(eps):
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must lie in [0, 0.5), got {eps}")


def binary_region(gt, eps=DEFAULT_EPS):
    """Pixels whose ground-truth opacity is (within eps of) 0 or 1."""
    _check_eps(eps)
    gt = as_plane(gt, "gt")
    return (gt <= eps) | (gt >= 1.0 - eps)


def fractional_region(gt, eps=DEFAULT_EPS):
    _check_eps(eps)
    gt = as_plane(gt, "gt")
    return (gt > eps) & (gt < 1.0 - eps)


def alpha_loss(pred, gt, eps=DEFAULT_EPS):
    """L1 over pixels where the true matte is 0 or 1."""
    return masked_l1(pred, gt, binary_region(gt, eps))


def alpha_coefficient_loss(pred, gt, eps=DEFAULT_EPS):
    """L1 over pixels where the true matte is strictly between 0 and 1."""
    return masked_l1(pred, gt, fractional_region(gt, eps))


def border_loss(pred, gt, border: BorderMap):
    return masked_l1(pred, gt, border.mask)


def perceptual_loss(pred_feats: FeatureStack, gt_feats: FeatureStack):
    """Weighted sum over levels of the mean absolute feature difference."""
    if list(pred_feats.level_weights) != list(gt_feats.level_weights):
        raise MatteError("losses.perceptual_loss: weight-mismatch between feature stacks")
    total = 0.0
    for k, (p, g, w) in enumerate(zip(pred_feats.levels, gt_feats.levels, pred_feats.level_weights)):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape:
            raise DimensionMismatch(f"losses.perceptual_loss: level-shape-mismatch at level {k}: {p.shape} vs {g.shape}")
        total += w * float(np.abs(p - g).mean())
    return total


def stub_feature_extractor(img):
    """Deterministic stand-in for a pretrained feature network.

    Levels are channelwise average-pooled copies of the image at strides
    1, 2, 4, 8 and 16. A single plane is treated as a gray RGB image.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    img = as_rgb(img)
    h, w = img.shape[:2]
    if h < 16 or w < 16:
        raise DimensionMismatch(f"losses.stub_feature_extractor: image {w}x{h} smaller than 16x16")
    return FeatureStack([box_downsample(img, s) for s in STUB_STRIDES])


def region_kernel(mask):
    """Mean masked L1 over a fixed region, usable on planes and RGB alike."""
    return lambda p, g: masked_l1(p, g, mask).mean


def l1_kernel(p, g):
    return masked_l1(p, g, np.ones(np.shape(p)[:2], dtype=bool)).mean


def perceptual_kernel(extractor: FeatureExtractor = stub_feature_extractor):
    return lambda p, g: perceptual_loss(extractor(p), extractor(g))


def dual_loss(pred, gt, img, kernel: Callable[[np.ndarray, np.ndarray], float]):
    """Kernel on the mattes plus kernel on the foreground subjects they cut out."""
    pred = as_plane(pred, "pred")
    gt = as_plane(gt, "gt")
    img = as_rgb(img)
    check_same_size("losses.dual_loss", pred=pred, gt=gt, img=img)
    return kernel(pred, gt) + kernel(extract_foreground(img, pred), extract_foreground(img, gt))


def total_loss(breakdown: LossBreakdown, coeffs: LossCoefficients = LossCoefficients()):
    parts = (breakdown.cgan, breakdown.perceptual, breakdown.alpha, breakdown.border, breakdown.alpha_coeff)
    if not all(math.isfinite(x) for x in parts):
        raise ValueError("losses.total_loss: non-finite loss component")
    return (
        breakdown.cgan
        + coeffs.lambda_per * breakdown.perceptual
        + coeffs.beta_alpha * breakdown.alpha
        + coeffs.gamma_border * breakdown.border
        + coeffs.theta_ac * breakdown.alpha_coeff
    )


@dataclass
class LossReport:
    breakdown: LossBreakdown
    terms: dict
    total: float


def compute_losses(
    pred,
    gt,
    img=None,
    seg=None,
    se=StructuringElement(),
    eps=DEFAULT_EPS,
    cgan=0.0,
    coeffs=LossCoefficients(),
    extractor: FeatureExtractor | None = stub_feature_extractor,
):
    """Evaluate every term for one prediction and fold them into the total.

    With ``img`` the alpha, alpha-coefficient and perceptual terms use the
    dual matte + foreground form; without it only the matte domain. The
    border ring comes from ``seg`` (defaults to the ground truth
    binarised at 0.5). ``extractor=None`` skips the perceptual term.
    """
    pred = as_plane(pred, "pred")
    gt = as_plane(gt, "gt")
    check_same_size("losses.compute_losses", pred=pred, gt=gt)
    if seg is None:
        seg = gt >= 0.5
    border = border_map(seg, se)

    terms = {
        "alpha": alpha_loss(pred, gt, eps),
        "alpha_coeff": alpha_coefficient_loss(pred, gt, eps),
        "border": border_loss(pred, gt, border),
    }
    if img is not None:
        alpha_val = dual_loss(pred, gt, img, region_kernel(binary_region(gt, eps)))
        ac_val = dual_loss(pred, gt, img, region_kernel(fractional_region(gt, eps)))
    else:
        alpha_val = terms["alpha"].mean
        ac_val = terms["alpha_coeff"].mean

    per_val = 0.0
    if extractor is not None:
        kern = perceptual_kernel(extractor)
        per_val = dual_loss(pred, gt, img, kern) if img is not None else kern(pred, gt)

    breakdown = LossBreakdown(
        cgan=float(cgan),
        perceptual=per_val,
        alpha=alpha_val,
        border=terms["border"].mean,
        alpha_coeff=ac_val,
    )
    return LossReport(breakdown, terms, total_loss(breakdown, coeffs))
