"""Whole-image matting metrics: MSE, MAE, SAD, Grad, Conn.

SAD, Grad and Conn are reported per kilopixel (raw sums divided by 1000).
MSE and MAE additionally carry x1000 "scaled" copies for tables.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from mattebench.errors import DimensionMismatch, MatteError
from mattebench.imagecore import as_mask, as_plane, check_same_size, load_image

GRAD_SIGMA = 1.4
GRAD_EXPONENT = 2.0
CONN_STEP = 0.1
CONN_THETA = 0.15

_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    mae: float
    sad: float
    grad: float
    conn: float
    mse_scaled: float
    mae_scaled: float
    pixel_count: int

    @classmethod
    def names(cls):
        return [f.name for f in fields(cls)]

    def as_dict(self):
        return asdict(self)


def _pair(where, pred, gt):
    pred = as_plane(pred, "pred")
    gt = as_plane(gt, "gt")
    check_same_size(where, pred=pred, gt=gt)
    return pred, gt


def mse(pred, gt):
    pred, gt = _pair("metrics.mse", pred, gt)
    return float(np.mean((pred - gt) ** 2))


def mae(pred, gt):
    pred, gt = _pair("metrics.mae", pred, gt)
    return float(np.mean(np.abs(pred - gt)))


def sad(pred, gt):
    pred, gt = _pair("metrics.sad", pred, gt)
    return float(np.sum(np.abs(pred - gt))) / 1000.0


def gaussian_derivative_kernel(sigma):
    """x-derivative-of-Gaussian filter; transpose for y.

    Support is truncated where the Gaussian falls below 1% of its peak
    density and the kernel is scaled to unit L2 norm.
    """
    halfsize = int(math.ceil(sigma * math.sqrt(-2.0 * math.log(math.sqrt(2 * math.pi) * sigma * 1e-2))))
    u = np.arange(-halfsize, halfsize + 1, dtype=np.float64)
    g = np.exp(-(u**2) / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
    dg = -u * g / sigma**2
    hx = np.outer(g, dg)
    return hx / np.sqrt(np.sum(hx * hx))


def image_gradients(plane, sigma=GRAD_SIGMA):
    hx = gaussian_derivative_kernel(sigma)
    gx = ndimage.convolve(plane, hx, mode="nearest")
    gy = ndimage.convolve(plane, hx.T, mode="nearest")
    return gx, gy


def gradient_error(pred, gt, sigma=GRAD_SIGMA, q=GRAD_EXPONENT):
    """Sum over pixels of |grad(pred) - grad(gt)|^q, per kilopixel."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    pred, gt = _pair("metrics.gradient_error", pred, gt)
    size = gaussian_derivative_kernel(sigma).shape[0]
    if min(pred.shape) < size:
        raise DimensionMismatch(
            f"metrics.gradient_error: image {pred.shape[1]}x{pred.shape[0]} smaller than filter support {size}x{size}"
        )
    pgx, pgy = image_gradients(pred, sigma)
    ggx, ggy = image_gradients(gt, sigma)
    sq = (pgx - ggx) ** 2 + (pgy - ggy) ** 2
    return float(np.sum(sq ** (q / 2.0))) / 1000.0


def connected_components(mask):
    """4-connected labelling; ids 1..n follow row-major order of each
    component's first pixel, 0 is background."""
    mask = as_mask(mask)
    raw, n = ndimage.label(mask, structure=_FOUR)
    if n == 0:
        return raw.astype(np.int64)
    flat = raw.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    order = ids[keep][np.argsort(first[keep], kind="stable")]
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order] = np.arange(1, n + 1)
    return remap[raw]


def largest_component(mask):
    labels = connected_components(mask)
    if labels.max() == 0:
        return np.zeros(labels.shape, dtype=bool)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == int(np.argmax(counts))


def threshold_levels(step):
    n = int(math.floor(1.0 / step + 1e-9))
    return [k * step for k in range(n + 1)]


def connectivity_error(pred, gt, step=CONN_STEP, theta=CONN_THETA):
    """Connectivity error, per kilopixel.

    Each pixel's level is the last threshold at which it still belonged to
    the largest 4-connected region common to both thresholded mattes.
    """
    if not 0.0 < step < 1.0:
        raise ValueError(f"step must lie in (0, 1), got {step}")
    pred, gt = _pair("metrics.connectivity_error", pred, gt)
    levels = threshold_levels(step)
    l_map = np.full(pred.shape, -1.0)
    for i in range(1, len(levels)):
        omega = largest_component((pred >= levels[i]) & (gt >= levels[i]))
        dropped = (l_map == -1.0) & ~omega
        l_map[dropped] = levels[i - 1]
    l_map[l_map == -1.0] = 1.0

    def phi(a):
        d = a - l_map
        return 1.0 - d * (d >= theta)

    return float(np.sum(np.abs(phi(pred) - phi(gt)))) / 1000.0


def evaluate_pair(pred, gt, sigma=GRAD_SIGMA, q=GRAD_EXPONENT, step=CONN_STEP, theta=CONN_THETA):
    pred, gt = _pair("metrics.evaluate_pair", pred, gt)
    m = mse(pred, gt)
    a = mae(pred, gt)
    return MetricsReport(
        mse=m,
        mae=a,
        sad=sad(pred, gt),
        grad=gradient_error(pred, gt, sigma, q),
        conn=connectivity_error(pred, gt, step, theta),
        mse_scaled=1000.0 * m,
        mae_scaled=1000.0 * a,
        pixel_count=int(pred.size),
    )


@dataclass
class PairResult:
    name: str
    pred_path: str
    gt_path: str
    report: MetricsReport | None = None
    error: str = ""


@dataclass
class DatasetReport:
    rows: list
    aggregate: MetricsReport | None

    @property
    def failures(self):
        return [r for r in self.rows if r.report is None]


def mean_report(reports):
    if not reports:
        return None
    vals = {}
    for name in MetricsReport.names():
        col = [getattr(r, name) for r in reports]
        vals[name] = float(np.mean(col)) if name != "pixel_count" else int(round(np.mean(col)))
    return MetricsReport(**vals)


def evaluate_dataset(pairs, jobs=1, **metric_kwargs):
    """Evaluate ``(name, pred_path, gt_path)`` triples.

    Unreadable or mismatched pairs are recorded with an error string and
    skipped in the aggregate; rows keep manifest order.
    """

    def run(item):
        name, pred_path, gt_path = item
        row = PairResult(name, str(pred_path), str(gt_path))
        try:
            pred = load_image(pred_path, "gray")
            gt = load_image(gt_path, "gray")
            row.report = evaluate_pair(pred, gt, **metric_kwargs)
        except MatteError as exc:
            row.error = str(exc)
        return row

    pairs = list(pairs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, pairs))
    else:
        rows = [run(p) for p in pairs]
    return DatasetReport(rows, mean_report([r.report for r in rows if r.report is not None]))
