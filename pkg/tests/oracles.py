"""Slow, loop-based reference implementations used only by the tests."""

import math

import numpy as np


def flood_fill_labels(mask):
    """Recursive 4-connected flood fill, labels in row-major first-pixel order."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int64)

    def fill(y, x, lab):
        if not (0 <= y < h and 0 <= x < w) or not mask[y, x] or labels[y, x]:
            return
        labels[y, x] = lab
        fill(y + 1, x, lab)
        fill(y - 1, x, lab)
        fill(y, x + 1, lab)
        fill(y, x - 1, lab)

    nxt = 1
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not labels[y, x]:
                fill(y, x, nxt)
                nxt += 1
    return labels


def largest_region(mask):
    labels = flood_fill_labels(mask)
    best, best_n = 0, 0
    for lab in range(1, labels.max() + 1):
        n = int((labels == lab).sum())
        if n > best_n:
            best, best_n = lab, n
    return labels == best if best else np.zeros(mask.shape, bool)


def conn_oracle(pred, gt, step=0.1, theta=0.15):
    n = int(math.floor(1 / step + 1e-9))
    levels = [k * step for k in range(n + 1)]
    omegas = [None] + [largest_region((pred >= l) & (gt >= l)) for l in levels[1:]]
    h, w = pred.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            lvl = 1.0
            for i in range(1, len(levels)):
                if not omegas[i][y, x]:
                    lvl = levels[i - 1]
                    break
            phis = []
            for a in (pred[y, x], gt[y, x]):
                d = a - lvl
                phis.append(1 - d if d >= theta else 1.0)
            total += abs(phis[0] - phis[1])
    return total / 1000


def dgauss_kernel(sigma):
    half = math.ceil(sigma * math.sqrt(-2 * math.log(math.sqrt(2 * math.pi) * sigma * 0.01)))
    size = 2 * half + 1
    g = lambda t: math.exp(-t * t / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))  # noqa: E731
    k = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            k[i, j] = g(i - half) * (-(j - half) * g(j - half) / sigma**2)
    return k / math.sqrt((k**2).sum())


def dense_convolve(img, k):
    """True convolution, replicate-padded, by explicit summation."""
    h, w = img.shape
    c = k.shape[0] // 2
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for u in range(k.shape[0]):
                for v in range(k.shape[1]):
                    yy = min(max(y - (u - c), 0), h - 1)
                    xx = min(max(x - (v - c), 0), w - 1)
                    acc += k[u, v] * img[yy, xx]
            out[y, x] = acc
    return out


def grad_oracle(pred, gt, sigma=1.4, q=2.0):
    k = dgauss_kernel(sigma)
    px, py = dense_convolve(pred, k), dense_convolve(pred, k.T)
    gx, gy = dense_convolve(gt, k), dense_convolve(gt, k.T)
    total = 0.0
    for y in range(pred.shape[0]):
        for x in range(pred.shape[1]):
            total += math.sqrt((px[y, x] - gx[y, x]) ** 2 + (py[y, x] - gy[y, x]) ** 2) ** q
    return total / 1000


def conn_case_8x8():
    """Matte pair where the prediction carries a detached 2x2 island."""
    gt = np.zeros((8, 8))
    gt[2:6, 1:5] = 1.0
    gt[2:6, 5] = 0.6
    gt[1, 2:4] = 0.35
    pred = gt.copy()
    pred[6:8, 6:8] = 0.8
    pred[3, 5] = 0.9
    return pred, gt


def step_case_16x16():
    pred = np.zeros((16, 16))
    pred[:, 8:] = 1.0
    return pred, np.full((16, 16), 0.25)


def naive_morph(mask, se, want_all, outside=False):
    """Per-pixel footprint check with explicit bounds handling."""
    h, w = mask.shape
    out = np.zeros(mask.shape, dtype=bool)
    for y in range(h):
        for x in range(w):
            vals = []
            for dy, dx in se.offsets:
                yy, xx = y + dy, x + dx
                vals.append(bool(mask[yy, xx]) if 0 <= yy < h and 0 <= xx < w else outside)
            out[y, x] = all(vals) if want_all else any(vals)
    return out
