"""Delimited record output, aligned tables and matplotlib figures."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

FORMAT_VERSION = 1
METRIC_COLUMNS = ("mse", "mae", "sad", "grad", "conn")


def fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def records_text(kind, columns, rows, notes=()):
    """Tab-separated records under a versioned ``# mattebench-<kind>`` header."""
    lines = [f"# mattebench-{kind} v{FORMAT_VERSION}"]
    lines += [f"# {n}" for n in notes]
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(fmt(row.get(c, "")) for c in columns))
    return "\n".join(lines) + "\n"


def parse_records(text):
    """Inverse of ``records_text``: (kind, notes, list of dicts of strings)."""
    lines = [l for l in text.splitlines() if l]
    if not lines or not lines[0].startswith("# mattebench-"):
        raise ValueError("missing mattebench record header")
    kind = lines[0][len("# mattebench-") :].rsplit(" ", 1)[0]
    i, notes = 1, []
    while i < len(lines) and lines[i].startswith("# "):
        notes.append(lines[i][2:])
        i += 1
    cols = lines[i].split("\t")
    return kind, notes, [dict(zip(cols, l.split("\t"))) for l in lines[i + 1 :]]


def table_text(columns, rows):
    cells = [list(columns)] + [[fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    out = []
    for k, row in enumerate(cells):
        out.append("  ".join(c.rjust(w) if k and j else c.ljust(w) for j, (c, w) in enumerate(zip(row, widths))).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def plot_metrics(rows, path, aggregate=None):
    """One bar panel per metric across evaluated pairs."""
    names = [r["name"] for r in rows]
    fig, axes = plt.subplots(1, len(METRIC_COLUMNS), figsize=(3.2 * len(METRIC_COLUMNS), 3.4), squeeze=False)
    x = np.arange(len(rows))
    for ax, metric in zip(axes[0], METRIC_COLUMNS):
        label = {"mse": "MSE x1e3", "mae": "MAE x1e3"}.get(metric, f"{metric.upper()} /1e3 px")
        key = {"mse": "mse_scaled", "mae": "mae_scaled"}.get(metric, metric)
        vals = [float(r[key]) for r in rows]
        ax.bar(x, vals, color="0.45", width=0.7)
        if aggregate is not None:
            ax.axhline(float(aggregate[key]), color="C3", lw=1, ls="--")
        ax.set_title(label, fontsize=9)
        ax.set_xticks(x)
        ax.set_xticklabels(names, rotation=60, ha="right", fontsize=6)
        ax.tick_params(axis="y", labelsize=7)
        for side in ("top", "right"):
            ax.spines[side].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_border_patches(img, border_mask, patchset, path):
    """Image with the border ring tinted and patch tiles outlined."""
    fig, ax = plt.subplots(figsize=(6, 6 * img.shape[0] / max(img.shape[1], 1)))
    ax.imshow(img, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    overlay = np.zeros(border_mask.shape + (4,))
    overlay[border_mask] = (1.0, 0.2, 0.2, 0.45)
    ax.imshow(overlay, interpolation="nearest")
    for p in patchset.patches:
        ax.add_patch(Rectangle((p.x - 0.5, p.y - 0.5), patchset.patch_size, patchset.patch_size, fill=False, ec="C0", lw=0.8))
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
