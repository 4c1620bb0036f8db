"""Dataset synthesis, training-resolution preparation, discriminator
pyramids and border-patch tiling for the refinement stage.

Directory layout for synthesis::

    fg/<name>.png     alpha/<name>.png     bg/*.png
    out/composite/<stem>_<k>.png  out/alpha/<stem>_<k>.png  out/manifest.tsv
"""

import json
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from mattebench.compose import composite
from mattebench.errors import DimensionMismatch, InvalidRaster, SynthesisError
from mattebench.imagecore import (
    LOSSLESS_SUFFIXES,
    as_mask,
    as_raster,
    box_downsample,
    load_image,
    resize,
    save_image,
)
from mattebench.losses import LossCoefficients
from mattebench.morphology import BorderMap

TRAIN_WIDTH = 1280
TRAIN_HEIGHT = 768
PATCH_SIZE = 64

MANIFEST_MAGIC = "# mattebench-manifest v1"
MANIFEST_FIELDS = ("composite_path", "alpha_path", "fg_source", "bg_source", "seed_used")


@dataclass(frozen=True)
class TrainingConfig:
    """Optimisation settings of the original training run, kept as data."""

    generator_lr: float = 1e-4
    discriminator_lr: float = 1e-5
    batch_size: int = 1
    d_steps: int = 1
    g_steps: int = 5
    optimizer: str = "adam"
    loss_coefficients: LossCoefficients = field(default_factory=LossCoefficients)
    input_resolution: tuple = (TRAIN_WIDTH, TRAIN_HEIGHT)

    def to_dict(self):
        d = asdict(self)
        d["input_resolution"] = list(self.input_resolution)
        return d


@dataclass(frozen=True)
class SynthesisConfig:
    fg_dir: str
    alpha_dir: str
    bg_dir: str
    out_dir: str
    backgrounds_per_subject: int = 100
    seed: int = 0
    target_resolution: tuple = (TRAIN_WIDTH, TRAIN_HEIGHT)
    resize_to_target: bool = False
    bit_depth: int = 8

    def __post_init__(self):
        if self.backgrounds_per_subject < 1:
            raise ValueError("backgrounds_per_subject must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def echo(self):
        # out_dir is left out so identical inputs give identical manifests anywhere
        return {
            "fg_dir": str(self.fg_dir),
            "alpha_dir": str(self.alpha_dir),
            "bg_dir": str(self.bg_dir),
            "backgrounds_per_subject": self.backgrounds_per_subject,
            "seed": self.seed,
            "target_resolution": list(self.target_resolution),
            "resize_to_target": self.resize_to_target,
            "bit_depth": self.bit_depth,
        }


@dataclass(frozen=True)
class ManifestRecord:
    composite_path: str
    alpha_path: str
    fg_source: str
    bg_source: str
    seed_used: int


@dataclass
class Manifest:
    records: list
    header: dict = field(default_factory=dict)

    def dumps(self):
        lines = [MANIFEST_MAGIC]
        for key in sorted(self.header):
            lines.append(f"# {key} {json.dumps(self.header[key], sort_keys=True, separators=(',', ':'))}")
        lines.append("\t".join(MANIFEST_FIELDS))
        for r in self.records:
            lines.append("\t".join(str(getattr(r, f)) for f in MANIFEST_FIELDS))
        return "\n".join(lines) + "\n"

    def write(self, path):
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def parse(cls, text):
        lines = text.splitlines()
        if not lines or lines[0].strip() != MANIFEST_MAGIC:
            raise SynthesisError("not a synthesis manifest (missing version header)")
        header = {}
        i = 1
        while i < len(lines) and lines[i].startswith("# "):
            key, _, payload = lines[i][2:].partition(" ")
            header[key] = json.loads(payload)
            i += 1
        if i >= len(lines) or tuple(lines[i].split("\t")) != MANIFEST_FIELDS:
            raise SynthesisError("manifest column header missing or out of order")
        records = []
        for line in lines[i + 1 :]:
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != len(MANIFEST_FIELDS):
                raise SynthesisError(f"malformed manifest record: {line!r}")
            records.append(ManifestRecord(*parts[:4], int(parts[4])))
        return cls(records, header)

    @classmethod
    def read(cls, path):
        return cls.parse(Path(path).read_text(encoding="utf-8"))


def _raster_files(directory):
    d = Path(directory)
    if not d.is_dir():
        raise SynthesisError(f"directory not readable: {d}")
    return sorted(p.name for p in d.iterdir() if p.is_file() and p.suffix.lower() in LOSSLESS_SUFFIXES)


def subject_seed(seed, index):
    """Per-subject 64-bit seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def plan_pairings(subjects, backgrounds, backgrounds_per_subject, seed):
    """Assign distinct backgrounds to each subject by a seeded shuffle.

    Pure bookkeeping: returns ``(subject, background, output_stem, seed_used)``
    tuples in subject order, without touching the filesystem.
    """
    if len(backgrounds) < backgrounds_per_subject:
        raise SynthesisError(
            f"insufficient-backgrounds: need {backgrounds_per_subject}, found {len(backgrounds)}"
        )
    plan = []
    for idx, subject in enumerate(subjects):
        s = subject_seed(seed, idx)
        picks = np.random.default_rng(s).permutation(len(backgrounds))[:backgrounds_per_subject]
        stem = Path(subject).stem
        for k, b in enumerate(picks):
            plan.append((subject, backgrounds[b], f"{stem}_{k:03d}", s))
    return plan


def _synthesize_subject(config, subject, items, out):
    fg = load_image(Path(config.fg_dir) / subject, "rgb")
    alpha_src = Path(config.alpha_dir) / subject
    alpha = load_image(alpha_src, "gray")
    if fg.shape[:2] != alpha.shape:
        raise SynthesisError(f"{subject}: foreground and alpha sizes differ")
    if config.resize_to_target:
        tw, th = config.target_resolution
        fg = resize(fg, tw, th)
        alpha = resize(alpha, tw, th)
    h, w = alpha.shape
    records = []
    for _, bg_name, stem, s in items:
        bg = resize(load_image(Path(config.bg_dir) / bg_name, "rgb"), w, h)
        comp_rel = f"composite/{stem}.png"
        alpha_rel = f"alpha/{stem}.png"
        save_image(composite(fg, bg, alpha), out / comp_rel, config.bit_depth)
        if config.resize_to_target:
            save_image(alpha, out / alpha_rel, config.bit_depth)
        else:
            shutil.copyfile(alpha_src, out / alpha_rel)
        records.append(ManifestRecord(comp_rel, alpha_rel, subject, bg_name, s))
    return records


def synthesize_dataset(config: SynthesisConfig, jobs=1, training=TrainingConfig()):
    """Composite every subject over its sampled backgrounds and write the manifest."""
    subjects = _raster_files(config.fg_dir)
    alphas = set(_raster_files(config.alpha_dir))
    missing = [s for s in subjects if s not in alphas]
    if missing:
        raise SynthesisError(f"missing-alpha-for-foreground: {', '.join(missing)}")
    backgrounds = _raster_files(config.bg_dir)
    plan = plan_pairings(subjects, backgrounds, config.backgrounds_per_subject, config.seed)

    out = Path(config.out_dir)
    (out / "composite").mkdir(parents=True, exist_ok=True)
    (out / "alpha").mkdir(parents=True, exist_ok=True)

    k = config.backgrounds_per_subject
    groups = [(plan[i][0], plan[i : i + k]) for i in range(0, len(plan), k)]
    work = lambda g: _synthesize_subject(config, g[0], g[1], out)  # noqa: E731
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_subject = list(pool.map(work, groups))
    else:
        per_subject = [work(g) for g in groups]

    manifest = Manifest(
        [r for recs in per_subject for r in recs],
        {"synthesis": config.echo(), "training": training.to_dict()},
    )
    manifest.write(out / "manifest.tsv")
    return manifest


def prepare_training_input(img):
    """Resize to the fixed 1280x768 training resolution (aspect not kept)."""
    return resize(img, TRAIN_WIDTH, TRAIN_HEIGHT)


@dataclass(frozen=True)
class Pyramid:
    full: np.ndarray
    half: np.ndarray
    quarter: np.ndarray


def build_pyramid(img):
    """Full, 1/2 and 1/4 scale copies via box averaging."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or img.shape[0] < 4 or img.shape[1] < 4:
        raise InvalidRaster(f"pipeline.build_pyramid: input must be at least 4x4, got shape {img.shape}")
    return Pyramid(img.copy(), box_downsample(img, 2), box_downsample(img, 4))


@dataclass(frozen=True)
class Patch:
    x: int
    y: int
    raster: np.ndarray


@dataclass
class PatchSet:
    patch_size: int
    patches: list
    source_size: tuple  # (width, height)

    def __len__(self):
        return len(self.patches)


def _tile_starts(lo, hi, extent, size, stride):
    starts = []
    t = lo
    while t <= hi:
        s = min(t, extent - size)
        if not starts or starts[-1] != s:
            starts.append(s)
        t += stride
    return starts


def extract_border_patches(img, border, patch_size=PATCH_SIZE, stride=None):
    """Tile the bounding box of the border ring and keep tiles touching it.

    The grid starts at the box origin with step ``stride`` (defaults to
    ``patch_size``, i.e. non-overlapping); tiles that would cross the image
    edge are shifted inward.
    """
    img = as_raster(img)
    mask = as_mask(border.mask if isinstance(border, BorderMap) else border, "border")
    if img.shape[:2] != mask.shape:
        raise DimensionMismatch(f"pipeline.extract_border_patches: image {img.shape[:2]} vs border {mask.shape}")
    stride = patch_size if stride is None else stride
    if not 1 <= stride <= patch_size:
        raise ValueError(f"stride must lie in [1, patch_size], got {stride}")
    h, w = mask.shape
    if patch_size < 1 or patch_size > h or patch_size > w:
        raise DimensionMismatch(f"pipeline.extract_border_patches: patch {patch_size} larger than image {w}x{h}")

    patches = []
    ys, xs = np.nonzero(mask)
    if ys.size:
        for y in _tile_starts(ys.min(), ys.max(), h, patch_size, stride):
            for x in _tile_starts(xs.min(), xs.max(), w, patch_size, stride):
                if mask[y : y + patch_size, x : x + patch_size].any():
                    patches.append(Patch(int(x), int(y), img[y : y + patch_size, x : x + patch_size].copy()))
    return PatchSet(patch_size, patches, (w, h))


def stitch_patches(base, patches: PatchSet):
    """Paste patches back into a copy of ``base``; later patches win."""
    out = np.array(base, dtype=np.float64, copy=True)
    h, w = out.shape[:2]
    for p in patches.patches:
        ph, pw = p.raster.shape[:2]
        if p.x < 0 or p.y < 0 or p.x + pw > w or p.y + ph > h:
            raise DimensionMismatch(f"pipeline.stitch_patches: out-of-bounds patch at ({p.x}, {p.y})")
        out[p.y : p.y + ph, p.x : p.x + pw] = p.raster
    return out
