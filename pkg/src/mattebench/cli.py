"""``mattebench`` command line.

Exit status: 0 success, 1 failure or partial failure, 2 usage error.
Data goes to stdout (or files), diagnostics to stderr.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from mattebench import archspec, compose, losses, metrics, morphology, pipeline, report
from mattebench.errors import MatteError
from mattebench.imagecore import load_image, save_image, size_of

PROG = "mattebench"


# ---------------------------------------------------------------- flag types


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {s}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
    return v


def _open_fraction(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {s}")
    return v


def _eps(s):
    v = float(s)
    if not 0 <= v < 0.5:
        raise argparse.ArgumentTypeError(f"must lie in [0, 0.5), got {s}")
    return v


def _seed(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _radii(s):
    try:
        vals = [int(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("radii must be integers >= 1")
    return vals


def _resolution(s):
    try:
        w, h = (int(t) for t in s.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {s!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("resolution must be positive")
    return (w, h)


def _hwc(s):
    try:
        dims = tuple(int(t) for t in s.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxWxC, got {s!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"expected HxWxC with positive entries, got {s!r}")
    return dims


def _default_jobs():
    env = os.environ.get("MATTEBENCH_JOBS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


# ---------------------------------------------------------------- helpers


def _emit(args, kind, columns, rows, notes=()):
    if args.format == "table":
        sys.stdout.write(report.table_text(columns, rows))
    else:
        sys.stdout.write(report.records_text(kind, columns, rows, notes))


def _se(args):
    return morphology.StructuringElement(args.shape, args.radius)


def _load_mask(path, threshold=0.5):
    return load_image(path, "gray") >= threshold


def _add_se_flags(p, radius=5):
    p.add_argument("--shape", choices=("square", "disk"), default="square", help="structuring element shape")
    p.add_argument("--radius", type=_positive_int, default=radius, help="structuring element radius in pixels")


# ---------------------------------------------------------------- commands


def cmd_compose(args):
    fg = load_image(args.fg, "rgb")
    bg = load_image(args.bg, "rgb")
    alpha = load_image(args.alpha, "gray")
    save_image(compose.composite(fg, bg, alpha), args.out, args.bit_depth)
    w, h = size_of(alpha)
    _emit(args, "compose", ("out", "width", "height"), [{"out": args.out, "width": w, "height": h}])
    return 0


def cmd_foreground(args):
    img = load_image(args.image, "rgb")
    if args.alpha:
        out = compose.extract_foreground(img, load_image(args.alpha, "gray"))
    else:
        out = compose.apply_segmentation(img, _load_mask(args.seg, args.threshold))
    save_image(out, args.out, args.bit_depth)
    w, h = size_of(img)
    _emit(args, "foreground", ("out", "width", "height"), [{"out": args.out, "width": w, "height": h}])
    return 0


def cmd_bordermap(args):
    seg = _load_mask(args.seg, args.threshold)
    bm = morphology.border_map(seg, _se(args))
    if args.out:
        save_image(bm.mask.astype(np.float64), args.out, 8)
    row = {"border_pixels": int(bm.mask.sum()), "radius": args.radius, "shape": args.shape, "out": args.out or "-"}
    _emit(args, "bordermap", ("border_pixels", "radius", "shape", "out"), [row])
    return 0


def cmd_trimap(args):
    alpha = load_image(args.alpha, "gray")
    radii = args.radii or [args.radius]
    out = Path(args.out)
    rows = []
    for r in radii:
        tri = morphology.make_trimap(alpha, args.fg_threshold, morphology.StructuringElement(args.shape, r))
        target = out if len(radii) == 1 else out.with_name(f"{out.stem}_r{r:02d}{out.suffix}")
        save_image(tri / 255.0, target, 8)
        counts = morphology.trimap_counts(tri)
        rows.append({"radius": r, **counts, "out": str(target)})
    _emit(args, "trimap", ("radius", "background", "unknown", "foreground", "out"), rows)
    return 0


def cmd_losses(args):
    pred = load_image(args.pred, "gray")
    gt = load_image(args.gt, "gray")
    img = load_image(args.image, "rgb") if args.image else None
    seg = _load_mask(args.seg) if args.seg else None
    coeffs = losses.LossCoefficients(args.lambda_per, args.beta_alpha, args.gamma_border, args.theta_ac)
    rep = losses.compute_losses(
        pred,
        gt,
        img=img,
        seg=seg,
        se=_se(args),
        eps=args.eps,
        cgan=args.cgan,
        coeffs=coeffs,
        extractor=None if args.no_perceptual else losses.stub_feature_extractor,
    )
    b = rep.breakdown
    rows = []
    for name in ("alpha", "alpha_coeff", "border"):
        t = rep.terms[name]
        rows.append({"term": name, "sum": t.sum, "count": t.count, "mean": t.mean, "value": getattr(b, name)})
    rows.append({"term": "perceptual", "sum": "-", "count": "-", "mean": "-", "value": b.perceptual})
    rows.append({"term": "cgan", "sum": "-", "count": "-", "mean": "-", "value": b.cgan})
    rows.append({"term": "total", "sum": "-", "count": "-", "mean": "-", "value": rep.total})
    notes = [
        f"coefficients lambda_per={coeffs.lambda_per:g} beta_alpha={coeffs.beta_alpha:g} "
        f"gamma_border={coeffs.gamma_border:g} theta_ac={coeffs.theta_ac:g}",
        "value = term entering the weighted total (mean form; dual matte+foreground when --image given)",
    ]
    _emit(args, "losses", ("term", "sum", "count", "mean", "value"), rows, notes)
    return 0


def read_eval_pairs(manifest_path, pred_dir=None):
    """(name, pred_path, gt_path) triples from a pair list or a synth manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MatteError(f"eval: manifest not found: {manifest_path}")
    base = manifest_path.parent
    text = manifest_path.read_text(encoding="utf-8")
    if text.startswith(pipeline.MANIFEST_MAGIC):
        if pred_dir is None:
            raise MatteError("eval: a synthesis manifest needs --pred-dir with predictions named like the alpha files")
        man = pipeline.Manifest.parse(text)
        return [
            (Path(r.alpha_path).name, Path(pred_dir) / Path(r.alpha_path).name, base / r.alpha_path)
            for r in man.records
        ]
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MatteError(f"eval: {manifest_path}:{lineno}: expected 'pred<TAB>gt'")
        pred, gt = (base / p.strip() if not Path(p.strip()).is_absolute() else Path(p.strip()) for p in parts)
        pairs.append((pred.name, pred, gt))
    return pairs


EVAL_COLUMNS = ("name",) + tuple(metrics.MetricsReport.names()) + ("status",)


def cmd_eval(args):
    pairs = read_eval_pairs(args.manifest, args.pred_dir)
    ds = metrics.evaluate_dataset(pairs, jobs=args.jobs, sigma=args.sigma, q=args.q, step=args.step, theta=args.theta)
    rows = []
    for r in ds.rows:
        if r.report is None:
            print(f"{PROG} eval: {r.name}: {r.error}", file=sys.stderr)
            rows.append({"name": r.name, "status": "error"})
        else:
            rows.append({"name": r.name, **r.report.as_dict(), "status": "ok"})
    agg = None
    if ds.aggregate is not None:
        agg = {"name": "__mean__", **ds.aggregate.as_dict(), "status": f"n={len(ds.rows) - len(ds.failures)}"}
    all_rows = rows + ([agg] if agg else [])
    notes = [
        "metrics over the whole image; sad, grad, conn per 1000 pixels; *_scaled = value x 1000",
        f"grad sigma={args.sigma:g} q={args.q:g}; conn step={args.step:g} theta={args.theta:g}",
    ]
    _emit(args, "eval", EVAL_COLUMNS, all_rows, notes)
    if args.out:
        Path(args.out).write_text(report.records_text("eval", EVAL_COLUMNS, all_rows, notes), encoding="utf-8")
    if args.figures and agg:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
        ok_rows = [r for r in rows if r["status"] == "ok"]
        path = report.plot_metrics(ok_rows, Path(args.figures) / "metrics.png", agg)
        print(f"{PROG} eval: wrote {path}", file=sys.stderr)
    return 1 if ds.failures else 0


def cmd_synth(args):
    cfg = pipeline.SynthesisConfig(
        fg_dir=args.fg_dir,
        alpha_dir=args.alpha_dir,
        bg_dir=args.bg_dir,
        out_dir=args.out_dir,
        backgrounds_per_subject=args.backgrounds_per_subject,
        seed=args.seed,
        target_resolution=args.resolution,
        resize_to_target=args.resize,
        bit_depth=args.bit_depth,
    )
    man = pipeline.synthesize_dataset(cfg, jobs=args.jobs)
    rows = [{f: getattr(r, f) for f in pipeline.MANIFEST_FIELDS} for r in man.records]
    _emit(args, "synth", pipeline.MANIFEST_FIELDS, rows, [f"manifest {Path(args.out_dir) / 'manifest.tsv'}"])
    return 0


def cmd_pyramid(args):
    img = load_image(args.input, args.kind)
    pyr = pipeline.build_pyramid(img)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for scale, arr in (("full", pyr.full), ("half", pyr.half), ("quarter", pyr.quarter)):
        target = out / f"{scale}.png"
        save_image(arr, target, args.bit_depth)
        w, h = size_of(arr)
        rows.append({"scale": scale, "width": w, "height": h, "out": str(target)})
    _emit(args, "pyramid", ("scale", "width", "height", "out"), rows)
    return 0


def cmd_patches(args):
    img = load_image(args.image, args.kind)
    bm = morphology.border_map(_load_mask(args.seg, args.threshold), _se(args))
    ps = pipeline.extract_border_patches(img, bm, args.patch_size, args.stride)
    rows = []
    out = Path(args.out_dir) if args.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(ps.patches):
        row = {"index": i, "x": p.x, "y": p.y, "size": ps.patch_size, "out": "-"}
        if out:
            target = out / f"patch_{i:04d}_x{p.x}_y{p.y}.png"
            save_image(p.raster, target, args.bit_depth)
            row["out"] = str(target)
        rows.append(row)
    if args.figure:
        report.plot_border_patches(img, bm.mask, ps, args.figure)
    _emit(args, "patches", ("index", "x", "y", "size", "out"), rows, [f"border_pixels {int(bm.mask.sum())}"])
    return 0


def cmd_archcheck(args):
    if args.spec:
        nets = [archspec.load_spec(args.spec)]
    else:
        which = args.builtin
        nets = []
        if which in ("generator", "all"):
            nets.append(archspec.builtin_generator_spec())
        if which in ("refinement", "all"):
            nets.append(archspec.builtin_refinement_spec())
        if which in ("discriminators", "all"):
            nets.extend(archspec.builtin_discriminator_pyramid_spec())
    ok = True
    for net in nets:
        if args.dump:
            sys.stdout.write(archspec.dumps_spec(net))
            continue
        flow = archspec.propagate_shapes(net, args.input)
        ok &= flow.valid
        if args.format == "table":
            sys.stdout.write(flow.format_table(net) + "\n\n")
        else:
            rows = []
            for lay in net.layers:
                s = flow.shapes.get(lay.id)
                rows.append(
                    {
                        "network": net.name,
                        "layer": lay.id,
                        "kind": lay.kind,
                        "H": s[0] if s else "-",
                        "W": s[1] if s else "-",
                        "C": s[2] if s else "-",
                        "diagnostic": flow.diagnostics.get(lay.id, ""),
                    }
                )
            verdict = "valid" if flow.valid else "invalid"
            sys.stdout.write(
                report.records_text(
                    "archcheck", ("network", "layer", "kind", "H", "W", "C", "diagnostic"), rows, [f"verdict {verdict}"]
                )
            )
        for lid, msg in flow.diagnostics.items():
            print(f"{PROG} archcheck: {net.name}.{lid}: {msg}", file=sys.stderr)
    return 0 if ok else 1


# ---------------------------------------------------------------- parser


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog=PROG, description="Portrait-matting maths toolkit.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("records", "table"), default="records", help="stdout format")
        p.add_argument("--jobs", type=_positive_int, default=_default_jobs(), help="worker count (env MATTEBENCH_JOBS)")
        return p

    p = add("compose", cmd_compose, "composite a foreground over a background with an alpha matte")
    p.add_argument("--fg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--alpha", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = add("foreground", cmd_foreground, "multiply an image by its alpha matte or binary segmentation")
    p.add_argument("--image", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha")
    g.add_argument("--seg")
    p.add_argument("--threshold", type=_open_fraction, default=0.5, help="binarisation level for --seg")
    p.add_argument("--out", required=True)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = add("bordermap", cmd_bordermap, "dilated minus eroded segmentation ring")
    p.add_argument("--seg", required=True)
    p.add_argument("--threshold", type=_open_fraction, default=0.5, help="binarisation level for --seg")
    p.add_argument("--out")
    _add_se_flags(p)

    p = add("trimap", cmd_trimap, "trimap (0/128/255) from an alpha matte by erosion and dilation")
    p.add_argument("--alpha", required=True)
    p.add_argument("--out", required=True, help="output file; with --radii a _rNN suffix is added per radius")
    p.add_argument("--fg-threshold", type=_open_fraction, default=0.5, help="binarisation level before erosion/dilation")
    p.add_argument("--radii", type=_radii, default=None, help="comma-separated sweep of radii, e.g. 5,10,20")
    _add_se_flags(p)

    p = add("losses", cmd_losses, "evaluate the training-loss terms and their weighted total")
    p.add_argument("--pred", required=True, help="predicted alpha matte")
    p.add_argument("--gt", required=True, help="ground-truth alpha matte")
    p.add_argument("--image", help="input RGB image; enables the matte+foreground dual form")
    p.add_argument("--seg", help="segmentation for the border ring; gt >= 0.5 when omitted")
    p.add_argument("--eps", type=_eps, default=losses.DEFAULT_EPS, help="tolerance for 0/1 membership")
    p.add_argument("--cgan", type=float, default=0.0, help="externally computed adversarial term")
    p.add_argument("--lambda-per", type=_nonneg_float, default=10.0, help="perceptual weight")
    p.add_argument("--beta-alpha", type=_nonneg_float, default=25.0, help="alpha-loss weight")
    p.add_argument("--gamma-border", type=_nonneg_float, default=50.0, help="border-loss weight")
    p.add_argument("--theta-ac", type=_nonneg_float, default=25.0, help="alpha-coefficient weight")
    p.add_argument("--no-perceptual", action="store_true", help="skip the perceptual term")
    _add_se_flags(p)

    p = add("eval", cmd_eval, "MSE, MAE, SAD, Grad and Conn over a manifest of prediction/ground-truth pairs")
    p.add_argument("--manifest", required=True, help="'pred<TAB>gt' lines or a synth manifest")
    p.add_argument("--pred-dir", help="predictions named like the alpha files (synth manifests)")
    p.add_argument("--sigma", type=_positive_float, default=metrics.GRAD_SIGMA, help="Gaussian-derivative scale for Grad")
    p.add_argument("--q", type=_positive_float, default=metrics.GRAD_EXPONENT, help="Grad exponent")
    p.add_argument("--step", type=_open_fraction, default=metrics.CONN_STEP, help="Conn threshold increment")
    p.add_argument("--theta", type=_nonneg_float, default=metrics.CONN_THETA, help="Conn distance threshold")
    p.add_argument("--out", help="also write the records to this file")
    p.add_argument("--figures", help="directory for metric figures")

    p = add("synth", cmd_synth, "composite every foreground over sampled backgrounds and write a manifest")
    p.add_argument("--fg-dir", required=True)
    p.add_argument("--alpha-dir", required=True)
    p.add_argument("--bg-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--backgrounds-per-subject", type=_positive_int, default=100, help="distinct backgrounds per foreground")
    p.add_argument("--seed", type=_seed, default=0, help="run seed for background sampling")
    p.add_argument("--resolution", type=_resolution, default=f"{pipeline.TRAIN_WIDTH}x{pipeline.TRAIN_HEIGHT}", help="WIDTHxHEIGHT")
    p.add_argument("--resize", action="store_true", help="resize subjects to --resolution before compositing")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = add("pyramid", cmd_pyramid, "full, 1/2 and 1/4 scale box-filtered copies")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("rgb", "gray"), default="rgb")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = add("patches", cmd_patches, "tile the subject border into refinement patches")
    p.add_argument("--image", required=True, help="raster to cut patches from (e.g. a predicted matte)")
    p.add_argument("--seg", required=True, help="segmentation defining the border ring")
    p.add_argument("--threshold", type=_open_fraction, default=0.5)
    p.add_argument("--kind", choices=("rgb", "gray"), default="gray")
    p.add_argument("--patch-size", type=_positive_int, default=pipeline.PATCH_SIZE, help="patch edge in pixels")
    p.add_argument("--stride", type=_positive_int, default=None, help="tile step (default: patch size)")
    p.add_argument("--out-dir")
    p.add_argument("--figure", help="write an overlay figure of ring and tiles")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    _add_se_flags(p)

    p = add("archcheck", cmd_archcheck, "propagate tensor shapes through a network description")
    p.add_argument("--spec", help="layer-per-line spec file")
    p.add_argument("--builtin", choices=("generator", "refinement", "discriminators", "all"), default="all")
    p.add_argument("--input", type=_hwc, default=None, help="override input HxWxC, e.g. 768x1280x3")
    p.add_argument("--dump", action="store_true", help="print the spec file text instead of checking")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "stride", None) is not None and args.stride > args.patch_size:
        print(f"{PROG} patches: error: --stride must not exceed --patch-size", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (MatteError, ValueError, OSError) as exc:
        print(f"{PROG} {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
