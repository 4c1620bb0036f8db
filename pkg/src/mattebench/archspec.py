"""Static shape propagation for the dual-encoder matting generator,
its refinement subnet and the multi-scale discriminators.

Nothing here executes a network: layers are declared by kind, stride and
output width, and ``propagate_shapes`` checks that every tensor lines up.
Shapes are (H, W, C). Strided layers use ceil division.

Spec files hold one layer per line::

    # name: generator
    # input: 768 1280 3
    c_in   input        out=3
    c1     conv         stride=2 out=64 in=c_in
    fuse   concat_depth in=c4,s4
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

from mattebench.errors import SpecError

KINDS = ("input", "conv", "conv1x1", "residual_block", "upsample", "downsample", "concat_depth")

ENCODER_WIDTHS = (64, 128, 256, 512)
SEG_ENCODER_WIDTHS = (32, 64, 128, 256)
N_RESIDUAL = 6


@dataclass(frozen=True)
class LayerSpec:
    id: str
    kind: str
    in_refs: tuple = ()
    spatial_stride: int = 1
    out_channels: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"layer {self.id}: unknown kind {self.kind!r}")
        if self.spatial_stride < 1:
            raise SpecError(f"layer {self.id}: stride must be >= 1")


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple
    declared_input: tuple  # (H, W, C)

    def layer(self, layer_id):
        for lay in self.layers:
            if lay.id == layer_id:
                return lay
        raise KeyError(layer_id)

    def with_layer(self, layer_id, **changes):
        return replace(self, layers=tuple(replace(l, **changes) if l.id == layer_id else l for l in self.layers))


@dataclass
class ShapeFlow:
    network: str
    shapes: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def valid(self):
        return not self.diagnostics

    def format_table(self, net):
        rows = [("layer", "kind", "inputs", "H", "W", "C", "note")]
        for lay in net.layers:
            s = self.shapes.get(lay.id)
            note = self.diagnostics.get(lay.id, "")
            h, w, c = (str(v) for v in s) if s else ("-", "-", "-")
            rows.append((lay.id, lay.kind, ",".join(lay.in_refs) or "-", h, w, c, note))
        widths = [max(len(r[i]) for r in rows) for i in range(6)]
        lines = ["  ".join(r[i].ljust(widths[i]) for i in range(6)) + ("  " + r[6] if r[6] else "") for r in rows]
        lines.append(f"verdict: {'valid' if self.valid else 'INVALID'} ({net.name})")
        return "\n".join(line.rstrip() for line in lines)


def _ceil_div(a, b):
    return -(-a // b)


def _layer_shape(lay, ins, input_shape):
    """Output shape of one layer, or raise SpecError describing the mismatch."""
    h0, w0, c0 = input_shape
    if lay.kind == "input":
        if ins:
            raise SpecError("input layer takes no inputs")
        return (h0, w0, lay.out_channels or c0)

    if lay.kind == "concat_depth":
        if len(ins) < 2:
            raise SpecError("concat_depth needs at least two inputs")
        spatial = {s[:2] for s in ins}
        if len(spatial) != 1:
            desc = ", ".join(f"{r}={s[0]}x{s[1]}" for r, s in zip(lay.in_refs, ins))
            raise SpecError(f"shape-mismatch: concat_depth inputs differ spatially ({desc})")
        h, w = ins[0][:2]
        return (h, w, sum(s[2] for s in ins))

    if len(ins) != 1:
        raise SpecError(f"{lay.kind} takes exactly one input, got {len(ins)}")
    h, w, c = ins[0]

    if lay.kind == "conv":
        if lay.out_channels is None:
            raise SpecError("conv needs out_channels")
        return (_ceil_div(h, lay.spatial_stride), _ceil_div(w, lay.spatial_stride), lay.out_channels)
    if lay.kind == "conv1x1":
        if lay.spatial_stride != 1:
            raise SpecError("conv1x1 must keep spatial dims (stride 1)")
        if lay.out_channels is None:
            raise SpecError("conv1x1 needs out_channels")
        return (h, w, lay.out_channels)
    if lay.kind == "residual_block":
        if lay.spatial_stride != 1:
            raise SpecError("shape-mismatch: residual_block must keep spatial dims")
        if lay.out_channels is not None and lay.out_channels != c:
            raise SpecError(f"shape-mismatch: residual_block expects out_channels == in_channels ({c}), got {lay.out_channels}")
        return (h, w, c)
    if lay.kind in ("upsample", "downsample"):
        if lay.out_channels is not None and lay.out_channels != c:
            raise SpecError(f"{lay.kind} keeps channels ({c}), got out_channels {lay.out_channels}")
        if lay.kind == "upsample":
            return (h * lay.spatial_stride, w * lay.spatial_stride, c)
        return (_ceil_div(h, lay.spatial_stride), _ceil_div(w, lay.spatial_stride), c)
    raise SpecError(f"unhandled kind {lay.kind}")


def propagate_shapes(net: NetworkSpec, input_shape=None):
    """Resolve every layer's (H, W, C) or attach a diagnostic to it."""
    input_shape = tuple(input_shape or net.declared_input)
    flow = ShapeFlow(net.name)
    by_id = {}
    for lay in net.layers:
        if lay.id in by_id:
            flow.diagnostics[lay.id] = "duplicate layer id"
        by_id[lay.id] = lay

    state = {}  # id -> "visiting" | "done"

    def visit(lid):
        if state.get(lid) == "done":
            return
        if state.get(lid) == "visiting":
            flow.diagnostics.setdefault(lid, "cyclic-graph: layer reachable from itself")
            return
        state[lid] = "visiting"
        lay = by_id[lid]
        ins = []
        for ref in lay.in_refs:
            if ref not in by_id:
                flow.diagnostics.setdefault(lid, f"unresolved-reference: {ref}")
                continue
            visit(ref)
            if ref in flow.shapes:
                ins.append(flow.shapes[ref])
            elif lid not in flow.diagnostics:
                flow.diagnostics[lid] = f"upstream layer {ref} has no shape"
        if lid not in flow.diagnostics:
            try:
                flow.shapes[lid] = _layer_shape(lay, ins, input_shape)
            except SpecError as exc:
                flow.diagnostics[lid] = str(exc)
        state[lid] = "done"

    for lay in net.layers:
        visit(lay.id)
    return flow


def _conv(lid, src, out, stride=1):
    return LayerSpec(lid, "conv", (src,), stride, out)


def _encoder(prefix, src, widths):
    layers, prev = [], src
    for i, width in enumerate(widths, 1):
        layers.append(_conv(f"{prefix}{i}", prev, width, 2))
        prev = f"{prefix}{i}"
    return layers


def builtin_generator_spec(height=768, width=1280):
    """Dual-encoder U-Net generator.

    The content encoder sees the RGB image; the narrower segmentation
    encoder sees the binary map stacked with the masked foreground (4
    channels). Bottleneck outputs are depth-concatenated, run through six
    residual blocks and decoded with skips from both encoders, each skip
    first squeezed by a 1x1 convolution.
    """
    L = [
        LayerSpec("image", "input", out_channels=3),
        LayerSpec("seg_map", "input", out_channels=1),
        LayerSpec("fg_subject", "input", out_channels=3),
        LayerSpec("seg_in", "concat_depth", ("seg_map", "fg_subject")),
    ]
    L += _encoder("c", "image", ENCODER_WIDTHS)
    L += _encoder("s", "seg_in", SEG_ENCODER_WIDTHS)
    n = len(ENCODER_WIDTHS)
    L.append(LayerSpec("fuse", "concat_depth", (f"c{n}", f"s{n}")))
    prev = "fuse"
    for i in range(1, N_RESIDUAL + 1):
        L.append(LayerSpec(f"res{i}", "residual_block", (prev,)))
        prev = f"res{i}"
    for lvl in range(n - 1, 0, -1):
        L.append(LayerSpec(f"up{lvl}", "upsample", (prev,), 2))
        L.append(_conv(f"dec{lvl}", f"up{lvl}", ENCODER_WIDTHS[lvl - 1]))
        L.append(LayerSpec(f"skip_c{lvl}", "conv1x1", (f"c{lvl}",), 1, ENCODER_WIDTHS[lvl - 1] // 2))
        L.append(LayerSpec(f"skip_s{lvl}", "conv1x1", (f"s{lvl}",), 1, SEG_ENCODER_WIDTHS[lvl - 1] // 2))
        L.append(LayerSpec(f"cat{lvl}", "concat_depth", (f"dec{lvl}", f"skip_c{lvl}", f"skip_s{lvl}")))
        prev = f"cat{lvl}"
    L.append(LayerSpec("up0", "upsample", (prev,), 2))
    L.append(_conv("dec0", "up0", 32))
    L.append(_conv("alpha", "dec0", 1))
    return NetworkSpec("generator", tuple(L), (height, width, 3))


def builtin_refinement_spec(patch=64):
    """Small encoder-decoder applied to border patches of the coarse matte."""
    L = (
        LayerSpec("patch", "input", out_channels=1),
        _conv("r1", "patch", 32, 2),
        _conv("r2", "r1", 64, 2),
        LayerSpec("rres1", "residual_block", ("r2",)),
        LayerSpec("rres2", "residual_block", ("rres1",)),
        LayerSpec("rup1", "upsample", ("rres2",), 2),
        _conv("rdec1", "rup1", 32),
        LayerSpec("rcat1", "concat_depth", ("rdec1", "r1")),
        LayerSpec("rup0", "upsample", ("rcat1",), 2),
        _conv("rdec0", "rup0", 16),
        _conv("refined", "rdec0", 1),
    )
    return NetworkSpec("refinement", L, (patch, patch, 1))


def _discriminator(name, height, width):
    L = (
        LayerSpec("rgba", "input", out_channels=4),
        _conv("d1", "rgba", 64, 2),
        _conv("d2", "d1", 128, 2),
        _conv("d3", "d2", 256, 2),
        _conv("d4", "d3", 512, 1),
        _conv("score", "d4", 1, 1),
    )
    return NetworkSpec(name, L, (height, width, 4))


def builtin_discriminator_pyramid_spec(height=768, width=1280):
    """Three identical discriminators fed the full, 1/2 and 1/4 scale RGB+alpha."""
    return tuple(
        _discriminator(f"discriminator_x{f}", _ceil_div(height, f), _ceil_div(width, f)) for f in (1, 2, 4)
    )


def dumps_spec(net: NetworkSpec):
    h, w, c = net.declared_input
    lines = [f"# name: {net.name}", f"# input: {h} {w} {c}"]
    for lay in net.layers:
        tok = [lay.id, lay.kind]
        if lay.spatial_stride != 1:
            tok.append(f"stride={lay.spatial_stride}")
        if lay.out_channels is not None:
            tok.append(f"out={lay.out_channels}")
        if lay.in_refs:
            tok.append("in=" + ",".join(lay.in_refs))
        lines.append(" ".join(tok))
    return "\n".join(lines) + "\n"


def parse_spec(text, default_name="network"):
    name, declared, layers = default_name, None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            key = key.strip()
            if key == "name":
                name = val.strip()
            elif key == "input":
                try:
                    declared = tuple(int(v) for v in val.split())
                except ValueError:
                    raise SpecError(f"line {lineno}: bad input declaration {val.strip()!r}") from None
                if len(declared) != 3:
                    raise SpecError(f"line {lineno}: input declaration needs H W C")
            continue
        tok = line.split()
        if len(tok) < 2:
            raise SpecError(f"line {lineno}: expected '<id> <kind> [key=value ...]'")
        kw = {}
        for t in tok[2:]:
            key, sep, val = t.partition("=")
            if not sep:
                raise SpecError(f"line {lineno}: expected key=value, got {t!r}")
            try:
                if key == "stride":
                    kw["spatial_stride"] = int(val)
                elif key == "out":
                    kw["out_channels"] = int(val)
                elif key == "in":
                    kw["in_refs"] = tuple(v for v in val.split(",") if v)
                else:
                    raise SpecError(f"line {lineno}: unknown key {key!r}")
            except ValueError:
                raise SpecError(f"line {lineno}: bad value {t!r}") from None
        layers.append(LayerSpec(tok[0], tok[1], **kw))
    if declared is None:
        raise SpecError("spec file lacks a '# input: H W C' line")
    n_inputs = sum(1 for l in layers if l.kind == "input")
    if n_inputs == 0:
        raise SpecError("spec declares no input layer")
    return NetworkSpec(name, tuple(layers), declared)


def load_spec(path):
    path = Path(path)
    return parse_spec(path.read_text(encoding="utf-8"), default_name=path.stem)
