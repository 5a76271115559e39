"""Architecture descriptor and parameter layout."""
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields

ENCODERS = ("lstm", "ln_lstm", "bilstm", "late_fusion", "mean_pool")
POOLINGS = ("last", "attention3")
HEADS = ("lr", "moe")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Encoder + classifier description.

    ``units`` lists the width of each recurrent layer (per direction for
    ``bilstm``; for ``late_fusion`` the first entry is the width of each
    modality branch).  ``mean_pool`` is the frame-averaging baseline and
    ignores ``units`` and ``pooling``.
    """

    encoder: str = "lstm"
    units: tuple = (32, 32)
    pooling: str = "last"
    head: str = "moe"
    experts: int = 2
    vocab: int = 64
    visual_dim: int = 4
    audio_dim: int = 2
    use_audio: bool = True
    layer_norm: bool = False

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        if self.encoder not in ENCODERS:
            raise SpecError(f"unknown encoder {self.encoder!r}")
        if self.pooling not in POOLINGS:
            raise SpecError(f"unknown pooling {self.pooling!r}")
        if self.head not in HEADS:
            raise SpecError(f"unknown head {self.head!r}")
        if self.encoder != "mean_pool" and len(self.units) < 1:
            raise SpecError("at least one recurrent layer is required")
        if any(u < 1 for u in self.units):
            raise SpecError(f"layer widths must be >= 1, got {self.units}")
        if self.head == "moe" and self.experts < 1:
            raise SpecError("moe head needs experts >= 1")
        if min(self.vocab, self.visual_dim, self.audio_dim) < 1:
            raise SpecError("vocab and feature dims must be >= 1")
        if self.encoder == "late_fusion":
            if len(self.units) < 2:
                raise SpecError("late_fusion needs a branch layer plus >= 1 upper layer")
            if not self.use_audio:
                raise SpecError("late_fusion needs audio features")
        if self.norm_cells and min(self.units, default=2) < 2:
            raise SpecError("layer-normalized cells need >= 2 units per gate")

    @property
    def layers(self):
        return len(self.units)

    @property
    def norm_cells(self):
        return self.encoder == "ln_lstm" or (self.layer_norm and self.encoder != "mean_pool")

    @property
    def input_dim(self):
        return self.visual_dim + (self.audio_dim if self.use_audio else 0)

    @property
    def descriptor_dim(self):
        if self.encoder == "mean_pool":
            return self.input_dim
        if self.encoder == "bilstm":
            return 2 * self.units[-1]
        return self.units[-1]

    def to_dict(self):
        d = asdict(self)
        d["units"] = list(self.units)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown model keys: {sorted(extra)}")
        return cls(**d)


def _cell_shapes(prefix, d_in, hidden, norm):
    g = 4 * hidden
    out = [(f"{prefix}.Wx", (d_in, g)), (f"{prefix}.Wh", (hidden, g)), (f"{prefix}.b", (1, g))]
    if norm:
        out += [(f"{prefix}.{k}", (1, g)) for k in ("gx", "bx", "gh", "bh")]
    return out


def param_shapes(spec):
    """Ordered mapping of parameter segment name -> 2-D shape."""
    shapes = []
    norm = spec.norm_cells
    if spec.encoder in ("lstm", "ln_lstm"):
        d_in = spec.input_dim
        for i, u in enumerate(spec.units):
            shapes += _cell_shapes(f"enc.l{i}", d_in, u, norm)
            d_in = u
    elif spec.encoder == "bilstm":
        d_in = spec.input_dim
        for i, u in enumerate(spec.units):
            shapes += _cell_shapes(f"enc.l{i}.fw", d_in, u, norm)
            shapes += _cell_shapes(f"enc.l{i}.bw", d_in, u, norm)
            d_in = 2 * u
    elif spec.encoder == "late_fusion":
        u0 = spec.units[0]
        shapes += _cell_shapes("enc.vis", spec.visual_dim, u0, norm)
        shapes += _cell_shapes("enc.aud", spec.audio_dim, u0, norm)
        d_in = 2 * u0
        for i, u in enumerate(spec.units[1:], start=1):
            shapes += _cell_shapes(f"enc.l{i}", d_in, u, norm)
            d_in = u

    d, k = spec.descriptor_dim, spec.vocab
    if spec.head == "lr":
        shapes += [("head.W", (d, k)), ("head.b", (1, k))]
    else:
        ke = k * spec.experts
        shapes += [("head.gate.W", (d, ke)), ("head.gate.b", (1, ke)),
                   ("head.expert.W", (d, ke)), ("head.expert.b", (1, ke))]
    return OrderedDict(shapes)
