"""Full model (encoder + head), parameter init and the checkpoint container.

Checkpoint file layout (all integers little-endian)::

    b"FCK1"  u32 header_len  header_json[header_len]  f64 segment data...

The header is compact, key-sorted JSON with the model spec, step, seed and
the ordered segment table ``[[name, rows, cols], ...]``; segment payloads
follow in table order as ``<f8`` row-major.  Writing a loaded checkpoint
reproduces the original bytes.
"""
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .encoder import encode, encode_backward
from .heads import lr_backward, lr_forward, moe_backward, moe_forward
from .spec import ModelSpec, param_shapes

CKPT_MAGIC = b"FCK1"
FORGET_BIAS = 1.0


class CheckpointError(ValueError):
    pass


def init_params(spec, seed):
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget bias 1, LN gains 1."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(spec).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf in ("Wx", "Wh", "W"):
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        elif leaf in ("gx", "gh"):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
            if leaf == "b" and name.startswith("enc."):
                hidden = shape[1] // 4
                params[name][:, hidden:2 * hidden] = FORGET_BIAS
    return params


def forward(params, spec, feats, lens):
    """Per-label confidences ``[B, K]`` for a padded batch, plus a backward cache."""
    _, desc, enc_cache = encode(params, spec, feats, lens)
    if spec.head == "lr":
        p, head_cache = lr_forward(desc, params["head.W"], params["head.b"])
    else:
        p, head_cache = moe_forward(desc, params["head.gate.W"], params["head.gate.b"],
                                    params["head.expert.W"], params["head.expert.b"],
                                    spec.experts)
    return p, (spec, enc_cache, head_cache)


def backward(d_probs, cache):
    spec, enc_cache, head_cache = cache
    if spec.head == "lr":
        d_desc, hg = lr_backward(d_probs, head_cache)
    else:
        d_desc, hg = moe_backward(d_probs, head_cache)
    grads = {f"head.{k}": v for k, v in hg.items()}
    encode_backward(d_desc, enc_cache, grads)
    return grads


def predict(params, spec, feats, lens):
    return forward(params, spec, feats, lens)[0]


@dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict
    step: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def validate(self):
        shapes = param_shapes(self.spec)
        missing = set(shapes) - set(self.params)
        extra = set(self.params) - set(shapes)
        if missing or extra:
            raise CheckpointError(f"segment mismatch: missing {sorted(missing)}, "
                                  f"unexpected {sorted(extra)}")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise CheckpointError(
                    f"segment {name}: shape {self.params[name].shape} != {shape}")

    def to_bytes(self):
        self.validate()
        names = list(param_shapes(self.spec))
        header = {
            "spec": self.spec.to_dict(),
            "step": int(self.step),
            "seed": int(self.seed),
            "meta": self.meta,
            "segments": [[n, *self.params[n].shape] for n in names],
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        parts = [CKPT_MAGIC, struct.pack("<I", len(hbytes)), hbytes]
        parts += [np.ascontiguousarray(self.params[n], dtype="<f8").tobytes() for n in names]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf):
        if buf[:4] != CKPT_MAGIC:
            raise CheckpointError("bad magic at byte 0")
        if len(buf) < 8:
            raise CheckpointError("truncated header at byte 4")
        (hlen,) = struct.unpack_from("<I", buf, 4)
        try:
            header = json.loads(buf[8:8 + hlen])
        except ValueError as exc:
            raise CheckpointError(f"unreadable header at byte 8: {exc}") from None
        spec = ModelSpec.from_dict(header["spec"])
        offset = 8 + hlen
        params = {}
        for name, rows, cols in header["segments"]:
            nbytes = rows * cols * 8
            if offset + nbytes > len(buf):
                raise CheckpointError(f"segment {name} truncated at byte {offset}")
            params[name] = np.frombuffer(buf, dtype="<f8", count=rows * cols,
                                         offset=offset).reshape(rows, cols).astype(np.float64)
            offset += nbytes
        if offset != len(buf):
            raise CheckpointError(f"{len(buf) - offset} trailing bytes at byte {offset}")
        ckpt = cls(spec, params, header["step"], header["seed"], header.get("meta", {}))
        ckpt.validate()
        return ckpt

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())
