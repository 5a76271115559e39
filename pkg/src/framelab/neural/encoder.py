"""Sequence encoders: stacked LSTM / LN-LSTM, BiLSTM, late fusion, mean pool.

Internally everything is time-major (``[T, B, D]``).  Sequences are padded
on the right; ``lens[b]`` is the number of valid steps of row ``b``.  The
forward direction is causal, so padded steps never reach valid outputs.
The backward direction of a BiLSTM runs over each row reversed *within*
its valid prefix, which keeps it padding-free as well.
"""
import numpy as np

from . import kernels
from .ops import ShapeError


def _layer_params(params, prefix):
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + ".")}


def reverse_within(a, lens):
    """Reverse ``a[:lens[b], b]`` for every row; steps past ``lens[b]`` stay put.

    An involution, so it is also its own backward.
    """
    steps, batch = a.shape[:2]
    t = np.arange(steps)[:, None]
    lens = np.asarray(lens)[None, :]
    idx = np.where(t < lens, lens - 1 - t, t)
    return a[idx, np.arange(batch)[None, :]]


def attention_indices(length):
    """Positions of the one-third, two-thirds and last outputs (0-based)."""
    if length < 1:
        raise ValueError("mask_len must be >= 1")
    return ((length + 2) // 3 - 1, (2 * length + 2) // 3 - 1, length - 1)


class _Dir:
    """One recurrent direction of one layer."""

    def __init__(self, prefix, norm, reverse):
        self.prefix, self.norm, self.reverse = prefix, norm, reverse

    def forward(self, params, xs, lens):
        p = _layer_params(params, self.prefix)
        if self.reverse:
            xs = reverse_within(xs, lens)
        fwd = kernels.ln_lstm_seq_forward if self.norm else kernels.lstm_seq_forward
        out, cache = fwd(np.ascontiguousarray(xs), p)
        if self.reverse:
            out = reverse_within(out, lens)
        return out, (cache, lens)

    def backward(self, d_out, state, grads):
        cache, lens = state
        if self.reverse:
            d_out = reverse_within(d_out, lens)
        bwd = kernels.ln_lstm_seq_backward if self.norm else kernels.lstm_seq_backward
        d_xs, g = bwd(np.ascontiguousarray(d_out), cache)
        for k, v in g.items():
            grads[f"{self.prefix}.{k}"] = v
        if self.reverse:
            d_xs = reverse_within(d_xs, lens)
        return d_xs


def _stack(spec):
    """Layer plan: list of (list of directions, input source)."""
    norm = spec.norm_cells
    if spec.encoder in ("lstm", "ln_lstm"):
        return [[_Dir(f"enc.l{i}", norm, False)] for i in range(spec.layers)]
    if spec.encoder == "bilstm":
        return [[_Dir(f"enc.l{i}.fw", norm, False), _Dir(f"enc.l{i}.bw", norm, True)]
                for i in range(spec.layers)]
    # late_fusion: first layer handled as two branches
    return [[_Dir(f"enc.l{i}", norm, False)] for i in range(1, spec.layers)]


def _select_inputs(spec, feats):
    feats = np.asarray(feats, dtype=np.float64)
    full = spec.visual_dim + spec.audio_dim
    if feats.shape[-1] != full:
        raise ShapeError(f"encoder: shape mismatch {feats.shape} vs (..., {full})")
    return feats if spec.use_audio else feats[..., :spec.visual_dim]


def _pool(spec, top, lens):
    batch = top.shape[1]
    rows = np.arange(batch)
    if spec.pooling == "attention3":
        picks = np.array([attention_indices(int(n)) for n in lens]).T  # [3, B]
        return (top[picks[0], rows] + top[picks[1], rows] + top[picks[2], rows]) / 3.0, picks
    last = np.asarray(lens) - 1
    if spec.encoder == "bilstm":
        half = top.shape[2] // 2
        return np.concatenate([top[last, rows, :half], top[0, rows, half:]], axis=1), None
    return top[last, rows], None


def _pool_backward(spec, d_desc, shape, lens, picks):
    d_top = np.zeros(shape)
    rows = np.arange(shape[1])
    if spec.pooling == "attention3":
        for k in range(3):
            np.add.at(d_top, (picks[k], rows), d_desc / 3.0)
        return d_top
    last = np.asarray(lens) - 1
    if spec.encoder == "bilstm":
        half = shape[2] // 2
        d_top[last, rows, :half] = d_desc[:, :half]
        d_top[0, rows, half:] += d_desc[:, half:]
        return d_top
    d_top[last, rows] = d_desc
    return d_top


def encode(params, spec, feats, lens, truncate=True):
    """Encode a padded batch.

    ``feats`` is batch-major ``[B, W, Dv + Da]``.  Returns
    ``(outputs, descriptor, cache)`` with outputs time-major
    ``[T, B, D_out]`` (``T = max(lens)`` when ``truncate``).
    """
    lens = np.asarray(lens, dtype=np.int64)
    feats = _select_inputs(spec, feats)
    if feats.ndim != 3 or feats.shape[0] != lens.shape[0]:
        raise ShapeError(f"encoder: shape mismatch {feats.shape} vs lens {lens.shape}")
    if lens.min() < 1:
        raise ValueError("mask_len must be >= 1")
    if lens.max() > feats.shape[1]:
        raise ValueError(f"mask_len {lens.max()} exceeds {feats.shape[1]} steps")
    steps = int(lens.max()) if truncate else feats.shape[1]
    xs = np.ascontiguousarray(feats[:, :steps].transpose(1, 0, 2))

    if spec.encoder == "mean_pool":
        mask = (np.arange(steps)[:, None] < lens[None, :]).astype(np.float64)[..., None]
        desc = (xs * mask).sum(axis=0) / lens[:, None]
        return xs, desc, (spec, lens, mask, None)

    states = []
    if spec.encoder == "late_fusion":
        dv = spec.visual_dim
        vis = _Dir("enc.vis", spec.norm_cells, False)
        aud = _Dir("enc.aud", spec.norm_cells, False)
        ov, sv = vis.forward(params, xs[..., :dv], lens)
        oa, sa = aud.forward(params, xs[..., dv:], lens)
        states.append(([vis, aud], [sv, sa], [ov.shape[2], oa.shape[2]]))
        xs = np.concatenate([ov, oa], axis=2)

    for dirs in _stack(spec):
        outs, st = [], []
        for d in dirs:
            o, s = d.forward(params, xs, lens)
            outs.append(o)
            st.append(s)
        states.append((dirs, st, [o.shape[2] for o in outs]))
        xs = outs[0] if len(outs) == 1 else np.concatenate(outs, axis=2)

    desc, picks = _pool(spec, xs, lens)
    return xs, desc, (spec, lens, xs.shape, picks, states)


def encode_backward(d_desc, cache, grads):
    """Accumulates encoder parameter gradients into ``grads``; returns d_inputs."""
    spec, lens = cache[0], cache[1]
    if spec.encoder == "mean_pool":
        mask = cache[2]
        return mask * (d_desc / lens[:, None])[None]
    _, _, shape, picks, states = cache
    d_x = _pool_backward(spec, d_desc, shape, lens, picks)
    for dirs, st, widths in reversed(states):
        splits = np.cumsum(widths)[:-1]
        parts = np.split(d_x, splits, axis=2) if len(dirs) > 1 else [d_x]
        d_in = None
        for d, s, part in zip(dirs, st, parts):
            dx = d.backward(part, s, grads)
            if spec.encoder == "late_fusion" and d.prefix in ("enc.vis", "enc.aud"):
                d_in = dx if d_in is None else np.concatenate([d_in, dx], axis=2)
            else:
                d_in = dx if d_in is None else d_in + dx
        d_x = d_in
    return d_x


def encode_sequence(frames, mask_len, spec, params):
    """Encode one ``[steps, Dv + Da]`` sequence.

    Returns ``(outputs [steps, D_out], descriptor)``; every step is run so
    the outputs cover padded positions too, but only the first ``mask_len``
    feed the descriptor.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if mask_len < 1:
        raise ValueError("mask_len must be >= 1")
    outs, desc, _ = encode(params, spec, frames[None], [mask_len], truncate=False)
    return outs[:, 0], desc[0]


def late_fusion_encode(visual, audio, mask_len, spec, params):
    visual = np.asarray(visual, dtype=np.float64)
    audio = np.asarray(audio, dtype=np.float64)
    if visual.shape[0] != audio.shape[0]:
        raise ShapeError(f"late_fusion: step mismatch {visual.shape} vs {audio.shape}")
    if spec.encoder != "late_fusion":
        raise ValueError(f"spec encoder is {spec.encoder!r}, not late_fusion")
    return encode_sequence(np.concatenate([visual, audio], axis=1), mask_len, spec, params)


def attention_pool(outputs, mask_len):
    """Equal-weight mean of the outputs at one third, two thirds and the end."""
    outputs = np.asarray(outputs, dtype=np.float64)
    a, b, c = attention_indices(mask_len)
    return (outputs[a] + outputs[b] + outputs[c]) / 3.0


def mean_pool_baseline(frames, length=None):
    """Per-dimension mean of the first ``length`` frames (all frames by default)."""
    frames = np.asarray(frames, dtype=np.float64)
    n = frames.shape[0] if length is None else int(length)
    if n < 1:
        raise ValueError("need at least one frame")
    return frames[:n].mean(axis=0)
