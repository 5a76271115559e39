"""Single-step LSTM and layer-normalized LSTM cells.

Gate blocks are packed along the last axis in the order ``i, f, g, o``:
``z = x @ Wx + h_prev @ Wh + b`` has width ``4H``.  All tensors carry a
leading batch axis; :func:`lstm_cell_step` and :func:`ln_lstm_cell_step`
also accept bare vectors.
"""
import numpy as np

from .ops import layer_norm, layer_norm_backward, matmul, ShapeError
from .ops import sigmoid, tanh

LSTM_KEYS = ("Wx", "Wh", "b")
LN_KEYS = ("Wx", "Wh", "b", "gx", "bx", "gh", "bh")


def _check(x, h_prev, c_prev, p):
    hidden = p["Wh"].shape[0]
    if p["Wh"].shape[1] != 4 * hidden or p["Wx"].shape[1] != 4 * hidden:
        raise ShapeError(f"lstm cell: shape mismatch {p['Wx'].shape} vs {p['Wh'].shape}")
    if h_prev.shape[-1] != hidden or c_prev.shape[-1] != hidden:
        raise ShapeError(f"lstm cell: shape mismatch {h_prev.shape} vs {c_prev.shape}")
    if x.shape[-1] != p["Wx"].shape[0]:
        raise ShapeError(f"lstm cell: shape mismatch {x.shape} vs {p['Wx'].shape}")
    return hidden


def _gates(z, hidden):
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden:2 * hidden])
    g = tanh(z[:, 2 * hidden:3 * hidden])
    o = sigmoid(z[:, 3 * hidden:])
    return i, f, g, o


def _state_update(z, c_prev, hidden):
    i, f, g, o = _gates(z, hidden)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return o * tc, c, (i, f, g, o, tc)


def _state_backward(dh, dc, c_prev, acts):
    i, f, g, o, tc = acts
    do = dh * tc
    dct = dh * o * (1.0 - tc * tc) + dc
    dz = np.concatenate([
        dct * g * i * (1.0 - i),
        dct * c_prev * f * (1.0 - f),
        dct * i * (1.0 - g * g),
        do * o * (1.0 - o),
    ], axis=-1)
    return dz, dct * f


def lstm_cell_forward(x, h_prev, c_prev, p):
    hidden = _check(x, h_prev, c_prev, p)
    z = matmul(x, p["Wx"]) + matmul(h_prev, p["Wh"]) + p["b"]
    h, c, acts = _state_update(z, c_prev, hidden)
    return h, c, (x, h_prev, c_prev, p, acts)


def lstm_cell_backward(dh, dc, cache):
    """Returns (dx, dh_prev, dc_prev, grads) where grads has keys Wx, Wh, b."""
    x, h_prev, c_prev, p, acts = cache
    dz, dc_prev = _state_backward(dh, dc, c_prev, acts)
    grads = {
        "Wx": x.T @ dz,
        "Wh": h_prev.T @ dz,
        "b": dz.sum(axis=0, keepdims=True),
    }
    return dz @ p["Wx"].T, dz @ p["Wh"].T, dc_prev, grads


def _gate_norm(a, gain, bias, hidden):
    # each gate block is standardized on its own
    rows = a.shape[0]
    y, cache = layer_norm(a.reshape(rows, 4, hidden),
                          gain.reshape(4, hidden), bias.reshape(4, hidden))
    return y.reshape(rows, 4 * hidden), cache


def _gate_norm_backward(dy, cache, hidden):
    rows = dy.shape[0]
    da, dg, db = layer_norm_backward(dy.reshape(rows, 4, hidden), cache)
    return da.reshape(rows, 4 * hidden), dg.reshape(1, -1), db.reshape(1, -1)


def ln_lstm_cell_forward(x, h_prev, c_prev, p):
    hidden = _check(x, h_prev, c_prev, p)
    ax = matmul(x, p["Wx"])
    ah = matmul(h_prev, p["Wh"])
    nx, cx = _gate_norm(ax, p["gx"], p["bx"], hidden)
    nh, ch = _gate_norm(ah, p["gh"], p["bh"], hidden)
    h, c, acts = _state_update(nx + nh + p["b"], c_prev, hidden)
    return h, c, (x, h_prev, c_prev, p, acts, cx, ch)


def ln_lstm_cell_backward(dh, dc, cache):
    x, h_prev, c_prev, p, acts, cx, ch = cache
    hidden = h_prev.shape[-1]
    dz, dc_prev = _state_backward(dh, dc, c_prev, acts)
    dax, dgx, dbx = _gate_norm_backward(dz, cx, hidden)
    dah, dgh, dbh = _gate_norm_backward(dz, ch, hidden)
    grads = {
        "Wx": x.T @ dax,
        "Wh": h_prev.T @ dah,
        "b": dz.sum(axis=0, keepdims=True),
        "gx": dgx, "bx": dbx, "gh": dgh, "bh": dbh,
    }
    return dax @ p["Wx"].T, dah @ p["Wh"].T, dc_prev, grads


def _vector_step(fwd, x, h_prev, c_prev, params):
    x, h_prev, c_prev = (np.asarray(v, dtype=np.float64) for v in (x, h_prev, c_prev))
    single = x.ndim == 1
    if single:
        x, h_prev, c_prev = x[None], h_prev[None], c_prev[None]
    p = {k: np.atleast_2d(np.asarray(v, dtype=np.float64)) for k, v in params.items()}
    h, c, _ = fwd(x, h_prev, c_prev, p)
    return (h[0], c[0]) if single else (h, c)


def lstm_cell_step(x, h_prev, c_prev, params):
    """One plain LSTM step; returns ``(h, c)``."""
    return _vector_step(lstm_cell_forward, x, h_prev, c_prev, params)


def ln_lstm_cell_step(x, h_prev, c_prev, params):
    """One LSTM step with per-gate layer norm on both affine terms."""
    return _vector_step(ln_lstm_cell_forward, x, h_prev, c_prev, params)
