"""Pure numpy sequence kernels, time-major ``[T, B, D]``.

These are the reference for the compiled kernels in ``_lstm_ext``; both
expose the same four functions with the same opaque-cache contract.
"""
import numpy as np

from .cells import (lstm_cell_backward, lstm_cell_forward,
                    ln_lstm_cell_backward, ln_lstm_cell_forward)


def _run(step, xs, params):
    steps, batch, _ = xs.shape
    hidden = params["Wh"].shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    out = np.empty((steps, batch, hidden))
    caches = []
    for t in range(steps):
        h, c, cache = step(xs[t], h, c, params)
        out[t] = h
        caches.append(cache)
    return out, caches


def _unroll_back(step_back, d_out, caches, params):
    steps, batch, hidden = d_out.shape
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dxs = None
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        dx, dh, dc, g = step_back(d_out[t] + dh, dc, caches[t])
        if dxs is None:
            dxs = np.empty((steps, batch, dx.shape[1]))
        dxs[t] = dx
        for k, v in g.items():
            grads[k] += v
    return dxs, grads


def lstm_seq_forward(xs, params):
    """Runs a plain LSTM over ``xs``; returns ``(outputs, cache)``."""
    out, caches = _run(lstm_cell_forward, xs, params)
    return out, (caches, params)


def lstm_seq_backward(d_out, cache):
    """Full BPTT; returns ``(d_xs, grads)``."""
    caches, params = cache
    return _unroll_back(lstm_cell_backward, d_out, caches, params)


def ln_lstm_seq_forward(xs, params):
    out, caches = _run(ln_lstm_cell_forward, xs, params)
    return out, (caches, params)


def ln_lstm_seq_backward(d_out, cache):
    caches, params = cache
    return _unroll_back(ln_lstm_cell_backward, d_out, caches, params)
