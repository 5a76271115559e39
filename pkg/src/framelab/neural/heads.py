"""One-vs-all classifier heads: logistic regression and mixture of logistic experts."""
import numpy as np

from .ops import ShapeError, matmul, sigmoid, sigmoid_backward
from .ops import softmax_rows, softmax_rows_backward

# float64 sigmoid rounds to exactly 1.0 past ~37; keep confidences inside (0, 1)
PROB_EPS = 1e-15


def _clip(p):
    q = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return q, q == p


def lr_forward(x, w, b):
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"lr head: shape mismatch {x.shape} vs {w.shape}")
    s = sigmoid(matmul(x, w) + b)
    p, live = _clip(s)
    return p, (x, w, s, live)


def lr_backward(dp, cache):
    x, w, s, live = cache
    dz = sigmoid_backward(dp * live, s)
    return dz @ w.T, {"W": x.T @ dz, "b": dz.sum(axis=0, keepdims=True)}


def moe_forward(x, wg, bg, we, be, experts):
    if x.shape[-1] != wg.shape[0] or x.shape[-1] != we.shape[0]:
        raise ShapeError(f"moe head: shape mismatch {x.shape} vs {wg.shape}")
    rows = x.shape[0]
    k = we.shape[1] // experts
    gate = softmax_rows((matmul(x, wg) + bg).reshape(rows, k, experts))
    s = sigmoid((matmul(x, we) + be).reshape(rows, k, experts))
    p, live = _clip((gate * s).sum(axis=-1))
    return p, (x, wg, we, gate, s, live)


def moe_backward(dp, cache):
    x, wg, we, gate, s, live = cache
    rows = x.shape[0]
    dp = (dp * live)[..., None]
    d_gate_logit = softmax_rows_backward(dp * s, gate).reshape(rows, -1)
    d_expert_logit = sigmoid_backward(dp * gate, s).reshape(rows, -1)
    dx = d_gate_logit @ wg.T + d_expert_logit @ we.T
    grads = {
        "gate.W": x.T @ d_gate_logit,
        "gate.b": d_gate_logit.sum(axis=0, keepdims=True),
        "expert.W": x.T @ d_expert_logit,
        "expert.b": d_expert_logit.sum(axis=0, keepdims=True),
    }
    return dx, grads


def _rowwise(fn, descriptor, *args):
    x = np.asarray(descriptor, dtype=np.float64)
    single = x.ndim == 1
    args = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in args]
    p, _ = fn(np.atleast_2d(x), *args)
    return p[0] if single else p


def classify_lr(descriptor, params):
    """Independent per-label logistic regressions; ``params`` has ``W [D,K]`` and ``b``."""
    return _rowwise(lr_forward, descriptor, params["W"], params["b"])


def classify_moe(descriptor, params, experts):
    """Per-label softmax-gated mixture of ``experts`` logistic regressions.

    Weight columns are label-major: column ``k * experts + e`` belongs to
    expert ``e`` of label ``k``.
    """
    x = np.asarray(descriptor, dtype=np.float64)
    single = x.ndim == 1
    p, _ = moe_forward(np.atleast_2d(x),
                       *(np.atleast_2d(np.asarray(params[n], dtype=np.float64))
                         for n in ("gate.W", "gate.b", "expert.W", "expert.b")),
                       experts)
    return p[0] if single else p
