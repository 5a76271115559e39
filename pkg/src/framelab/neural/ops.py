"""Dense float64 primitives with hand-written backward counterparts.

Every ``*_backward`` maps the upstream gradient of the forward output to the
gradient(s) of the forward input(s).  Shapes are checked eagerly so a wiring
mistake fails at the offending call instead of broadcasting silently.
"""
import numpy as np
from scipy.special import expit

LN_EPS = 1e-6


class ShapeError(ValueError):
    pass


def _as_f64(a):
    return np.asarray(a, dtype=np.float64)


def _require_same(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a, b):
    a, b = _as_f64(a), _as_f64(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    return a @ b


def matmul_backward(grad, a, b):
    """Returns (d_a, d_b) for ``out = a @ b``."""
    grad = _as_f64(grad)
    expected = (a.shape[0], b.shape[1])
    if grad.shape != expected:
        raise ShapeError(f"matmul_backward: shape mismatch {grad.shape} vs {expected}")
    return grad @ b.T, a.T @ grad


def add(a, b):
    a, b = _as_f64(a), _as_f64(b)
    _require_same(a, b, "add")
    return a + b


def add_backward(grad):
    return grad, grad


def hadamard(a, b):
    a, b = _as_f64(a), _as_f64(b)
    _require_same(a, b, "hadamard")
    return a * b


def hadamard_backward(grad, a, b):
    return grad * b, grad * a


def sigmoid(x):
    return expit(_as_f64(x))


def sigmoid_backward(grad, out):
    """``out`` is the forward output, not the input."""
    return grad * out * (1.0 - out)


def tanh(x):
    return np.tanh(_as_f64(x))


def tanh_backward(grad, out):
    return grad * (1.0 - out * out)


def softmax_rows(x):
    x = _as_f64(x)
    if x.ndim < 1 or x.shape[-1] == 0:
        raise ShapeError(f"softmax_rows: shape mismatch {x.shape} vs (..., n>=1)")
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_rows_backward(grad, out):
    inner = (grad * out).sum(axis=-1, keepdims=True)
    return out * (grad - inner)


def layer_norm(x, gain, bias, eps=LN_EPS):
    """Normalize along the last axis, then scale and shift.

    Returns ``(y, cache)``; the cache feeds :func:`layer_norm_backward`.
    A constant input has zero variance, which ``eps`` floors, so it maps to
    ``bias`` rather than raising.
    """
    x, gain, bias = _as_f64(x), _as_f64(gain), _as_f64(bias)
    if x.shape[-1] < 2:
        raise ShapeError(f"layer_norm: shape mismatch {x.shape} vs (..., n>=2)")
    if gain.shape[-1] != x.shape[-1] or bias.shape[-1] != x.shape[-1]:
        raise ShapeError(f"layer_norm: shape mismatch {x.shape} vs {gain.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * gain + bias, (xhat, rstd, gain)


def layer_norm_backward(grad, cache):
    """Returns (d_x, d_gain, d_bias); gain/bias grads are summed over the axes gain broadcasts across."""
    xhat, rstd, gain = cache
    lead = tuple(range(grad.ndim - np.ndim(gain)))
    d_gain = (grad * xhat).sum(axis=lead)
    d_bias = grad.sum(axis=lead)
    dxhat = grad * gain
    n = xhat.shape[-1]
    d_x = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                  - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / n)
    return d_x, d_gain.reshape(np.shape(gain)), d_bias.reshape(np.shape(gain))
