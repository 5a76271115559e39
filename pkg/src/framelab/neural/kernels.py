"""Backend selection for the recurrent sequence kernels.

The compiled ``_lstm_ext`` module is used for plain LSTM layers when it
imports; otherwise, or when ``FRAMELAB_PURE=1`` is set, the numpy versions
from ``_fallback`` run.  Layer-normalized layers always use numpy.
"""
import os

from . import _fallback

ln_lstm_seq_forward = _fallback.ln_lstm_seq_forward
ln_lstm_seq_backward = _fallback.ln_lstm_seq_backward

_ext = None
if os.environ.get("FRAMELAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _lstm_ext as _ext
    except ImportError:  # not built
        _ext = None

if _ext is not None:
    BACKEND = "compiled"
    lstm_seq_forward = _ext.lstm_seq_forward
    lstm_seq_backward = _ext.lstm_seq_backward
else:
    BACKEND = "numpy"
    lstm_seq_forward = _fallback.lstm_seq_forward
    lstm_seq_backward = _fallback.lstm_seq_backward


def compiled_available():
    try:
        from . import _lstm_ext  # noqa: F401
    except ImportError:
        return False
    return True
