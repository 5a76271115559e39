"""Recurrent encoders, classifier heads and their hand-derived gradients."""
from .cells import lstm_cell_step, ln_lstm_cell_step
from .encoder import (attention_pool, encode, encode_sequence, late_fusion_encode,
                      mean_pool_baseline)
from .gradcheck import GradReport, check_gradients
from .heads import classify_lr, classify_moe
from .kernels import BACKEND
from .model import Checkpoint, CheckpointError, backward, forward, init_params, predict
from .ops import ShapeError, layer_norm
from .spec import ModelSpec, SpecError, param_shapes

__all__ = [
    "BACKEND", "Checkpoint", "CheckpointError", "GradReport", "ModelSpec", "ShapeError",
    "SpecError", "attention_pool", "backward", "check_gradients", "classify_lr",
    "classify_moe", "encode", "encode_sequence", "forward", "init_params",
    "late_fusion_encode", "layer_norm", "ln_lstm_cell_step", "lstm_cell_step",
    "mean_pool_baseline", "param_shapes", "predict",
]
