"""Objective, optimizers, the fixed-epoch training loop and evaluation."""
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np

from .data.batching import batch_iter, make_batch
from .data.crop import DESK_CROP, CropSpec
from .metrics import MetricError, gap_from_arrays
from .neural.model import Checkpoint, backward, forward, init_params
from .neural.spec import ModelSpec

GAP_TOP_K = 20

# the mean-pool baseline averages whole videos and is cheap, so it trains to its plateau
BASELINE_TRAIN = {"epochs": 30, "crop": None}
# dataset-scale hyperparameters, kept for reference
FULL_SCALE_TRAIN = {"learning_rate": 0.001, "batch_size": 128, "epochs": 5}


class TrainingDiverged(RuntimeError):
    pass


def bce_loss(confidences, targets, ignore_below=0.0):
    """Mean binary cross-entropy over non-ignored entries, and its gradient.

    An entry is ignored when its target is 0 and its confidence is below
    ``ignore_below``; ignored entries get zero gradient.  If everything is
    ignored the loss is 0.
    """
    p = np.asarray(confidences, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"bce_loss: shape mismatch {p.shape} vs {y.shape}")
    active = ~((y == 0) & (p < ignore_below))
    n = int(active.sum())
    if n == 0:
        return 0.0, np.zeros_like(p)
    per = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    loss = float(per[active].sum() / n)
    grad = np.where(active, (-y / p + (1.0 - y) / (1.0 - p)) / n, 0.0)
    return loss, grad


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, in place; advances ``state.t`` by one."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def sgd_step(params, grads, state, lr=0.001, **_):
    state.t += 1
    for name, g in grads.items():
        params[name] -= lr * g


OPTIMIZERS = {"adam": adam_step, "sgd": sgd_step}


def clip_global_norm(grads, max_norm):
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if max_norm and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class TrainConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    crop: CropSpec = DESK_CROP  # None or "full": whole sequences
    learning_rate: float = 0.003
    batch_size: int = 8
    epochs: int = 20
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    clip_norm: float = 5.0
    ignore_threshold: float = 0.0
    checkpoint_every_epoch: bool = False
    seed: int = None

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelSpec.from_dict(self.model)
        if isinstance(self.crop, dict):
            self.crop = CropSpec.from_dict(self.crop)
        elif self.crop == "full":
            self.crop = None
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.ignore_threshold < 1.0:
            raise ValueError("ignore_threshold must lie in [0, 1)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["model"] = self.model.to_dict()
        d["crop"] = "full" if self.crop is None else self.crop.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown train keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class TrainReport:
    losses: list
    minibatch_gaps: list
    wall_time: float
    steps_per_epoch: int
    checkpoint_path: str = None
    validation_gap: float = None

    @property
    def steps(self):
        return len(self.losses)

    def first_step_reaching(self, threshold):
        """1-based step at which the minibatch GAP first reaches ``threshold`` (None if never)."""
        for i, g in enumerate(self.minibatch_gaps, start=1):
            if g >= threshold:
                return i
        return None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss", "minibatch_gap"])
            for i, (loss, g) in enumerate(zip(self.losses, self.minibatch_gaps), start=1):
                w.writerow([i, f"{loss:.10g}", "nan" if g != g else f"{g:.10g}"])


def _check_dims(spec, corpus):
    if (corpus.visual_dim, corpus.audio_dim, corpus.vocab) != (
            spec.visual_dim, spec.audio_dim, spec.vocab):
        raise ValueError(
            f"corpus dims (Dv={corpus.visual_dim}, Da={corpus.audio_dim}, K={corpus.vocab}) "
            f"do not match model (Dv={spec.visual_dim}, Da={spec.audio_dim}, K={spec.vocab})")


def _non_finite(params):
    return sorted(n for n, v in params.items() if not np.all(np.isfinite(v)))


def train_model(train, cfg, validation=None, out_dir=None, log=None):
    """Train for exactly ``epochs * ceil(N / B)`` steps; returns ``(report, checkpoint)``.

    Validation data, if given, is scored once at the end and never used to
    decide when to stop.
    """
    if cfg.seed is None:
        raise ValueError("a seed is required")
    spec = cfg.model
    _check_dims(spec, train)
    crop = cfg.crop if cfg.crop is not None else CropSpec.full(train.max_length())
    params = init_params(spec, cfg.seed)
    state = AdamState()
    step_fn = OPTIMIZERS[cfg.optimizer]
    k = min(GAP_TOP_K, spec.vocab)
    losses, gaps = [], []
    per_epoch = math.ceil(len(train) / cfg.batch_size)
    t0 = time.perf_counter()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    for epoch in range(cfg.epochs):
        for batch in batch_iter(train, cfg.batch_size, crop, cfg.seed, epoch):
            probs, cache = forward(params, spec, batch.features, batch.lens)
            loss, d_probs = bce_loss(probs, batch.targets, cfg.ignore_threshold)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at step {len(losses) + 1}; "
                                       f"non-finite segments: {_non_finite(params)}")
            grads = backward(d_probs, cache)
            clip_global_norm(grads, cfg.clip_norm)
            step_fn(params, grads, state, lr=cfg.learning_rate, beta1=cfg.beta1,
                    beta2=cfg.beta2, eps=cfg.epsilon)
            losses.append(loss)
            try:
                gaps.append(gap_from_arrays(probs, batch.targets, k))
            except MetricError:
                gaps.append(float("nan"))
            if log is not None and len(losses) % 50 == 0:
                log(f"step {len(losses)} loss {loss:.4f} gap {gaps[-1]:.4f}")
        if out_dir and cfg.checkpoint_every_epoch:
            Checkpoint(spec, {n: v.copy() for n, v in params.items()}, len(losses), cfg.seed,
                       {"train": cfg.to_dict(), "epoch": epoch + 1}).save(
                os.path.join(out_dir, f"checkpoint_epoch{epoch + 1}.fck"))

    bad = _non_finite(params)
    if bad:
        raise TrainingDiverged(f"non-finite parameters after step {len(losses)}: {bad}")
    ckpt = Checkpoint(spec, params, len(losses), cfg.seed, {"train": cfg.to_dict()})
    report = TrainReport(losses, gaps, time.perf_counter() - t0, per_epoch)
    if validation is not None:
        eval_crop = crop if crop.start is not None else crop.with_start(0)
        if cfg.crop is None:
            eval_crop = CropSpec.full(validation.max_length())
        report.validation_gap = evaluate_model(ckpt, validation, eval_crop)
    if out_dir:
        report.checkpoint_path = os.path.join(out_dir, "checkpoint.fck")
        ckpt.save(report.checkpoint_path)
        report.write_csv(os.path.join(out_dir, "report.csv"))
        summary = {"steps": report.steps, "final_loss": losses[-1],
                   "validation_gap": report.validation_gap}
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report, ckpt


def infer(ckpt, corpus, crop, batch_size=256):
    """Dense ``[N, K]`` confidences in corpus order using a fixed-start crop."""
    if crop.start is None:
        raise ValueError("inference needs a fixed crop start")
    _check_dims(ckpt.spec, corpus)
    out = np.empty((len(corpus), ckpt.spec.vocab))
    starts = np.full(len(corpus), crop.start)
    for lo in range(0, len(corpus), batch_size):
        index = np.arange(lo, min(lo + batch_size, len(corpus)))
        b = make_batch(corpus, index, crop, starts[index])
        out[index] = forward(ckpt.params, ckpt.spec, b.features, b.lens)[0]
    return out


def evaluate_model(ckpt, corpus, crop, k=GAP_TOP_K):
    """Corpus GAP of top-k predictions against observed labels."""
    probs = infer(ckpt, corpus, crop)
    return gap_from_arrays(probs, corpus.targets(), min(k, ckpt.spec.vocab))


# architecture presets exercised by the gradient suite
GRADCHECK_PRESETS = {
    "lstm+lr": dict(encoder="lstm", head="lr"),
    "lstm+moe": dict(encoder="lstm", head="moe"),
    "ln_lstm+lr": dict(encoder="ln_lstm", head="lr", layer_norm=True),
    "bilstm+moe": dict(encoder="bilstm", head="moe"),
    "bilstm+moe+attention": dict(encoder="bilstm", head="moe", pooling="attention3"),
    "late_fusion+lr": dict(encoder="late_fusion", head="lr"),
}


def gradcheck_preset(name, seed=0, probes=200, tol=1e-5):
    """Finite-difference check of the full loss (encoder, head, BCE) for one preset."""
    from .neural.gradcheck import check_gradients

    spec = ModelSpec(units=(5, 4), vocab=6, visual_dim=4, audio_dim=3, experts=3,
                     **GRADCHECK_PRESETS[name])
    rng = np.random.default_rng(seed)
    params = init_params(spec, seed)
    for v in params.values():  # move off the symmetric initial point
        v += 0.1 * rng.standard_normal(v.shape)
    feats = rng.standard_normal((3, 7, spec.input_dim))
    lens = np.array([7, 4, 1])
    targets = (rng.random((3, spec.vocab)) < 0.4).astype(float)

    def loss_fn(p):
        return bce_loss(forward(p, spec, feats, lens)[0], targets)[0]

    def grad_fn(p):
        probs, cache = forward(p, spec, feats, lens)
        return backward(bce_loss(probs, targets)[1], cache)

    return check_gradients(loss_fn, grad_fn, params, probes=probes, tol=tol, seed=seed)
