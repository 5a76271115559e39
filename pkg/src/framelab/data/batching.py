"""Shuffled, cropped minibatches."""
from dataclasses import dataclass

import numpy as np

from .crop import crop_indices, effective_length


@dataclass
class Batch:
    features: np.ndarray  # [B, W, Dv + Da]
    lens: np.ndarray      # [B] valid steps per row
    targets: np.ndarray   # [B, K] 0/1 observed labels
    index: np.ndarray     # corpus ordinals of the rows


def epoch_permutation(n, seed, epoch):
    """Seed+epoch-determined visiting order.

    Consecutive epochs never repeat an order: if the draw equals the previous
    epoch's, it is rotated by one (which costs no extra randomness).
    """
    perm = np.random.default_rng([seed, epoch, 0]).permutation(n)
    if epoch > 0 and n > 1:
        prev = np.random.default_rng([seed, epoch - 1, 0]).permutation(n)
        if np.array_equal(perm, prev):
            perm = np.roll(perm, 1)
    return perm


def epoch_starts(corpus, crop, seed, epoch):
    """Per-video crop starts for one epoch (fixed when ``crop.start`` is set)."""
    if crop.start is not None:
        return np.full(len(corpus), crop.start, dtype=np.int64)
    highs = np.array([min(crop.start_range, effective_length(v.length, crop))
                      for v in corpus.videos])
    return np.random.default_rng([seed, epoch, 1]).integers(0, highs)


def make_batch(corpus, index, crop, starts):
    width = corpus.visual_dim + corpus.audio_dim
    feats = np.empty((len(index), crop.window, width))
    lens = np.empty(len(index), dtype=np.int64)
    for r, (i, s) in enumerate(zip(index, starts)):
        idx, valid = crop_indices(corpus.videos[i].length, crop, int(s))
        feats[r] = corpus.frames(i)[idx]
        lens[r] = valid
    return Batch(feats, lens, corpus.targets(index), np.asarray(index))


def batch_iter(corpus, batch_size, crop, seed, epoch, shuffle=True):
    """Yield :class:`Batch` objects covering every video once; the last may be short."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    order = epoch_permutation(len(corpus), seed, epoch) if shuffle else np.arange(len(corpus))
    starts = epoch_starts(corpus, crop, seed, epoch)
    for lo in range(0, len(order), batch_size):
        index = order[lo:lo + batch_size]
        yield make_batch(corpus, index, crop, starts[index])
