"""Strided temporal cropping with a (possibly random) start offset."""
from dataclasses import asdict, dataclass, fields

import numpy as np

from .corpus import FrameSequence


@dataclass(frozen=True)
class CropSpec:
    """Pick ``window`` frames ``start, start + stride, ...`` from the first ``horizon`` frames.

    ``start=None`` draws the start uniformly from ``[0, min(start_range, T))``.
    ``horizon=None`` considers the whole sequence.
    """

    window: int
    stride: int = 1
    start_range: int = 1
    start: int = None
    horizon: int = None

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ValueError("crop window and stride must be >= 1")
        if self.start is not None and not 0 <= self.start < max(self.start_range, 1):
            raise ValueError(f"start {self.start} outside [0, {max(self.start_range, 1)})")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")

    @classmethod
    def full(cls, max_length):
        """Identity crop for sequences up to ``max_length`` frames."""
        return cls(window=max_length, stride=1, start_range=1, start=0)

    def with_start(self, start):
        return CropSpec(self.window, self.stride, max(self.start_range, start + 1),
                        start, self.horizon)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown crop keys: {sorted(extra)}")
        return cls(**d)


# covers 48 frames and admits starts 0..4 for multi-crop prediction
DESK_CROP = CropSpec(window=12, stride=4, start_range=5)
FULL_SCALE_CROP = CropSpec(window=45, stride=5, start_range=10, horizon=225)


def effective_length(length, crop):
    return length if crop.horizon is None else min(length, crop.horizon)


def draw_start(length, crop, rng):
    return int(rng.integers(0, min(crop.start_range, effective_length(length, crop))))


def crop_indices(length, crop, start):
    """Frame indices (padded to ``window`` by repeating the last one) and the valid count."""
    usable = effective_length(length, crop)
    start = min(start, usable - 1)
    stop = min(usable, start + crop.window * crop.stride)
    idx = np.arange(start, stop, crop.stride)[:crop.window]
    valid = idx.size
    if valid < crop.window:
        idx = np.concatenate([idx, np.full(crop.window - valid, idx[-1])])
    return idx, valid


def crop_sequence(seq, crop, rng=None):
    """Returns ``(cropped FrameSequence, mask_len)``; the crop is always ``window`` long."""
    start = crop.start
    if start is None:
        if rng is None:
            raise ValueError("random crop needs an rng")
        start = draw_start(seq.length, crop, rng)
    idx, valid = crop_indices(seq.length, crop, start)
    return FrameSequence(seq.video_id, seq.visual[idx], seq.audio[idx]), valid
