"""Corpus types and the synthetic noisy-label corpus generator.

Each label owns a fixed Gaussian visual prototype and an independent audio
prototype.  A video's true labels are drawn by Zipf popularity; each one is
active on a single contiguous segment, and a frame's features are the sum of
the prototypes active there plus Gaussian noise.  Observed labels are the
true labels thinned to the requested recall, then topped up with false
positives (Zipf-popular, never a true label) until the corpus-wide precision
matches the requested value.
"""
import csv
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np


class ConfigError(ValueError):
    pass


@dataclass
class FrameSequence:
    video_id: str
    visual: np.ndarray
    audio: np.ndarray

    @property
    def length(self):
        return self.visual.shape[0]

    @property
    def frames(self):
        return np.concatenate([self.visual, self.audio], axis=1)


@dataclass
class Corpus:
    """Videos with observed labels; ``clean`` is filled only for generated corpora."""

    visual_dim: int
    audio_dim: int
    vocab: int
    videos: list
    labels: list
    clean: list = None
    _frames: list = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.videos)

    @property
    def ids(self):
        return [v.video_id for v in self.videos]

    def frames(self, i):
        """Cached ``[T, Dv + Da]`` float64 frame matrix of video ``i``."""
        if self._frames is None:
            self._frames = [None] * len(self.videos)
        if self._frames[i] is None:
            self._frames[i] = np.ascontiguousarray(self.videos[i].frames, dtype=np.float64)
        return self._frames[i]

    def targets(self, indices=None):
        indices = range(len(self)) if indices is None else indices
        out = np.zeros((len(indices), self.vocab))
        for r, i in enumerate(indices):
            out[r, self.labels[i]] = 1.0
        return out

    def subset(self, indices):
        return Corpus(self.visual_dim, self.audio_dim, self.vocab,
                      [self.videos[i] for i in indices],
                      [self.labels[i] for i in indices],
                      None if self.clean is None else [self.clean[i] for i in indices])

    def max_length(self):
        return max(v.length for v in self.videos)


@dataclass
class CorpusConfig:
    vocab: int = 64
    visual_dim: int = 4
    audio_dim: int = 2
    videos: int = 6000
    validate: int = 1000
    t_min: int = 24
    t_max: int = 72
    mean_labels: float = 2.5
    max_labels: int = 10
    zipf: float = 1.8
    coverage: tuple = (0.2, 0.6)
    noise: float = 0.5
    precision: float = 0.95
    recall: float = 0.7
    seed: int = None

    def __post_init__(self):
        self.coverage = tuple(float(c) for c in self.coverage)
        if not 0.0 < self.recall <= 1.0 or not 0.0 < self.precision <= 1.0:
            raise ConfigError(f"precision/recall must lie in (0, 1], got "
                              f"{self.precision}/{self.recall}")
        if not 1 <= self.t_min <= self.t_max:
            raise ConfigError(f"need 1 <= t_min <= t_max, got {self.t_min}..{self.t_max}")
        if self.mean_labels < 1:
            raise ConfigError("mean_labels must be >= 1")
        if min(self.vocab, self.visual_dim, self.audio_dim, self.videos) < 1:
            raise ConfigError("vocab, dims and video count must be >= 1")
        if not 0 <= self.validate < self.videos:
            raise ConfigError("validate must be in [0, videos)")
        lo, hi = self.coverage
        if not 0.0 < lo <= hi <= 1.0:
            raise ConfigError(f"coverage range must satisfy 0 < lo <= hi <= 1, got {self.coverage}")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")

    def to_dict(self):
        d = asdict(self)
        d["coverage"] = list(self.coverage)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown corpus keys: {sorted(extra)}")
        return cls(**d)


PRESETS = {
    "desk": {},
    # wider features and a flatter label distribution; mean pooling is close to optimal here
    "wide": {"visual_dim": 32, "audio_dim": 8, "zipf": 1.2},
    # noise level measured on the real labels
    "paper-noise": {"precision": 0.788, "recall": 0.145},
    # dataset-scale shapes; far too large to generate at desk scale
    "full-scale": {"vocab": 4716, "visual_dim": 1024, "audio_dim": 128, "t_min": 120,
              "t_max": 360, "mean_labels": 3.4, "precision": 0.788, "recall": 0.145},
}


def preset(name, **overrides):
    return CorpusConfig(**{**PRESETS[name], **overrides})


def zipf_weights(vocab, exponent):
    w = np.arange(1, vocab + 1, dtype=np.float64) ** -exponent
    return w / w.sum()


def _video_id(i):
    return f"v{i:06d}"


def synthesize(cfg):
    """Generate the whole corpus in memory; returns ``(corpus, prototypes)``.

    Features are rounded to float32 so the in-memory corpus equals what the
    record file stores.
    """
    if cfg.seed is None:
        raise ConfigError("a seed is required")
    rng = np.random.default_rng(cfg.seed)
    k, dv, da = cfg.vocab, cfg.visual_dim, cfg.audio_dim
    proto_v = rng.standard_normal((k, dv))
    proto_a = rng.standard_normal((k, da))
    popularity = zipf_weights(k, cfg.zipf)
    most = min(cfg.max_labels, k)

    videos, clean = [], []
    for v in range(cfg.videos):
        length = int(rng.integers(cfg.t_min, cfg.t_max + 1))
        count = int(np.clip(1 + rng.poisson(cfg.mean_labels - 1), 1, most))
        labels = np.sort(rng.choice(k, size=count, replace=False, p=popularity))
        visual = cfg.noise * rng.standard_normal((length, dv))
        audio = cfg.noise * rng.standard_normal((length, da))
        for lab in labels:
            span = max(1, int(round(rng.uniform(*cfg.coverage) * length)))
            start = int(rng.integers(0, length - span + 1))
            visual[start:start + span] += proto_v[lab]
            audio[start:start + span] += proto_a[lab]
        videos.append(FrameSequence(_video_id(v),
                                    visual.astype(np.float32).astype(np.float64),
                                    audio.astype(np.float32).astype(np.float64)))
        clean.append(labels.astype(np.int64))

    observed = [lab[rng.random(lab.size) < cfg.recall] for lab in clean]
    kept = sum(o.size for o in observed)
    budget = int(round(kept * (1.0 - cfg.precision) / cfg.precision))
    extra = [set() for _ in range(cfg.videos)]
    for _ in range(budget):
        v = int(rng.integers(cfg.videos))
        taken = set(clean[v].tolist()) | extra[v]
        if len(taken) >= k:
            continue
        w = popularity.copy()
        w[list(taken)] = 0.0
        extra[v].add(int(rng.choice(k, p=w / w.sum())))
    observed = [np.array(sorted(set(o.tolist()) | e), dtype=np.int64)
                for o, e in zip(observed, extra)]

    corpus = Corpus(dv, da, k, videos, observed, clean)
    return corpus, (proto_v, proto_a)


def split(corpus, n_validate):
    n_train = len(corpus) - n_validate
    return corpus.subset(range(n_train)), corpus.subset(range(n_train, len(corpus)))


def noise_stats(observed, clean):
    """Corpus-level (micro) precision and recall of observed vs clean labels."""
    tp = n_obs = n_clean = 0
    for o, c in zip(observed, clean):
        o, c = set(np.asarray(o).tolist()), set(np.asarray(c).tolist())
        tp += len(o & c)
        n_obs += len(o)
        n_clean += len(c)
    return (tp / n_obs if n_obs else 1.0), (tp / n_clean if n_clean else 1.0)


def label_rates(labels, vocab):
    counts = np.zeros(vocab)
    for lab in labels:
        counts[np.asarray(lab, dtype=np.int64)] += 1
    return counts / max(len(labels), 1)


def write_truth(path, ids, observed, clean):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "observed_labels", "clean_labels"])
        for vid, o, c in zip(ids, observed, clean):
            w.writerow([vid, " ".join(map(str, o)), " ".join(map(str, c))])


def read_truth(path):
    """Returns ``{video_id: (observed, clean)}`` in file order."""
    out = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["video_id", "observed_labels", "clean_labels"]:
            raise ValueError(f"{path}: unexpected truth header {header}")
        for line_no, row in enumerate(r, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
            if row[0] in out:
                raise ValueError(f"{path}:{line_no}: duplicate video id {row[0]!r}")
            out[row[0]] = ([int(x) for x in row[1].split()], [int(x) for x in row[2].split()])
    return out


def write_vocabulary(path, vocab, clean):
    counts = np.zeros(vocab, dtype=np.int64)
    for c in clean:
        counts[c] += 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label_id", "popularity_rank", "clean_positive_count"])
        for lab in range(vocab):
            w.writerow([lab, lab + 1, int(counts[lab])])


def generate_corpus(cfg, out_dir):
    """Write ``train.frv``, ``validate.frv`` (if any), ``truth.csv`` and ``vocabulary.csv``."""
    from .records import write_records

    corpus, _ = synthesize(cfg)
    os.makedirs(out_dir, exist_ok=True)
    train, val = split(corpus, cfg.validate)
    paths = {"train": os.path.join(out_dir, "train.frv")}
    write_records(paths["train"], train)
    if cfg.validate:
        paths["validate"] = os.path.join(out_dir, "validate.frv")
        write_records(paths["validate"], val)
    paths["truth"] = os.path.join(out_dir, "truth.csv")
    write_truth(paths["truth"], corpus.ids, corpus.labels, corpus.clean)
    paths["vocabulary"] = os.path.join(out_dir, "vocabulary.csv")
    write_vocabulary(paths["vocabulary"], cfg.vocab, corpus.clean)
    return paths
