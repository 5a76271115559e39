"""Multi-crop inference, uniform prediction averaging and submission files.

Submission CSV::

    VideoId,LabelConfidencePairs
    vid1,3 0.900000 1 0.250000

Every row carries exactly ``k`` pairs, confidence-descending, printed with
six decimals.  A prediction table is the same CSV preceded by one
``# checkpoint=<id>,start=<s>`` comment line.
"""
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .data.crop import CropSpec
from .metrics import gap, topk_batch
from .training import GAP_TOP_K, infer

HEADER = "VideoId,LabelConfidencePairs"


class SubmissionError(ValueError):
    pass


@dataclass
class PredictionTable:
    ids: list
    labels: np.ndarray  # [N, k] int
    confs: np.ndarray   # [N, k] float, row-wise descending
    meta: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.labels.shape[1]

    def rows(self):
        for vid, lab, conf in zip(self.ids, self.labels, self.confs):
            yield vid, list(zip(lab.tolist(), conf.tolist()))

    def rounded(self):
        """Copy with confidences at printed precision."""
        confs = np.array([[float(f"{c:.6f}") for c in row] for row in self.confs])
        return PredictionTable(list(self.ids), self.labels.copy(), confs.reshape(self.confs.shape),
                               dict(self.meta))


def checkpoint_id(ckpt):
    return hashlib.sha256(ckpt.to_bytes()).hexdigest()[:12]


def training_crop(ckpt):
    crop = ckpt.meta.get("train", {}).get("crop", "full")
    return None if crop == "full" else CropSpec.from_dict(crop)


def predict_multicrop(ckpt, corpus, starts, k=GAP_TOP_K, crop=None, tag=None):
    """One top-k table per start index, each tagged with (checkpoint, start).

    ``crop`` defaults to the crop the checkpoint was trained with; a
    checkpoint trained on whole sequences ignores the start.
    """
    crop = crop if crop is not None else training_crop(ckpt)
    tag = tag or checkpoint_id(ckpt)
    k = min(k, ckpt.spec.vocab)
    tables = []
    for s in starts:
        if crop is None:
            view = CropSpec.full(corpus.max_length())
        else:
            if s >= max(crop.start_range, 1):
                raise ValueError(f"start {s} outside [0, {crop.start_range})")
            view = crop.with_start(int(s))
        labels, confs = topk_batch(infer(ckpt, corpus, view), k)
        tables.append(PredictionTable(corpus.ids, labels, confs,
                                      {"checkpoint": tag, "start": int(s)}))
    return tables


def average_predictions(tables, k=None):
    """Uniform mean over sources with absent labels counted as zero, re-sparsified to top-k.

    Contributions are sorted per cell before summing, and the mean is
    clamped into the per-cell [min, max] of the sources, so the result does
    not depend on source order and averaging identical sources is exact.
    """
    if not tables:
        raise ValueError("need at least one prediction source")
    ids = tables[0].ids
    ref = set(ids)
    for t in tables[1:]:
        if set(t.ids) != ref:
            missing = sorted(ref.symmetric_difference(t.ids))
            raise SubmissionError(f"video sets differ; mismatched ids: {missing[:10]}")
    k = k or tables[0].k
    vocab = 1 + max(int(t.labels.max()) for t in tables)
    pos = {vid: i for i, vid in enumerate(ids)}
    stack = np.zeros((len(tables), len(ids), vocab))
    for s, t in enumerate(tables):
        rows = np.array([pos[v] for v in t.ids])[:, None]
        stack[s, rows, t.labels] = t.confs
    stack.sort(axis=0)
    mean = np.clip(stack.sum(axis=0) / len(tables), stack[0], stack[-1])
    labels, confs = topk_batch(mean, min(k, vocab))
    return PredictionTable(list(ids), labels, confs, {"sources": len(tables)})


def format_table(table, comment=True):
    lines = []
    if comment and table.meta:
        lines.append("# " + ",".join(f"{k}={v}" for k, v in table.meta.items()))
    lines.append(HEADER)
    for vid, pairs in table.rows():
        if "," in vid:
            raise SubmissionError(f"video id {vid!r} contains a comma")
        lines.append(vid + "," + " ".join(f"{lab} {conf:.6f}" for lab, conf in pairs))
    return "\n".join(lines) + "\n"


def write_submission(table, path, comment=False):
    with open(path, "w", newline="") as fh:
        fh.write(format_table(table, comment))


def write_table(table, path):
    write_submission(table, path, comment=True)


def parse_table(text, k=None, source="<string>"):
    meta = {}
    ids, labels, confs = [], [], []
    seen = set()
    header_seen = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not header_seen and line.startswith("#"):
            for item in line[1:].strip().split(","):
                if "=" in item:
                    key, val = item.split("=", 1)
                    meta[key.strip()] = int(val) if val.strip().lstrip("-").isdigit() else val.strip()
            continue
        if not header_seen:
            if line != HEADER:
                raise SubmissionError(f"{source}:{line_no}: expected header {HEADER!r}")
            header_seen = True
            continue
        if not line:
            raise SubmissionError(f"{source}:{line_no}: empty row")
        vid, sep, rest = line.partition(",")
        if not sep or not vid:
            raise SubmissionError(f"{source}:{line_no}: malformed row")
        if vid in seen:
            raise SubmissionError(f"{source}:{line_no}: duplicate video id {vid!r}")
        tokens = rest.split(" ")
        if len(tokens) % 2:
            raise SubmissionError(f"{source}:{line_no}: odd number of label/confidence tokens")
        try:
            lab = [int(x) for x in tokens[0::2]]
            conf = [float(x) for x in tokens[1::2]]
        except ValueError:
            raise SubmissionError(f"{source}:{line_no}: malformed label or confidence") from None
        if k is None:
            k = len(lab)
        if len(lab) != k:
            raise SubmissionError(f"{source}:{line_no}: expected {k} pairs, got {len(lab)}")
        if len(set(lab)) != len(lab):
            raise SubmissionError(f"{source}:{line_no}: duplicate label in row")
        if any(b > a for a, b in zip(conf, conf[1:])):
            raise SubmissionError(f"{source}:{line_no}: confidences not descending")
        if any(not 0.0 <= c <= 1.0 for c in conf) or any(x < 0 for x in lab):
            raise SubmissionError(f"{source}:{line_no}: value out of range")
        seen.add(vid)
        ids.append(vid)
        labels.append(lab)
        confs.append(conf)
    if not header_seen:
        raise SubmissionError(f"{source}: missing header")
    k = k or 0
    return PredictionTable(ids, np.array(labels, dtype=np.int64).reshape(len(ids), k),
                           np.array(confs, dtype=np.float64).reshape(len(ids), k), meta)


def read_submission(path, k=None):
    with open(path, newline="") as fh:
        return parse_table(fh.read(), k, source=str(path))


read_table = read_submission


def score_table(table, truth, k=GAP_TOP_K):
    """GAP of a table against ``truth`` (``{video_id: observed labels}`` or a truth mapping
    of ``{video_id: (observed, clean)}``) at printed precision.

    Videos are pooled in truth order, so row order in the table is irrelevant.
    """
    order = {vid: i for i, vid in enumerate(truth)}
    unknown = [v for v in table.ids if v not in order]
    if unknown:
        raise SubmissionError(f"unknown video ids: {unknown[:10]}")
    rounded = table.rounded()
    rows = sorted(zip(rounded.ids, rounded.rows()), key=lambda r: order[r[0]])
    preds = [pairs for _, (_, pairs) in rows]
    positives = []
    for vid, _ in rows:
        entry = truth[vid]
        positives.append(entry[0] if isinstance(entry, tuple) else entry)
    return gap(preds, positives, k)


def score_submission(path, truth_path, k=GAP_TOP_K):
    from .data.corpus import read_truth
    return score_table(read_submission(path), read_truth(truth_path), k)
