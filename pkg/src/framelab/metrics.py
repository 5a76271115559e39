"""Global Average Precision over pooled per-video top-k predictions.

Pooled ties are broken by a fixed total order: confidence descending, then
video ordinal ascending, then label id ascending.  Precision is accumulated
only at positions holding a true positive and normalized by the total
positive count ``M``, so a ranking whose first ``M`` entries are exactly the
positives scores 1.0.
"""
import numpy as np


class MetricError(ValueError):
    pass


def topk_sparsify(confidences, k):
    """Top-``k`` ``(label, confidence)`` pairs, descending; ties go to the lower label id."""
    if k < 1:
        raise MetricError("k must be >= 1")
    conf = np.asarray(confidences, dtype=np.float64)
    order = np.argsort(-conf, kind="stable")[:k]
    return [(int(i), float(conf[i])) for i in order]


def topk_batch(probs, k):
    """Row-wise :func:`topk_sparsify` for a ``[B, K]`` array; returns ``(labels, confs)``."""
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(probs, order, axis=1)


def _pool(predictions, positives, k):
    if len(predictions) != len(positives):
        raise MetricError(f"{len(predictions)} prediction lists vs {len(positives)} label sets")
    m = sum(len(set(p)) for p in positives)
    if m == 0:
        raise MetricError("GAP undefined: no positive labels (M = 0)")
    conf, vid, lab, hit = [], [], [], []
    for v, (pairs, pos) in enumerate(zip(predictions, positives)):
        pos = set(int(x) for x in pos)
        for label, c in list(pairs)[:k]:
            conf.append(c)
            vid.append(v)
            lab.append(label)
            hit.append(int(label) in pos)
    return (np.array(conf, dtype=np.float64), np.array(vid, dtype=np.int64),
            np.array(lab, dtype=np.int64), np.array(hit, dtype=bool), m)


def gap(predictions, positives, k=20):
    """GAP for per-video prediction lists against per-video positive label sets.

    ``predictions[v]`` is a sequence of ``(label, confidence)`` pairs (only
    the first ``k`` are used); ``positives[v]`` an iterable of label ids.
    """
    conf, vid, lab, hit, m = _pool(predictions, positives, k)
    if conf.size == 0:
        return 0.0
    order = np.lexsort((lab, vid, -conf))
    hits = hit[order]
    ranks = np.arange(1, hits.size + 1)
    tp = np.cumsum(hits)
    return float((tp[hits] / ranks[hits]).sum() / m)


def gap_from_arrays(probs, targets, k=20):
    """GAP of dense ``[N, K]`` confidences against 0/1 targets after top-k sparsification."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets)
    k = min(k, probs.shape[1])
    labels, confs = topk_batch(probs, k)
    m = int(targets.sum())
    if m == 0:
        raise MetricError("GAP undefined: no positive labels (M = 0)")
    hits = np.take_along_axis(targets, labels, axis=1).astype(bool).ravel()
    n = probs.shape[0]
    vid = np.repeat(np.arange(n), k)
    order = np.lexsort((labels.ravel(), vid, -confs.ravel()))
    hits = hits[order]
    ranks = np.arange(1, hits.size + 1)
    tp = np.cumsum(hits)
    return float((tp[hits] / ranks[hits]).sum() / m)


def gap_oracle(predictions, positives, k=20):
    """Literal position-by-position GAP walk, kept deliberately naive."""
    pooled = []
    total_pos = 0
    if len(predictions) != len(positives):
        raise MetricError("length mismatch")
    for v in range(len(predictions)):
        pos = set(int(x) for x in positives[v])
        total_pos += len(pos)
        count = 0
        for label, c in predictions[v]:
            if count == k:
                break
            pooled.append((c, v, label, int(label) in pos))
            count += 1
    if total_pos == 0:
        raise MetricError("GAP undefined: no positive labels (M = 0)")
    pooled.sort(key=lambda r: (-r[0], r[1], r[2]))
    score = 0.0
    true_so_far = 0
    for i, row in enumerate(pooled, start=1):
        if row[3]:
            true_so_far += 1
            score += true_so_far / i
    return score / total_pos
