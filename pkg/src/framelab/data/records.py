"""FRV1 binary frame-record files.

Layout, little-endian throughout::

    b"FRV1"
    u32 version  u32 Dv  u32 Da  u32 K
    per video:
        u32 id_len  id bytes (utf-8)
        u32 n_labels  u32 labels[n_labels]
        u32 T  f32 features[T * (Dv + Da)]   # per frame: visual then audio

There is no video count; a reader consumes videos until end of file.
"""
import struct

import numpy as np

from .corpus import Corpus, FrameSequence

MAGIC = b"FRV1"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")
_U32 = struct.Struct("<I")


class RecordFormatError(ValueError):
    def __init__(self, message, offset, video=None):
        where = f"byte {offset}" if video is None else f"video #{video} at byte {offset}"
        super().__init__(f"{message} ({where})")
        self.offset = offset
        self.video = video


def encode_records(corpus):
    dv, da = corpus.visual_dim, corpus.audio_dim
    if min(dv, da, corpus.vocab) < 1:
        raise ValueError("Dv, Da and K must be >= 1")
    parts = [_HEADER.pack(MAGIC, VERSION, dv, da, corpus.vocab)]
    for seq, labels in zip(corpus.videos, corpus.labels):
        if seq.visual.shape[1] != dv or seq.audio.shape[1] != da:
            raise ValueError(f"{seq.video_id}: feature dims do not match corpus header")
        vid = seq.video_id.encode("utf-8")
        labels = np.asarray(labels, dtype="<u4")
        parts += [_U32.pack(len(vid)), vid, _U32.pack(labels.size), labels.tobytes(),
                  _U32.pack(seq.length),
                  np.concatenate([seq.visual, seq.audio], axis=1).astype("<f4").tobytes()]
    return b"".join(parts)


def write_records(path, corpus):
    with open(path, "wb") as fh:
        fh.write(encode_records(corpus))


def decode_records(buf):
    if len(buf) < _HEADER.size:
        raise RecordFormatError("truncated header", len(buf))
    magic, version, dv, da, k = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise RecordFormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise RecordFormatError(f"unsupported version {version}", 4)
    for name, value, off in (("Dv", dv, 8), ("Da", da, 12), ("K", k, 16)):
        if value < 1:
            raise RecordFormatError(f"header {name}={value} must be >= 1", off)

    width = dv + da
    videos, labels = [], []
    pos = _HEADER.size
    end = len(buf)
    n = 0

    def need(count, what):
        if pos + count > end:
            raise RecordFormatError(f"truncated {what}", pos, n)

    while pos < end:
        need(4, "id length")
        (id_len,) = _U32.unpack_from(buf, pos)
        pos += 4
        need(id_len, "video id")
        try:
            vid = bytes(buf[pos:pos + id_len]).decode("utf-8")
        except UnicodeDecodeError:
            raise RecordFormatError("video id is not utf-8", pos, n) from None
        pos += id_len
        need(4, "label count")
        (n_lab,) = _U32.unpack_from(buf, pos)
        pos += 4
        need(4 * n_lab, "labels")
        lab = np.frombuffer(buf, dtype="<u4", count=n_lab, offset=pos).astype(np.int64)
        if n_lab and (lab.max() >= k or np.any(np.diff(lab) <= 0)):
            raise RecordFormatError(f"labels must be strictly ascending and < K={k}", pos, n)
        pos += 4 * n_lab
        need(4, "frame count")
        (t,) = _U32.unpack_from(buf, pos)
        if t < 1:
            raise RecordFormatError("frame count must be >= 1", pos, n)
        pos += 4
        need(4 * t * width, "features")
        feats = np.frombuffer(buf, dtype="<f4", count=t * width, offset=pos)
        feats = feats.reshape(t, width).astype(np.float64)
        if not np.all(np.isfinite(feats)):
            raise RecordFormatError("non-finite feature value", pos, n)
        pos += 4 * t * width
        videos.append(FrameSequence(vid, feats[:, :dv].copy(), feats[:, dv:].copy()))
        labels.append(lab)
        n += 1
    return Corpus(dv, da, k, videos, labels)


def read_records(path):
    with open(path, "rb") as fh:
        return decode_records(fh.read())
