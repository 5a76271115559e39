import hashlib
import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from framelab.data import (ConfigError, Corpus, CorpusConfig, CropSpec, FrameSequence,
                           RecordFormatError, batch_iter, crop_indices, crop_sequence,
                           decode_records, encode_records, epoch_permutation,
                           generate_corpus, label_rates, noise_stats, preset, read_records,
                           read_truth, synthesize, write_records)
from framelab.data.crop import FULL_SCALE_CROP


def small_cfg(**kw):
    base = dict(vocab=12, visual_dim=4, audio_dim=2, videos=40, validate=10, t_min=5,
                t_max=15, seed=3)
    base.update(kw)
    return CorpusConfig(**base)


def digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# ---- generator -----------------------------------------------------------

def test_generator_is_byte_deterministic(tmp_path):
    a = generate_corpus(small_cfg(), tmp_path / "a")
    b = generate_corpus(small_cfg(), tmp_path / "b")
    for key in a:
        assert digest(a[key]) == digest(b[key]), key
    c = generate_corpus(small_cfg(seed=4), tmp_path / "c")
    assert digest(a["train"]) != digest(c["train"])


def test_generator_outputs(tmp_path):
    paths = generate_corpus(small_cfg(), tmp_path)
    train, val = read_records(paths["train"]), read_records(paths["validate"])
    assert (len(train), len(val)) == (30, 10)
    truth = read_truth(paths["truth"])
    assert list(truth) == train.ids + val.ids
    for vid, lab in zip(train.ids, train.labels):
        assert truth[vid][0] == lab.tolist()
    with open(paths["vocabulary"]) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "label_id,popularity_rank,clean_positive_count"
    assert len(lines) == 13
    counts = [int(l.split(",")[2]) for l in lines[1:]]
    assert sum(counts) == sum(len(c) for _, c in truth.values())


def test_noiseless_knobs_keep_clean_labels():
    corpus, _ = synthesize(small_cfg(precision=1.0, recall=1.0, videos=200, validate=0))
    for o, c in zip(corpus.labels, corpus.clean):
        np.testing.assert_array_equal(o, c)


def test_generator_shapes_and_ranges():
    cfg = small_cfg(videos=300, validate=0)
    corpus, _ = synthesize(cfg)
    for seq, lab, clean in zip(corpus.videos, corpus.labels, corpus.clean):
        assert cfg.t_min <= seq.length <= cfg.t_max
        assert seq.visual.shape[1] == 4 and seq.audio.shape[1] == 2
        assert 1 <= clean.size <= min(cfg.max_labels, cfg.vocab)
        assert np.all(np.diff(lab) > 0) and np.all(np.diff(clean) > 0)
        # features already sit on the float32 grid
        np.testing.assert_array_equal(seq.visual, seq.visual.astype(np.float32))


@pytest.mark.parametrize("bad", [dict(precision=0.0), dict(recall=1.5), dict(recall=0.0),
                                 dict(t_min=9, t_max=3), dict(mean_labels=0.5)])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        small_cfg(**bad)


def test_unknown_config_key_rejected():
    with pytest.raises(ConfigError):
        CorpusConfig.from_dict({"vocab": 3, "colour": "red"})


def test_mean_label_count_noiseless():
    corpus, _ = synthesize(CorpusConfig(videos=5000, validate=0, precision=1.0, recall=1.0,
                                        seed=11, t_min=2, t_max=4))
    mean = np.mean([len(l) for l in corpus.labels])
    assert abs(mean - 2.5) / 2.5 < 0.05


def test_label_frequencies_follow_popularity():
    corpus, _ = synthesize(CorpusConfig(videos=5000, validate=0, seed=12, t_min=2, t_max=4))
    rates = label_rates(corpus.labels, corpus.vocab)
    # non-increasing up to sampling noise: compare coarse blocks of the vocabulary
    blocks = rates.reshape(8, -1).mean(axis=1)
    assert np.all(np.diff(blocks) <= 0.005)


def test_noise_preset_hits_knobs():
    corpus, _ = synthesize(preset("paper-noise", videos=2000, validate=0, seed=5,
                                  t_min=2, t_max=4))
    precision, recall = noise_stats(corpus.labels, corpus.clean)
    assert abs(precision - 0.788) <= 0.02
    assert abs(recall - 0.145) <= 0.02


# ---- records -------------------------------------------------------------

def tiny_corpus():
    rng = np.random.default_rng(0)
    vids = [FrameSequence(f"x{i}", rng.normal(size=(t, 3)).astype(np.float32).astype(float),
                          rng.normal(size=(t, 2)).astype(np.float32).astype(float))
            for i, t in enumerate((2, 5, 1))]
    return Corpus(3, 2, 7, vids, [np.array([0, 4]), np.array([], dtype=np.int64),
                                  np.array([6])])


def assert_corpus_equal(a, b):
    assert (a.visual_dim, a.audio_dim, a.vocab) == (b.visual_dim, b.audio_dim, b.vocab)
    assert a.ids == b.ids
    for x, y in zip(a.labels, b.labels):
        np.testing.assert_array_equal(x, y)
    for x, y in zip(a.videos, b.videos):
        np.testing.assert_array_equal(x.visual, y.visual)
        np.testing.assert_array_equal(x.audio, y.audio)


def test_records_round_trip(tmp_path):
    c = tiny_corpus()
    write_records(tmp_path / "c.frv", c)
    assert_corpus_equal(read_records(tmp_path / "c.frv"), c)


def test_records_layout_is_bit_exact():
    c = tiny_corpus()
    buf = encode_records(c)
    assert buf[:4] == b"FRV1"
    assert struct.unpack_from("<IIII", buf, 4) == (1, 3, 2, 7)
    # first video: id_len, id, n_labels, labels, T, features
    assert struct.unpack_from("<I", buf, 20) == (2,)
    assert buf[24:26] == b"x0"
    assert struct.unpack_from("<III", buf, 26) == (2, 0, 4)
    assert struct.unpack_from("<I", buf, 38) == (2,)
    first = np.frombuffer(buf, "<f4", count=5, offset=42)
    np.testing.assert_array_equal(first, np.concatenate([c.videos[0].visual[0],
                                                         c.videos[0].audio[0]]))


def test_bad_magic_rejected():
    buf = bytearray(encode_records(tiny_corpus()))
    buf[:4] = b"XXXX"
    with pytest.raises(RecordFormatError, match="byte 0"):
        decode_records(bytes(buf))


def test_zero_dim_header_rejected():
    buf = bytearray(encode_records(tiny_corpus()))
    buf[8:12] = struct.pack("<I", 0)
    with pytest.raises(RecordFormatError, match="Dv=0"):
        decode_records(bytes(buf))


def test_truncated_video_names_ordinal():
    buf = encode_records(tiny_corpus())
    with pytest.raises(RecordFormatError) as err:
        decode_records(buf[:-7])
    assert err.value.video == 2
    assert "video #2" in str(err.value)


def test_label_beyond_vocab_rejected():
    buf = bytearray(encode_records(tiny_corpus()))
    buf[30:34] = struct.pack("<I", 9)  # second label of video 0
    with pytest.raises(RecordFormatError, match="video #0"):
        decode_records(bytes(buf))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 4), st.integers(2, 9))
def test_generated_corpora_round_trip(seed, dv, da, vocab):
    cfg = CorpusConfig(vocab=vocab, visual_dim=dv, audio_dim=da, videos=6, validate=0,
                       t_min=1, t_max=6, seed=seed)
    corpus, _ = synthesize(cfg)
    assert_corpus_equal(decode_records(encode_records(corpus)), corpus)


# ---- cropping ------------------------------------------------------------

def seq_of(length, dv=2, da=1):
    frames = np.arange(length * (dv + da), dtype=float).reshape(length, dv + da)
    return FrameSequence("s", frames[:, :dv], frames[:, dv:])


def test_crop_full_window():
    idx, valid = crop_indices(225, CropSpec(45, 5, 10), 3)
    np.testing.assert_array_equal(idx, np.arange(3, 224, 5))
    assert valid == 45 and idx[-1] == 223


def test_crop_short_sequence_pads():
    cropped, valid = crop_sequence(seq_of(30), CropSpec(45, 5, 10, start=2))
    assert valid == 6
    assert cropped.length == 45
    np.testing.assert_array_equal(cropped.visual[:6, 0] / 3, [2, 7, 12, 17, 22, 27])
    np.testing.assert_array_equal(cropped.visual[6:], np.repeat(cropped.visual[5:6], 39, 0))


def test_identity_crop():
    s = seq_of(17)
    cropped, valid = crop_sequence(s, CropSpec(17, 1, 1, start=0))
    assert valid == 17
    np.testing.assert_array_equal(cropped.visual, s.visual)
    np.testing.assert_array_equal(cropped.audio, s.audio)


def test_full_scale_crop_horizon():
    idx, valid = crop_indices(360, FULL_SCALE_CROP, 9)
    assert valid == 44 and idx.max() <= 224


def test_random_start_range():
    rng = np.random.default_rng(0)
    starts = {int(crop_sequence(seq_of(50), CropSpec(4, 5, 10), rng)[0].visual[0, 0] / 3)
              for _ in range(300)}
    assert starts == set(range(10))
    starts = {int(crop_sequence(seq_of(3), CropSpec(4, 5, 10), rng)[0].visual[0, 0] / 3)
              for _ in range(100)}
    assert starts == {0, 1, 2}


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 80), st.integers(1, 20), st.integers(1, 6), st.integers(1, 12),
       st.integers(0, 10**6))
def test_crop_properties(length, window, stride, start_range, seed):
    s = seq_of(length)
    cropped, valid = crop_sequence(s, CropSpec(window, stride, start_range),
                                   np.random.default_rng(seed))
    assert 1 <= valid <= window and cropped.length == window
    source = {tuple(r) for r in s.visual}
    assert all(tuple(r) in source for r in cropped.visual)


# ---- batching ------------------------------------------------------------

def batching_corpus(n=10):
    cfg = CorpusConfig(vocab=6, visual_dim=3, audio_dim=2, videos=n, validate=0, t_min=4,
                       t_max=9, seed=1)
    return synthesize(cfg)[0]


def test_batch_partition():
    corpus = batching_corpus(10)
    sizes = [b.features.shape[0] for b in batch_iter(corpus, 4, CropSpec(3, 2, 2), 0, 0)]
    assert sizes == [4, 4, 2]
    seen = np.concatenate([b.index for b in batch_iter(corpus, 4, CropSpec(3, 2, 2), 0, 0)])
    assert sorted(seen.tolist()) == list(range(10))


def test_batches_deterministic():
    corpus = batching_corpus(10)
    a = list(batch_iter(corpus, 4, CropSpec(3, 2, 3), 7, 2))
    b = list(batch_iter(corpus, 4, CropSpec(3, 2, 3), 7, 2))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.features, y.features)
        np.testing.assert_array_equal(x.lens, y.lens)
        np.testing.assert_array_equal(x.targets, y.targets)


def test_batch_targets_follow_labels():
    corpus = batching_corpus(10)
    batch = next(batch_iter(corpus, 10, CropSpec(3, 2, 2), 0, 0))
    for row, i in enumerate(batch.index):
        assert set(np.flatnonzero(batch.targets[row]).tolist()) == set(corpus.labels[i].tolist())


def test_epoch_permutations_differ():
    differ = sum(not np.array_equal(epoch_permutation(3, s, 0), epoch_permutation(3, s, 1))
                 for s in range(100))
    assert differ / 100 >= 0.99


def test_empty_corpus_rejected():
    empty = Corpus(2, 1, 3, [], [])
    with pytest.raises(ValueError):
        list(batch_iter(empty, 4, CropSpec(2), 0, 0))


@pytest.mark.parametrize("seed", range(3))
def test_default_label_imbalance(seed):
    corpus, _ = synthesize(CorpusConfig(seed=seed))
    train = corpus.subset(range(5000))
    rates = label_rates(train.labels, train.vocab)
    assert (rates < 1 / 50).mean() >= 0.8
