"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the summary block
at the end of the pytest output lists every criterion.  Criteria 3-7 train
about 25 models on the desk corpus and take most of the runtime.
"""
import functools
import hashlib
import json
import statistics
import struct

import numpy as np
import pytest

from framelab.cli import main as cli_main
from framelab.data import (CorpusConfig, RecordFormatError, decode_records, encode_records,
                           noise_stats, preset, split, synthesize)
from framelab.ensemble import (SubmissionError, average_predictions, format_table, parse_table,
                               predict_multicrop, score_table)
from framelab.metrics import gap, gap_oracle, topk_sparsify
from framelab.neural import ModelSpec
from framelab.training import (BASELINE_TRAIN, GRADCHECK_PRESETS, TrainConfig, gradcheck_preset,
                               train_model)

SEEDS = range(5)
STARTS = range(5)


# ---- shared desk-scale runs ------------------------------------------------

@functools.lru_cache(maxsize=None)
def desk_split(seed):
    cfg = CorpusConfig(seed=seed)
    corpus, _ = synthesize(cfg)
    return split(corpus, cfg.validate)


def model(**kw):
    cfg = CorpusConfig()
    return ModelSpec(**{"vocab": cfg.vocab, "visual_dim": cfg.visual_dim,
                        "audio_dim": cfg.audio_dim, "head": "moe", **kw})


RUNS = {
    # mean-pool + LR baseline, trained to its plateau
    "baseline": lambda: dict(model=model(encoder="mean_pool", head="lr"), **BASELINE_TRAIN),
    "lstm_moe": lambda: dict(model=model()),
    "lstm_moe_visual": lambda: dict(model=model(use_audio=False)),
    "lstm_moe_full": lambda: dict(model=model(), crop="full"),
    "ln_lstm_moe": lambda: dict(model=model(encoder="ln_lstm")),
}


@functools.lru_cache(maxsize=None)
def trained(name, seed):
    train, val = desk_split(seed)
    report, ckpt = train_model(train, TrainConfig(seed=seed, **RUNS[name]()), validation=val)
    return report, ckpt


def val_gap(name, seed):
    return trained(name, seed)[0].validation_gap


def fmt(values):
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


# ---- criteria ----------------------------------------------------------------

def test_c01_metric_oracle(record_criterion):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for i in range(1000):
        n, vocab, k = (int(rng.integers(1, 21)), int(rng.integers(1, 31)), int(rng.integers(1, 21)))
        preds, pos = [], []
        for _ in range(n):
            conf = rng.random(vocab)
            if i % 2:
                conf = np.round(conf * 4) / 4
            preds.append(topk_sparsify(conf, k))
            pos.append(set(np.flatnonzero(rng.random(vocab) < 0.2).tolist()))
        pos[0].add(0)
        worst = max(worst, abs(gap(preds, pos, k) - gap_oracle(preds, pos, k)))
    positives = [{1, 4}, {0}, {2, 3, 7}]
    perfect = gap([[(l, 1.0) for l in sorted(p)] for p in positives], positives)
    example = gap([[(1, 0.9), (3, 0.8), (2, 0.6)], [(4, 0.7), (1, 0.3), (0, 0.2)]],
                  [{1, 2}, {4}])
    ok = worst <= 1e-12 and perfect == 1.0 and abs(example - 29 / 36) <= 1e-12
    assert record_criterion(1, "metric oracle", ok,
                            f"max|gap-oracle|={worst:.1e}, perfect={perfect}, "
                            f"example={example:.12f}")


def test_c02_gradient_suite(record_criterion):
    reports = {(n, s): gradcheck_preset(n, s, probes=200, tol=1e-5)
               for n in GRADCHECK_PRESETS for s in range(3)}
    worst = max(reports.items(), key=lambda kv: kv[1].max_rel_error)
    ok = len(GRADCHECK_PRESETS) == 6 and all(r.passed and r.probes >= 200
                                             for r in reports.values())
    assert record_criterion(2, "gradient suite (6 presets x 3 seeds)", ok,
                            f"worst {worst[0][0]} seed {worst[0][1]}: "
                            f"{worst[1].max_rel_error:.2e}")


@pytest.mark.slow
def test_c03_lstm_moe_beats_baseline(record_criterion):
    base = [val_gap("baseline", s) for s in SEEDS]
    lstm = [val_gap("lstm_moe", s) for s in SEEDS]
    wins = sum(l >= b + 0.03 for l, b in zip(lstm, base))
    assert record_criterion(3, "LSTM+MoE >= baseline + 0.03 in >= 4/5 seeds", wins >= 4,
                            f"{wins}/5; lstm={fmt(lstm)} baseline={fmt(base)}")


@pytest.mark.slow
def test_c04_audio_helps(record_criterion):
    both = [val_gap("lstm_moe", s) for s in SEEDS]
    visual = [val_gap("lstm_moe_visual", s) for s in SEEDS]
    wins = sum(a >= v for a, v in zip(both, visual))
    assert record_criterion(4, "visual+audio >= visual-only in >= 4/5 seeds", wins >= 4,
                            f"{wins}/5; av={fmt(both)} visual={fmt(visual)}")


@pytest.mark.slow
def test_c05_crop_matches_full(record_criterion):
    crop = [val_gap("lstm_moe", s) for s in SEEDS]
    full = [val_gap("lstm_moe_full", s) for s in SEEDS]
    close = sum(abs(c - f) <= 0.02 for c, f in zip(crop, full))
    assert record_criterion(5, "|crop - full| <= 0.02 in >= 4/5 seeds", close >= 4,
                            f"{close}/5; crop={fmt(crop)} full={fmt(full)}")


@pytest.mark.slow
def test_c06_ensemble_gain(record_criterion):
    at_least, above, detail = 0, 0, []
    for s in SEEDS:
        _, val = desk_split(s)
        truth = {vid: lab.tolist() for vid, lab in zip(val.ids, val.labels)}
        sources = []
        for name in ("lstm_moe", "ln_lstm_moe"):
            sources += predict_multicrop(trained(name, s)[1], val, STARTS, tag=name)
        median = statistics.median(score_table(t, truth) for t in sources)
        merged = score_table(average_predictions(sources), truth)
        at_least += merged >= median
        above += merged > median
        detail.append(f"{merged:.4f}/{median:.4f}")
    ok = at_least == 5 and above >= 4
    assert record_criterion(6, "10-source ensemble >= median source 5/5, > in >= 4/5", ok,
                            f">= {at_least}/5, > {above}/5; ensemble/median " + " ".join(detail))


@pytest.mark.slow
def test_c07_layer_norm_converges_faster(record_criterion):
    ln, plain = [], []
    for s in SEEDS:
        ln.append(trained("ln_lstm_moe", s)[0].first_step_reaching(0.5) or float("inf"))
        plain.append(trained("lstm_moe", s)[0].first_step_reaching(0.5) or float("inf"))
    wins = sum(a <= b for a, b in zip(ln, plain))
    assert record_criterion(7, "LN-LSTM reaches minibatch GAP 0.5 no later, >= 4/5 seeds",
                            wins >= 4, f"{wins}/5; ln steps={ln} plain steps={plain}")


def _tree(path):
    return {str(p.relative_to(path)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_c08_cli_determinism(record_criterion, tmp_path, capsys):
    # full recipe on desk defaults, twice
    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(json.dumps({"model": {"head": "moe"}}))
    scores, trees = [], []
    for run in ("a", "b"):
        root = tmp_path / run
        steps = [
            ["gen", "--seed", "7", "--out", f"{root}/corpus"],
            ["train", "--config", str(train_cfg), "--seed", "7", "--out", f"{root}/model",
             "--inputs", f"{root}/corpus/train.frv,{root}/corpus/validate.frv"],
            ["predict", "--inputs", f"{root}/model/checkpoint.fck,{root}/corpus/validate.frv",
             "--starts", "0,1,2,3,4", "--out", f"{root}/preds"],
        ]
        for argv in steps:
            assert cli_main(argv) == 0
        tables = ",".join(str(p) for p in sorted((root / "preds").iterdir()))
        assert cli_main(["ensemble", "--inputs", tables, "--out", f"{root}/ens"]) == 0
        capsys.readouterr()
        assert cli_main(["score", "--inputs",
                         f"{root}/ens/submission.csv,{root}/corpus/truth.csv"]) == 0
        scores.append(capsys.readouterr().out)
        trees.append(_tree(root))
    assert cli_main(["gradcheck"]) == 0
    first = capsys.readouterr().out
    assert cli_main(["gradcheck"]) == 0
    same_gradcheck = capsys.readouterr().out == first
    value = float(scores[0])
    ok = trees[0] == trees[1] and scores[0] == scores[1] and same_gradcheck and 0 < value < 1
    assert record_criterion(8, "CLI re-runs are byte-identical", ok,
                            f"{len(trees[0])} artifacts hashed, recipe GAP {value:.6f}")


def test_c09_format_fidelity(record_criterion):
    cfg = CorpusConfig(seed=3, videos=300, validate=0)
    corpus, _ = synthesize(cfg)
    raw = encode_records(corpus)
    back = decode_records(raw)
    frv_ok = encode_records(back) == raw and all(
        np.array_equal(a.frames, b.frames) for a, b in zip(corpus.videos, back.videos)) and all(
        np.array_equal(a, b) for a, b in zip(corpus.labels, back.labels))

    rng = np.random.default_rng(0)
    table = average_predictions([predict_like(rng, corpus.ids, cfg.vocab) for _ in range(3)])
    text = format_table(table)
    csv_ok = format_table(parse_table(text)) == text

    diagnostics = []
    for mutate in (lambda b: b[:-9], lambda b: b"FRV2" + b[4:],
                   lambda b: b[:8] + struct.pack("<I", 0) + b[12:]):
        try:
            decode_records(mutate(raw))
            diagnostics.append(None)
        except RecordFormatError as e:
            diagnostics.append(str(e))
    lines = text.splitlines()
    lines[5] = lines[5].rsplit(" ", 2)[0]  # drop one pair
    try:
        parse_table("\n".join(lines), k=table.k)
        diagnostics.append(None)
    except SubmissionError as e:
        diagnostics.append(str(e))
    located = all(d is not None and ("byte" in d or ":6:" in d) for d in diagnostics)
    ok = frv_ok and csv_ok and located
    assert record_criterion(9, "FRV1 and submission round-trips exact, corruption located", ok,
                            "; ".join(d or "NOT REJECTED" for d in diagnostics))


def predict_like(rng, ids, vocab, k=20):
    from framelab.ensemble import PredictionTable
    from framelab.metrics import topk_batch
    labels, confs = topk_batch(rng.random((len(ids), vocab)), k)
    return PredictionTable(list(ids), labels, confs)


def test_c10_noise_knobs(record_criterion):
    results = []
    for s in SEEDS:
        corpus, _ = synthesize(preset("paper-noise", seed=s, videos=2000, validate=0))
        results.append(noise_stats(corpus.labels, corpus.clean))
    ok = all(abs(p - 0.788) <= 0.02 and abs(r - 0.145) <= 0.02 for p, r in results)
    assert record_criterion(10, "paper-noise preset precision/recall within 0.02", ok,
                            " ".join(f"({p:.3f},{r:.3f})" for p, r in results))
