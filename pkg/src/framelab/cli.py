"""Command-line entry point: gen, train, predict, ensemble, score, gradcheck.

Every subcommand that draws random numbers needs a seed, from ``--seed`` or
the config's ``seed`` key.  Configs are JSON objects and unknown keys are
errors.  Failures exit with status 1 (2 for usage) and one ``error: ...``
line on stderr.
"""
import argparse
import json
import os
import sys

from . import __version__


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage: {message}")


def _load_config(path, allowed=None):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CliError(f"malformed config {path}: line {e.lineno} col {e.colno}: {e.msg}") from None
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must be a JSON object")
    if allowed is not None:
        extra = sorted(set(cfg) - set(allowed))
        if extra:
            raise CliError(f"unknown config keys in {path}: {extra}")
    return cfg


def _seed(args, cfg):
    seed = args.seed if args.seed is not None else cfg.pop("seed", None)
    cfg.pop("seed", None)
    if seed is None:
        raise CliError("a seed is required (--seed or config key 'seed')")
    if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
        raise CliError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def _inputs(args, n_min, n_max=None):
    paths = [p for p in (args.inputs or "").split(",") if p]
    if len(paths) < n_min or (n_max is not None and len(paths) > n_max):
        want = n_min if n_max == n_min else f"{n_min}..{n_max or 'n'}"
        raise CliError(f"--inputs expects {want} comma-separated paths, got {len(paths)}")
    for p in paths:
        if not os.path.isfile(p):
            raise CliError(f"input not found: {p}")
    return paths


def _out(args, default="."):
    out = args.out or default
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen(args):
    from .data.corpus import PRESETS, CorpusConfig, generate_corpus
    cfg = _load_config(args.config)
    seed = _seed(args, cfg)
    name = cfg.pop("preset", "desk")
    if name not in PRESETS:
        raise CliError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    corpus_cfg = CorpusConfig.from_dict({**PRESETS[name], **cfg, "seed": seed})
    paths = generate_corpus(corpus_cfg, _out(args))
    for key, path in paths.items():
        print(f"{key}: {path}")


def cmd_train(args):
    from .data.records import read_records
    from .training import TrainConfig, train_model
    cfg = _load_config(args.config)
    seed = _seed(args, cfg)
    paths = _inputs(args, 1, 2)
    train = read_records(paths[0])
    validation = read_records(paths[1]) if len(paths) > 1 else None
    model = dict(cfg.get("model", {}))
    # dimensions default to the corpus header
    model.setdefault("vocab", train.vocab)
    model.setdefault("visual_dim", train.visual_dim)
    model.setdefault("audio_dim", train.audio_dim)
    cfg["model"] = model
    train_cfg = TrainConfig.from_dict({**cfg, "seed": seed})
    report, _ = train_model(train, train_cfg, validation, out_dir=_out(args))
    print(f"steps: {report.steps}")
    print(f"checkpoint: {report.checkpoint_path}")
    if report.validation_gap is not None:
        print(f"validation_gap: {report.validation_gap:.6f}")


def _starts(text):
    try:
        starts = [int(s) for s in text.split(",") if s != ""]
    except ValueError:
        raise CliError(f"--starts must be comma-separated integers, got {text!r}") from None
    if not starts or min(starts) < 0:
        raise CliError("--starts needs at least one non-negative index")
    return starts


def cmd_predict(args):
    from .data.records import read_records
    from .ensemble import predict_multicrop, write_table
    from .neural.model import Checkpoint
    cfg = _load_config(args.config, {"k", "seed"})
    cfg.pop("seed", None)
    ckpt_path, corpus_path = _inputs(args, 2, 2)
    ckpt = Checkpoint.load(ckpt_path)
    corpus = read_records(corpus_path)
    out = _out(args)
    for t in predict_multicrop(ckpt, corpus, _starts(args.starts), k=cfg.get("k", 20)):
        path = os.path.join(out, f"pred_{t.meta['checkpoint']}_s{t.meta['start']}.csv")
        write_table(t, path)
        print(path)


def cmd_ensemble(args):
    from .ensemble import average_predictions, read_table, write_submission, write_table
    cfg = _load_config(args.config, {"k", "seed"})
    cfg.pop("seed", None)
    tables = [read_table(p) for p in _inputs(args, 1)]
    merged = average_predictions(tables, k=cfg.get("k"))
    out = _out(args)
    write_table(merged, os.path.join(out, "merged.csv"))
    write_submission(merged, os.path.join(out, "submission.csv"))
    print(os.path.join(out, "submission.csv"))


def cmd_score(args):
    from .ensemble import score_submission
    cfg = _load_config(args.config, {"k", "seed"})
    sub, truth = _inputs(args, 2, 2)
    print(f"{score_submission(sub, truth, cfg.get('k', 20)):.6f}")


def cmd_gradcheck(args):
    from .training import GRADCHECK_PRESETS, gradcheck_preset
    cfg = _load_config(args.config, {"seed", "seeds", "probes", "tol"})
    base = args.seed if args.seed is not None else cfg.get("seed", 0)
    failed = 0
    for name in GRADCHECK_PRESETS:
        for s in range(base, base + cfg.get("seeds", 3)):
            rep = gradcheck_preset(name, s, probes=cfg.get("probes", 200), tol=cfg.get("tol", 1e-5))
            failed += not rep.passed
            print(f"{name} seed={s} {rep}")
    if failed:
        raise CliError(f"{failed} gradient check(s) failed")


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "predict": cmd_predict,
            "ensemble": cmd_ensemble, "score": cmd_score, "gradcheck": cmd_gradcheck}


def build_parser():
    p = _Parser(prog="framelab", description="frame-sequence multi-label toolkit")
    p.add_argument("--version", action="version", version=f"framelab {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--inputs", help="comma-separated input paths")
    p.add_argument("--starts", default="0,1,2,3,4")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2 if str(e).startswith("usage:") else 1
    except (ValueError, OSError, KeyError, RuntimeError) as e:
        msg = " ".join(str(e).split())
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
