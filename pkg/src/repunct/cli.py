"""Command-line entry points wiring the pipeline into reproducible runs.

Subcommands: train-vocab, train-tagger, train, evaluate, restore. Every
command writes a JSON manifest (command, version, seed, resolved config,
sha256 of each input file) before doing any work, so a run can be
replayed bit-exactly from its manifest. All randomness flows from the
single `seed` config key.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import (
    MODEL_KEYS,
    TRAIN_KEYS,
    apply_overrides,
    coerce_config,
    load_config_file,
    require_keys,
)
from .corpus import RESTORE_MARK, PunctLabel, load_corpus
from .errors import (
    ConfigError,
    DataError,
    DimensionMismatch,
    NumericFailure,
    RepunctError,
)
from .metrics import render_report, render_report_kv
from .model import FusionModel, ModelConfig, load_model, save_model
from .postag import (
    load_pos_corpus,
    load_tagger,
    predict_tags,
    save_tagger,
    tag_accuracy,
    tagger_blocks,
    train_tagger,
)
from .sampler import eval_windows
from .serialize import sha256_file
from .subword import align, corpus_stream, load_vocab, save_vocab, train_vocab
from .trainer import TrainConfig, evaluate_stream, train_run

NONTAIL_CHOICES = ("copy", "x")


def _write_manifest(
    path: str, command: str, seed: int, config: dict, inputs: list[str]
) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {p: sha256_file(p) for p in inputs},
    }
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_train_vocab(args) -> int:
    config = {"corpus": args.corpus, "vocab_size": args.vocab_size,
              "out": args.out}
    _write_manifest(args.out + ".manifest.json", "train-vocab", 0, config,
                    [args.corpus])
    corpus = load_corpus(args.corpus)
    vocab = train_vocab(corpus, args.vocab_size)
    save_vocab(vocab, args.out)
    print(f"wrote {len(vocab)} pieces to {args.out}")
    return 0


def cmd_train_tagger(args) -> int:
    config = {
        "corpus": args.corpus, "out": args.out, "b": args.b,
        "epochs": args.epochs, "seed": args.seed,
        "learning_rate": args.learning_rate, "holdout": args.holdout,
    }
    inputs = [args.corpus] + ([args.holdout] if args.holdout else [])
    _write_manifest(args.out + ".manifest.json", "train-tagger", args.seed,
                    config, inputs)
    pos_corpus = load_pos_corpus(args.corpus)
    tagger = train_tagger(
        pos_corpus, b=args.b, epochs=args.epochs, seed=args.seed,
        learning_rate=args.learning_rate,
    )
    save_tagger(tagger, args.out)
    eval_corpus = load_pos_corpus(args.holdout) if args.holdout else pos_corpus
    where = "held-out" if args.holdout else "training"
    acc = tag_accuracy(tagger, eval_corpus)
    print(f"{where} tag accuracy: {100.0 * acc:.2f}%")
    print(f"wrote tagger (b={tagger.b}, e={tagger.e}) to {args.out}")
    return 0


def _word_pos_ids(tagger, words, pos_source: str) -> np.ndarray:
    """Word-level POS ids for stream building; zeros when POS is off."""
    if pos_source == "none":
        return np.zeros(len(words), dtype=np.int16)
    return predict_tags(tagger, words)


def cmd_train(args) -> int:
    raw = load_config_file(args.config)
    cfg = coerce_config(apply_overrides(raw, args.set or []))
    require_keys(cfg, ["train_corpus", "val_corpus", "vocab", "out_dir"])
    pos_source = cfg.get("pos_source", "tagger")
    if pos_source != "none":
        require_keys(cfg, ["tagger"])
    nontail_pos = cfg.get("nontail_pos", "copy")
    if nontail_pos not in NONTAIL_CHOICES:
        raise ConfigError(
            f"nontail_pos must be one of {NONTAIL_CHOICES}, got {nontail_pos!r}"
        )

    vocab = load_vocab(cfg["vocab"])
    train_corpus = load_corpus(cfg["train_corpus"])
    val_corpus = load_corpus(cfg["val_corpus"])

    tagger = None
    if pos_source != "none":
        tagger = load_tagger(cfg["tagger"])
        if "e" in cfg and cfg["e"] != tagger.e:
            raise DimensionMismatch("tagset size e", tagger.e, cfg["e"])
        cfg["e"] = tagger.e
        if pos_source == "tagger":
            if "b" in cfg and cfg["b"] != tagger.b:
                raise DimensionMismatch("POS embedding size b", tagger.b,
                                        cfg["b"])
            cfg["b"] = tagger.b

    model_kwargs = {k: cfg[k] for k in MODEL_KEYS if k in cfg}
    model_config = ModelConfig(
        vocab_size=len(vocab), L=cfg.get("seq_len", 256), **model_kwargs
    )
    train_kwargs = {k: cfg[k] for k in TRAIN_KEYS if k in cfg}
    train_config = TrainConfig(**train_kwargs)

    out_dir = cfg["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    inputs = [args.config, cfg["train_corpus"], cfg["val_corpus"], cfg["vocab"]]
    if tagger is not None:
        inputs.append(cfg["tagger"])
    resolved = dict(cfg)
    resolved["pos_source"] = pos_source
    resolved["nontail_pos"] = nontail_pos
    _write_manifest(os.path.join(out_dir, "manifest.json"), "train",
                    train_config.seed, resolved, inputs)

    train_stream = corpus_stream(
        vocab, train_corpus,
        _word_pos_ids(tagger, train_corpus.words(), pos_source), nontail_pos,
    )
    val_stream = corpus_stream(
        vocab, val_corpus,
        _word_pos_ids(tagger, val_corpus.words(), pos_source), nontail_pos,
    )

    model = FusionModel.init(
        model_config, train_config.seed,
        tagger_W=tagger.W if pos_source == "tagger" else None,
    )

    log_path = os.path.join(out_dir, "train.log")
    with open(log_path, "w", encoding="utf-8") as log_file:
        def log_fn(line: str) -> None:
            print(line)
            log_file.write(line + "\n")
            log_file.flush()

        result = train_run(train_config, model, train_stream, val_stream,
                           log_fn=log_fn)

    ckpt_path = os.path.join(out_dir, "model.rpt")
    save_model(
        ckpt_path, result.model, vocab.pieces,
        tagger_meta=None if tagger is None else {
            "kind": "pos-tagger", "tags": list(tagger.tags),
            "n_buckets": tagger.n_buckets, "b": tagger.b, "e": tagger.e,
        },
        tagger_blocks=None if tagger is None else tagger_blocks(tagger),
        extra_meta={"nontail_pos": nontail_pos,
                    "train_config": train_config.to_dict()},
    )
    if result.best_report is not None:
        report_text = render_report(result.best_report)
        with open(os.path.join(out_dir, "report.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(report_text)
        with open(os.path.join(out_dir, "report.kv"), "w",
                  encoding="utf-8") as fh:
            fh.write(render_report_kv(result.best_report))
    print(f"best val loss {result.state.best_val_loss:.6f}; "
          f"checkpoint at {ckpt_path}")
    return 0


def _load_checkpoint(path: str):
    model, vocab, tagger, meta = load_model(path)
    if model.config.vocab_size != len(vocab):
        raise DimensionMismatch("vocab size", model.config.vocab_size,
                                len(vocab))
    if model.config.pos_source != "none":
        if tagger is None:
            raise DataError(f"{path}: checkpoint needs its tagger block")
        if tagger.e != model.config.e:
            raise DimensionMismatch("tagset size e", model.config.e, tagger.e)
    return model, vocab, tagger, meta


def _stitched_predictions(model: FusionModel, stream, L: int) -> np.ndarray:
    """Per-position argmax labels, each stream position predicted once."""
    n = stream.token_ids.size
    L = min(L, n)
    preds = np.empty(n, dtype=np.int8)
    for w in eval_windows(stream, L):
        p = model.predict(w.token_ids, w.pos_ids)
        preds[w.start + w.fresh_from: w.start + L] = p[w.fresh_from:]
    return preds


def cmd_evaluate(args) -> int:
    config = {"checkpoint": args.checkpoint, "test": args.test,
              "report_kv": args.report_kv, "predictions": args.predictions}
    manifest_path = os.path.join(args.out_dir, "evaluate.manifest.json")
    _write_manifest(manifest_path, "evaluate", 0, config,
                    [args.checkpoint, args.test])
    model, vocab, tagger, meta = _load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.test)
    stream = corpus_stream(
        vocab, corpus,
        _word_pos_ids(tagger, corpus.words(), model.config.pos_source),
        meta.get("nontail_pos", "copy"),
    )
    report, loss = evaluate_stream(model, stream, model.config.L)
    sys.stdout.write(render_report(report))
    print(f"eval_loss\t{loss:.6f}")
    if args.report_kv:
        with open(args.report_kv, "w", encoding="utf-8") as fh:
            fh.write(render_report_kv(report))
    if args.predictions:
        preds = _stitched_predictions(model, stream, model.config.L)
        with open(args.predictions, "w", encoding="utf-8") as fh:
            for g, p, m in zip(stream.labels, preds, stream.position_mask):
                fh.write(f"{PunctLabel(int(g)).name}\t"
                         f"{PunctLabel(int(p)).name}\t{int(m)}\n")
    return 0


def cmd_restore(args) -> int:
    config = {"checkpoint": args.checkpoint, "input": args.input,
              "out": args.out}
    _write_manifest(args.out + ".manifest.json", "restore", 0, config,
                    [args.checkpoint, args.input])
    model, vocab, tagger, meta = _load_checkpoint(args.checkpoint)
    with open(args.input, "r", encoding="utf-8") as fh:
        words = fh.read().split()
    if not words:
        raise DataError(f"{args.input}: no words to restore")
    dummy = [PunctLabel.O] * len(words)
    stream = align(
        vocab, words, dummy,
        _word_pos_ids(tagger, words, model.config.pos_source),
        meta.get("nontail_pos", "copy"),
    )
    if stream.token_ids.size < 2:
        raise DataError("input too short to form a window")
    preds = _stitched_predictions(model, stream, model.config.L)
    tail_preds = preds[stream.position_mask == 1]
    pieces = []
    for word, label in zip(words, tail_preds):
        mark = RESTORE_MARK.get(PunctLabel(int(label)), "")
        pieces.append(word + mark)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(" ".join(pieces) + "\n")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repunct",
        description="Punctuation restoration: vocabulary, tagger, and "
                    "fusion-model training, evaluation, and restoration.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-vocab", help="train a subword vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_vocab)

    p = sub.add_parser("train-tagger", help="train the POS tagger")
    p.add_argument("--corpus", required=True,
                   help="word<TAB>UPOS lines, blank line between sentences")
    p.add_argument("--out", required=True)
    p.add_argument("--b", type=int, default=512,
                   help="hidden size; also the POS embedding size")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--learning-rate", type=float, default=0.5)
    p.add_argument("--holdout", default=None,
                   help="optional corpus for held-out accuracy")
    p.set_defaults(func=cmd_train_tagger)

    p = sub.add_parser("train", help="train the fusion model")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a test corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report-kv", default=None,
                   help="also write machine-readable key=value report")
    p.add_argument("--predictions", default=None,
                   help="also write gold<TAB>pred<TAB>mask lines")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("restore", help="punctuate raw text")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True,
                   help="whitespace-separated unpunctuated words")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_restore)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except RepunctError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
