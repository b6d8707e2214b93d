"""Command-line front door: preprocess, train, evaluate, predict.

Every option of the experiment configuration is exposed as a flag with
the same name (hyphen or underscore spelling both accepted); a config
file given with --config supplies defaults and explicit flags win. Each
run logs the fully resolved configuration to stderr before doing
anything, and that printout is itself valid config-file syntax.

Exit codes: 0 success, 1 usage or configuration error, 2 data or file
error, 3 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields

from . import engine, metrics
from .engine import ExperimentConfig, parse_config_text, parse_config_value
from .errors import ConfigError, DataError, DivergenceError
from .model import forward
from .pipeline import PipelineConfig, Vocabulary, clean, load_stopwords, make_document

_CONFIG_KEYS = [f.name for f in fields(ExperimentConfig)]


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; this project reserves
    # 2 for data problems, so usage trouble becomes a ConfigError instead.
    def error(self, message):
        raise ConfigError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    for name in _CONFIG_KEYS:
        hyphen = "--" + name.replace("_", "-")
        if hyphen == "--" + name:
            p.add_argument(hyphen, dest=name, metavar="V", default=None)
        else:
            p.add_argument(hyphen, "--" + name, dest=name, metavar="V", default=None)


def _merged_config(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read(), source=args.config))
    for name in _CONFIG_KEYS:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = parse_config_value(name, raw)
    return ExperimentConfig.from_dict(values)


def _print_resolved(cfg: ExperimentConfig, vocab_size=None) -> None:
    _log("resolved configuration:")
    for line in cfg.describe(vocab_size).splitlines():
        _log("  " + line)


def _out_path(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _cmd_preprocess(args) -> int:
    cfg = _merged_config(args)
    stop = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    pipe = PipelineConfig(vocab_size=cfg.vocab_size, max_len=cfg.max_len, stopwords=stop)
    vocab = Vocabulary.load(args.vocab) if args.vocab else None
    _print_resolved(cfg, vocab.size if vocab else None)
    ds, vocab = engine.load_csv_dataset(args.data, args.text_column, args.label_column,
                                        pipe, vocab=vocab)
    if args.train_fraction is not None:
        ds = engine.split(ds, train_fraction=args.train_fraction, seed=cfg.seed)
    elif args.train_count is not None or args.test_count is not None:
        ds = engine.split(ds, train_count=args.train_count, test_count=args.test_count,
                          seed=cfg.seed)
    stats = engine.corpus_stats(ds)
    print(f"documents: {stats['documents']}")
    for name, n in stats["classes"].items():
        print(f"class {name}: {n}")
    print(f"avg_length: {stats['avg_length']:.2f}")
    print(f"oov_rate: {stats['oov_rate']:.4f}")
    print(f"truncated: {stats['truncated']}")
    if ds.train_idx is not None:
        print(f"split: {ds.train_idx.size} train / {ds.test_idx.size} test")
    vocab_path = _out_path(args, "vocab.tsv")
    data_path = _out_path(args, "dataset.sqt")
    vocab.save(vocab_path)
    engine.save_dataset(data_path, ds, vocab, pipe)
    _log(f"wrote {vocab_path} ({vocab.size} entries)")
    _log(f"wrote {data_path}")
    return 0


def _cmd_train(args) -> int:
    ds, vocab, pipe = engine.load_dataset(args.data)
    cfg = _merged_config(args)
    _print_resolved(cfg, vocab.size)
    if args.train_fraction is not None or ds.train_idx is None:
        frac = args.train_fraction if args.train_fraction is not None else 0.5
        _log(f"splitting {frac:g} train / {1 - frac:g} test with seed {cfg.seed}")
        ds = engine.split(ds, train_fraction=frac, seed=cfg.seed)
    log = None if args.quiet else _log
    model, curve = engine.train(cfg, ds, vocab, log=log)
    model_path = _out_path(args, "model.sqt")
    curve_path = _out_path(args, "curve.csv")
    metrics_path = _out_path(args, "metrics.txt")
    engine.save_checkpoint(model_path, model, cfg, ds.class_names, vocab, pipe)
    engine.emit_learning_curve(curve, curve_path)
    report = engine.evaluate(model, ds, "test", batch_size=cfg.batch_size)
    metrics.write_metrics(report, metrics_path, ds.class_names)
    print(metrics.format_report(report, ds.class_names), end="")
    _log(f"wrote {model_path}")
    _log(f"wrote {curve_path}")
    _log(f"wrote {metrics_path}")
    return 0


def _cmd_evaluate(args) -> int:
    ckpt = engine.load_checkpoint(args.model)
    ds, _, _ = engine.load_dataset(args.data)
    _print_resolved(ckpt.config, ckpt.vocab.size if ckpt.vocab else None)
    if list(ds.class_names) != list(ckpt.class_names):
        raise DataError(
            f"dataset classes {ds.class_names} do not match the checkpoint's "
            f"{ckpt.class_names}")
    which = args.split
    if which is None:
        which = "test" if ds.train_idx is not None else "all"
        _log(f"evaluating the {which} split")
    report = engine.evaluate(ckpt.model, ds, which)
    print(metrics.format_report(report, ds.class_names), end="")
    path = _out_path(args, "eval_metrics.txt")
    metrics.write_metrics(report, path, ds.class_names)
    _log(f"wrote {path}")
    return 0


def _cmd_predict(args) -> int:
    ckpt = engine.load_checkpoint(args.model)
    if ckpt.vocab is None or ckpt.pipeline is None:
        raise DataError(f"{args.model}: checkpoint has no embedded vocabulary, "
                        "so raw text cannot be encoded")
    _print_resolved(ckpt.config, ckpt.vocab.size)
    model = ckpt.model
    names = ckpt.class_names
    for line in sys.stdin:
        tokens = clean(line.rstrip("\n"), ckpt.pipeline)
        doc = make_document(tokens, 0, ckpt.vocab, ckpt.pipeline)
        probs, _ = forward(model, doc.indices)
        if model.head == "sigmoid":
            cls = 1 if probs >= 0.5 else 0
            prob = float(probs)
        else:
            cls = int(probs.argmax())
            prob = float(probs[cls])
        print(f"{names[cls]}\t{prob:.6f}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="seqtext",
                     description="Recurrent text classifiers: preprocess, train, "
                                 "evaluate, predict.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    pre = sub.add_parser("preprocess", help="encode a CSV corpus")
    pre.add_argument("--data", required=True, help="CSV file with header row")
    pre.add_argument("--text-column", default="text")
    pre.add_argument("--label-column", default="label")
    pre.add_argument("--vocab", help="reuse an existing vocabulary file")
    pre.add_argument("--stopwords", help="file with one stopword per line")
    pre.add_argument("--train-fraction", type=float)
    pre.add_argument("--train-count", type=int)
    pre.add_argument("--test-count", type=int)

    tr = sub.add_parser("train", help="fit a model on an encoded dataset")
    tr.add_argument("--data", required=True, help="encoded dataset artifact")
    tr.add_argument("--train-fraction", type=float,
                    help="resplit before training (default: keep the stored split, "
                         "or 0.5 when none exists)")
    tr.add_argument("--quiet", action="store_true", help="suppress per-epoch progress")

    ev = sub.add_parser("evaluate", help="score a checkpoint on an encoded dataset")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=("train", "test", "all"))

    pr = sub.add_parser("predict", help="classify raw text lines from standard input")
    pr.add_argument("--model", required=True)

    for p in (pre, tr):
        p.add_argument("--config", help="key = value option file")
        _add_config_flags(p)
    for p in (pre, tr, ev):
        p.add_argument("--out-dir", default=".", help="where artifacts are written")
    return parser


def _main(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise ConfigError("a command is required: preprocess, train, evaluate or predict")
    handler = {
        "preprocess": _cmd_preprocess,
        "train": _cmd_train,
        "evaluate": _cmd_evaluate,
        "predict": _cmd_predict,
    }[args.command]
    return handler(args)


def entry(argv=None) -> int:
    try:
        return _main(sys.argv[1:] if argv is None else list(argv))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(entry())
