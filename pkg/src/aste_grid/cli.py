"""Command-line entry point.

Machine-readable output is line-delimited JSON on stdout; diagnostics go to
stderr.  Exit codes: 0 success, 1 usage, 2 data or validation error,
3 internal error (including a failed gradient check).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .corpus import (DatasetSplit, dataset_stats, dumps, from_record, generate_synthetic,
                     load_sentences, save_sentences, validate)
from .errors import AsteError
from .grid import TagGrid, decode_grid, encode_grid
from .train import (TrainConfig, ablation, evaluate, format_ablation, gradcheck_model,
                    gradients, grad_check_report, load_checkpoint, load_embeddings, predict,
                    save_checkpoint, toy_sentence, train_loop)

log = logging.getLogger("aste_grid")

CONFIG_ENV = "ASTE_GRID_CONFIG"
GRADCHECK_TOL = 1e-4

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _emit(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj, separators=(",", ":"), ensure_ascii=False))
    out.write("\n")


def _triplets(triplets):
    return [{"aspect": [t.aspect.start, t.aspect.end],
             "opinion": [t.opinion.start, t.opinion.end],
             "sentiment": t.sentiment} for t in triplets]


def _metrics(m):
    return {"precision": m.precision, "recall": m.recall, "f1": m.f1,
            "predicted": m.predicted, "gold": m.gold, "correct": m.correct}


# -- configuration --------------------------------------------------------------

_CONFIG_FLAGS = {
    "lr": "lr", "dropout": "dropout", "batch_size": "batch_size", "epochs": "max_epochs",
    "patience": "patience", "seed": "seed", "hidden": "hidden", "d_node": "d_node",
    "h_g": "h_g", "toy_embed_dim": "toy_embed_dim", "dtype": "dtype",
}


def _read_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON config ({exc})") from None
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(TrainConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        log.warning("ignoring unknown config keys: %s", ", ".join(unknown))
    return {k: v for k, v in doc.items() if k in known}


def resolve_config(args):
    """Defaults, then the JSON config file, then explicit flags."""
    values = asdict(TrainConfig())
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        values.update(_read_config_file(path))
    for flag, key in _CONFIG_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return values


def _parse_choices(text, allowed, cast, name):
    items = [cast(x.strip()) for x in str(text).split(",") if x.strip()]
    if not items:
        raise UsageError(f"--{name} needs at least one value")
    for x in items:
        if x not in allowed:
            raise UsageError(f"--{name}: {x!r} is not one of {sorted(allowed)}")
    return items


def _aggregators(text):
    if text == "all":
        return ["lstm", "mean"]
    return _parse_choices(text, {"lstm", "mean"}, str, "aggregator")


def _layers(text):
    try:
        return _parse_choices(text, {1, 2, 3}, int, "layers")
    except ValueError:
        raise UsageError(f"--layers: expected integers, got {text!r}") from None


def _frozen_table(args):
    if not (args.embeddings_general or args.embeddings_domain):
        return None
    table, sources = load_embeddings(args.embeddings_general, args.embeddings_domain,
                                     args.general_dim, args.domain_dim)
    return table, sources


def _load(path, what):
    if path is None:
        return []
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return load_sentences(p)


# -- commands -------------------------------------------------------------------

def cmd_synth(args):
    sentences = generate_synthetic(args.seed, args.count)
    if args.out:
        save_sentences(sentences, args.out)
    else:
        for s in sentences:
            sys.stdout.write(dumps(s) + "\n")
    stats = asdict(dataset_stats(sentences))
    print(json.dumps(stats), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_stats(args):
    for path in args.paths:
        sentences = _load(path, "dataset")
        _emit({"path": str(path), **asdict(dataset_stats(sentences))})
    return EXIT_OK


def _train_one(config, split, frozen, sources, checkpoint, history_path):
    def report(rec):
        log.info("epoch %d train_loss %.4f val_loss %.4f val_f1 %.4f", rec["epoch"],
                 rec["train_loss"], rec["val_loss"], rec["val_f1"])

    model, history = train_loop(config, split, frozen=frozen, on_epoch=report)
    model.sources = dict(sources)
    if checkpoint:
        save_checkpoint(checkpoint, model, config)
    if history_path:
        with open(history_path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in history:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    return model, history


def cmd_train(args):
    values = resolve_config(args)
    aggregators = _aggregators(args.aggregator) if args.aggregator else [values["aggregator"]]
    layer_counts = _layers(args.layers) if args.layers else [values["layers"]]
    train = _load(args.train, "train")
    val = _load(args.val, "val")
    test = _load(args.test, "test")
    split = DatasetSplit(train, val, test)
    frozen, sources = _frozen_table(args) or (None, {})

    if len(aggregators) == 1 and len(layer_counts) == 1:
        values.update(aggregator=aggregators[0], layers=layer_counts[0])
        config = TrainConfig.from_dict(values)
        history_path = args.history
        if history_path is None and args.checkpoint:
            history_path = str(Path(args.checkpoint).with_suffix(".history.jsonl"))
        model, history = _train_one(config, split, frozen, sources, args.checkpoint,
                                    history_path)
        best = max(history, key=lambda r: (r["val_f1"], -r["val_loss"]))
        out = {"epochs": len(history), "best_epoch": best["epoch"]}
        for name in ("train", "val", "test"):
            sentences = getattr(split, name)
            if sentences:
                out[name] = _metrics(evaluate(model, sentences))
        _emit(out)
        return EXIT_OK

    config = TrainConfig.from_dict(values)

    def on_row(row, model, history):
        if args.checkpoint:
            stem = Path(args.checkpoint)
            path = stem.with_name(f"{stem.stem}.{row['aggregator']}-L{row['layers']}{stem.suffix}")
            model.sources = dict(sources)
            save_checkpoint(path, model, TrainConfig.from_dict(
                {**asdict(config), "aggregator": row["aggregator"], "layers": row["layers"]}))
        _emit(row)
        sys.stdout.flush()

    rows = ablation(config, split, aggregators, layer_counts, frozen=frozen, on_row=on_row)
    table = format_ablation(rows)
    print(table, file=sys.stderr)
    if args.table:
        Path(args.table).write_text(table + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_eval(args):
    model, _ = load_checkpoint(args.checkpoint)
    sentences = _load(args.test, "dataset")
    if args.dump:
        for k, s in enumerate(sentences):
            _emit({"index": k, "triplets": _triplets(predict(model, s))})
    _emit(_metrics(evaluate(model, sentences)))
    return EXIT_OK


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout


def cmd_encode(args):
    sentences = _load(args.input, "input")
    out = _open_out(args.out)
    try:
        for s in sentences:
            out.write(encode_grid(s).to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_decode(args):
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    out = _open_out(args.out)
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    grid = TagGrid.from_json(line)
                except (ValueError, KeyError, TypeError, IndexError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad grid ({exc})") from None
                _emit({"triplets": _triplets(decode_grid(grid))}, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_validate(args):
    bad = 0
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            problems = validate(from_record(json.loads(line)))
            if problems:
                bad += 1
                _emit({"line": lineno, "violations": problems})
    return EXIT_DATA if bad else EXIT_OK


def cmd_gradcheck(args):
    s = toy_sentence()
    ok = True
    for agg in _aggregators(args.aggregator):
        for layers in _layers(args.layers):
            config = TrainConfig(aggregator=agg, layers=layers, toy_embed_dim=16, hidden=8,
                                 d_node=16, h_g=8, seed=args.seed)
            model = gradcheck_model(config, list(s.tokens), seed=args.seed)
            analytic = None
            if args.corrupt_gradient is not None:
                analytic = gradients(model, [s], mode="eval")
                analytic = {k: v * args.corrupt_gradient for k, v in analytic.items()}
            rep = grad_check_report(model, s, eps=args.eps, sample_size=args.samples,
                                    seed=args.seed, analytic=analytic)
            passed = rep["max_error"] < GRADCHECK_TOL
            ok &= passed
            _emit({"aggregator": agg, "layers": layers, "max_error": rep["max_error"],
                   "checked": rep["checked"], "skipped": rep["skipped"], "passed": passed})
    return EXIT_OK if ok else EXIT_INTERNAL


# -- parser ---------------------------------------------------------------------

def _add_model_flags(p):
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int, help="maximum number of epochs")
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--hidden", type=int, help="BiLSTM cell size per direction")
    p.add_argument("--d-node", dest="d_node", type=int, help="GNN output size")
    p.add_argument("--h-g", dest="h_g", type=int, help="refined feature size")
    p.add_argument("--toy-embed-dim", dest="toy_embed_dim", type=int)
    p.add_argument("--dtype", choices=["float64", "float32"])
    p.add_argument("--layers", help="GNN layer count, or a comma list for an ablation")
    p.add_argument("--aggregator", help="lstm, mean, all, or a comma list")
    p.add_argument("--embeddings-general", help="general-domain text embedding file")
    p.add_argument("--embeddings-domain", help="domain-specific text embedding file")
    p.add_argument("--general-dim", type=int, default=300)
    p.add_argument("--domain-dim", type=int, default=100)


def build_parser():
    parser = _Parser(prog="aste-grid", description="Grid-tagging triplet extraction toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic corpus as JSON lines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="sentence and triplet counts per file")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", help="report invalid records in a dataset file")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a model, or an ablation grid")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--test")
    p.add_argument("--checkpoint", help="where to write the best model")
    p.add_argument("--history", help="per-epoch JSON lines (default: next to the checkpoint)")
    p.add_argument("--table", help="also write the ablation table to this file")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True, help="dataset file to score")
    p.add_argument("--dump", action="store_true", help="print predicted triplets per sentence")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("encode", help="dataset file to grid lines")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="grid lines to triplet lines")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("gradcheck", help="finite-difference check of the exact gradients")
    p.add_argument("--aggregator", default="all")
    p.add_argument("--layers", default="3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--corrupt-gradient", dest="corrupt_gradient", type=float,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"aste-grid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AsteError, FileNotFoundError, IsADirectoryError, PermissionError, ValueError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"aste-grid: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("internal error")
        print(f"aste-grid: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
