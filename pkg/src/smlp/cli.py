"""Command-line entry point: ``smlp <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import network as nn
from .config import ConfigError, RunConfig, load_config
from .datamodel import DataFormatError, EventClass, LabeledDataset, read_dataset, write_dataset
from .features import FeatureError, Gazetteer, apply_normalizer, extract_features
from .harness import DivergenceError, compare_models, compare_optimizers, evaluate, prepare, split, train
from .ingest import build_instances, parse_query_log, read_documents, read_instances, read_mapping, write_instances
from .synthetic import generate_synthetic

log = logging.getLogger("smlp")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 0, 2, 3, 4


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _config(args) -> RunConfig:
    overrides = dict(kv.split("=", 1) for kv in args.set or [])
    if args.seed is not None:
        overrides = {"seed": str(args.seed), **overrides}
    return load_config(args.config, overrides)


def _write_metrics(rows, path: Path) -> None:
    """rows: (model name, EvalReport)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "class", "precision", "AP", "MAP", "macro_precision"])
        for name, rep in rows:
            for c in EventClass:
                w.writerow([name, c.label, _fmt(rep.precision[c]), _fmt(rep.average_precision[c]),
                            _fmt(rep.map), _fmt(rep.macro_precision)])


def _write_confusion(rep, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true/predicted"] + [c.label for c in EventClass])
        for c in EventClass:
            w.writerow([c.label] + [int(v) for v in rep.confusion[c]])


def _write_curve(losses, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "loss"])
        for i, loss in enumerate(losses, 1):
            w.writerow([i, repr(float(loss))])


# --- subcommands ---------------------------------------------------------

def cmd_generate(args, cfg: RunConfig) -> None:
    items = generate_synthetic(cfg.synthetic)
    write_instances(items, args.out)
    log.info("wrote %d instances to %s", len(items), args.out)


def cmd_ingest(args, cfg: RunConfig) -> None:
    qlog = parse_query_log(args.log)
    records = list(qlog)
    items = build_instances(records, read_mapping(args.mapping), read_documents(args.documents))
    write_instances(items, args.out)
    log.info("wrote %d instances (%d malformed log lines skipped)", len(items), qlog.skipped)


def cmd_extract(args, cfg: RunConfig) -> None:
    gz = Gazetteer.from_dir(args.gazetteer) if args.gazetteer else Gazetteer.default()
    items = read_instances(args.instances)
    if any(label is None for _, label in items):
        raise DataFormatError(f"{args.instances}: unlabelled instances cannot form a dataset")
    X = np.array([extract_features(inst, gz, cfg.features) for inst, _ in items]).reshape(-1, 28)
    y = np.array([int(label) for _, label in items], dtype=np.int64)
    write_dataset(LabeledDataset(X, y, provenance=str(args.instances)), args.out)
    log.info("wrote %d feature vectors to %s", len(y), args.out)


def cmd_split(args, cfg: RunConfig) -> None:
    ds = read_dataset(args.dataset)
    manifest = split(ds, cfg.split_seed, stratified=cfg.stratified)
    Path(args.out).write_text(manifest.to_text(), encoding="utf-8")


def cmd_train(args, cfg: RunConfig) -> None:
    ds = read_dataset(args.dataset)
    data = prepare(ds, cfg.split_seed, cfg.stratified)
    model = nn.init_model(cfg.units, cfg.train.seed)
    result = train(model, cfg.optim, data.X_fit, data.y_fit, data.X_val, data.y_val, cfg.train)
    best = result.best_model
    best.feature_stats = data.stats
    nn.save_checkpoint(best, args.checkpoint)
    _write_curve(result.curve.losses, Path(args.curve))
    if args.val_curve:
        _write_curve(result.val_losses, Path(args.val_curve))
    log.info("best validation epoch %d; checkpoint %s", result.best_epoch, args.checkpoint)


def cmd_evaluate(args, cfg: RunConfig) -> None:
    model = nn.load_checkpoint(args.checkpoint)
    ds = read_dataset(args.dataset)
    if args.whole:
        X, y = ds.X, ds.y
    else:
        test = split(ds, cfg.split_seed, stratified=cfg.stratified).test
        X, y = ds.X[test], ds.y[test]
    if model.feature_stats is not None:
        X = apply_normalizer(X, model.feature_stats)
    rep = evaluate(model, X, y)
    _write_metrics([(Path(args.checkpoint).stem, rep)], Path(args.metrics))
    _write_confusion(rep, Path(args.confusion))
    print(f"MAP {rep.map:.4f}  macro precision {rep.macro_precision:.4f}  accuracy {rep.accuracy:.4f}")


def cmd_compare_optimizers(args, cfg: RunConfig) -> None:
    from dataclasses import replace

    ds = read_dataset(args.dataset)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = [replace(cfg.optim, method=m) for m in cfg.compare_methods]
    config = replace(cfg.train, epochs=cfg.compare_epochs)
    curves = compare_optimizers(ds, cfg.fractions, specs, cfg.units, config, cfg.split_seed)
    with open(out / "final_losses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fraction", "method", "final_loss"])
        for c in curves:
            _write_curve(c.losses, out / f"curve_{round(c.fraction * 100):02d}_{c.method}.csv")
            w.writerow([f"{c.fraction:.2f}", c.method, repr(c.final_loss)])


def cmd_compare_models(args, cfg: RunConfig) -> None:
    ds = read_dataset(args.dataset)
    result = compare_models(ds, cfg.split_seed, cfg.units, cfg.mlp_units, cfg.optim, cfg.train)
    _write_metrics(list(zip(result.names, result.reports)), Path(args.out))
    for name, rep in zip(result.names, result.reports):
        print(f"{name:<10} MAP {rep.map:.4f}  macro precision {rep.macro_precision:.4f}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smlp", description="Event-query classification with stacked MLPs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int, help="override every seed (data, split, training)")
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "write a labelled synthetic instance file")
    p.add_argument("--out", required=True)
    p = add("ingest", cmd_ingest, "assemble instances from an AOL-format log")
    p.add_argument("--log", required=True)
    p.add_argument("--documents", required=True, help="date<TAB>text document index")
    p.add_argument("--mapping", required=True, help="query<TAB>event_date<TAB>hitting_time<TAB>label")
    p.add_argument("--out", required=True)
    p = add("extract", cmd_extract, "turn an instance file into a feature dataset")
    p.add_argument("--instances", required=True)
    p.add_argument("--gazetteer", help="directory with persons/locations/organizations .txt")
    p.add_argument("--out", required=True)
    p = add("split", cmd_split, "write a fit/validation/test manifest")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p = add("train", cmd_train, "train a stack and save the best-validation checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--curve", required=True, help="training-loss CSV (iteration,loss)")
    p.add_argument("--val-curve", help="optional validation-loss CSV")
    p = add("evaluate", cmd_evaluate, "score a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--metrics", required=True)
    p.add_argument("--confusion", required=True)
    p.add_argument("--whole", action="store_true", help="evaluate on every instance, not the test split")
    p = add("compare-optimizers", cmd_compare_optimizers, "loss curves for each method and training fraction")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", required=True)
    p = add("compare-models", cmd_compare_models, "Gaussian NB vs single MLP vs S-MLP")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.set and any("=" not in kv for kv in args.set):
            raise ConfigError("--set expects KEY=VALUE")
        cfg = _config(args)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (DataFormatError, FeatureError, nn.CheckpointError, nn.ShapeError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
