"""Command-line front end: train, evaluate, inspect, and budget sweeps.

Metrics are emitted as line-delimited records.  The --out-metrics file keeps
the deterministic fields only (same seed, same bytes in sequential mode);
wall-clock timing is streamed to stdout and the log.  With --plots, figures
are rendered next to the metrics output.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import datasets, model_io, plots, trainer
from .core import TMModel
from .datasets import DataError
from .model_io import ModelIOError, UndefinedEnergyRatio

logger = logging.getLogger("csctm")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _parse_budget(value):
    if value == "all":
        return "all"
    try:
        budget = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"budget must be a positive int or 'all', got {value!r}")
    if budget < 1:
        raise argparse.ArgumentTypeError("budget must be >= 1 (or 'all')")
    return budget


def _parse_booleanizer(value):
    kind, _, arg = value.partition(":")
    if kind == "threshold":
        return datasets.ThresholdBooleanizer(float(arg) if arg else 75.0)
    if kind == "thermometer":
        return datasets.ThermometerBooleanizer(int(arg) if arg else 5)
    raise argparse.ArgumentTypeError(
        f"booleanizer must be threshold:<theta> or thermometer:<bins>, got {value!r}"
    )


def _parse_budget_list(value):
    if value == "auto":
        return "auto"
    try:
        budgets = [int(part) for part in value.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad budget list {value!r}")
    if not budgets or any(b < 1 for b in budgets):
        raise argparse.ArgumentTypeError("budgets must be positive integers")
    return budgets


def _add_dataset_args(p):
    p.add_argument(
        "--dataset",
        choices=["xor", "or", "noisy-xor", "idx", "csv"],
        required=True,
    )
    p.add_argument("--images", help="IDX image file (dataset=idx)")
    p.add_argument("--labels", help="IDX label file (dataset=idx)")
    p.add_argument("--csv", help="CSV file with header row (dataset=csv)")
    p.add_argument("--label-col", help="label column name (dataset=csv)")
    p.add_argument(
        "--booleanize",
        type=_parse_booleanizer,
        default=None,
        help="threshold:<theta> or thermometer:<bins> (idx/csv; defaults: idx threshold:75, csv thermometer:5)",
    )
    p.add_argument("--samples", type=int, default=None, help="generator sample count (xor/or default: 4-row truth table; noisy-xor default 5000)")
    p.add_argument("--noise", type=float, default=None, help="label flip probability (noisy-xor default 0.05)")
    p.add_argument("--distractors", type=int, default=None, help="irrelevant random bits appended to xor inputs (noisy-xor default 10)")
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--data-seed", type=int, default=None, help="dataset generation/split seed (defaults to --seed)")


def _add_model_args(p):
    p.add_argument("--clauses", type=int, default=20, help="clauses per bank (even)")
    p.add_argument("--t", dest="T", type=int, default=10, help="voting margin T")
    p.add_argument("--s", type=float, default=3.9, help="specificity (> 1)")
    p.add_argument("--budget", type=_parse_budget, default="all", help="literal budget (int or 'all')")
    p.add_argument("--states", type=int, default=128, help="automaton states per action")
    p.add_argument("--boost", action="store_true", help="boost true-positive memorization")


def _add_train_args(p):
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mode", choices=[trainer.SEQUENTIAL, trainer.DECENTRALIZED], default=trainer.SEQUENTIAL)
    p.add_argument("--b-batch", dest="b_batch", type=int, default=1, help="examples per clause visit (decentralized)")
    p.add_argument("--out-model")
    p.add_argument("--out-metrics")
    p.add_argument("--plots", help="directory for rendered figures")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="csctm",
        description="Tsetlin machine engine with soft clause-size budgets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write metrics")
    _add_dataset_args(p_train)
    _add_model_args(p_train)
    _add_train_args(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    p_eval.add_argument("--model", required=True)
    _add_dataset_args(p_eval)
    p_eval.add_argument("--seed", type=int, default=0)

    p_inspect = sub.add_parser("inspect", help="print model stats and clauses")
    p_inspect.add_argument("--model", required=True)
    p_inspect.add_argument("--top-k", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="budget sweep (explicit list or auto halving)")
    _add_dataset_args(p_sweep)
    _add_model_args(p_sweep)
    p_sweep.add_argument("--budgets", type=_parse_budget_list, default="auto")
    p_sweep.add_argument("--runs", type=int, default=5, help="independent runs per budget")
    p_sweep.add_argument("--epochs", type=int, default=25)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out-metrics")
    p_sweep.add_argument("--plots", help="directory for rendered figures")
    return parser


def resolve_dataset(args, seed):
    """Build (train, test) BoolDatasets from the dataset flags.

    Truth-table datasets are not split; sampled and file datasets get a
    seeded holdout split, with booleanizers fitted on the training part only.
    """
    name = args.dataset
    data_seed = args.data_seed if args.data_seed is not None else seed
    if name == "xor":
        if args.samples is None:
            ds = datasets.generate_xor(4, noise_rate=0.0, exhaustive=True)
            return ds, None
        ds = datasets.generate_xor(
            args.samples,
            noise_rate=args.noise or 0.0,
            seed=data_seed,
            distractors=args.distractors or 0,
        )
    elif name == "or":
        if args.samples is None:
            return datasets.or_truth_table(), None
        ds = datasets.generate_or(args.samples, seed=data_seed)
    elif name == "noisy-xor":
        ds = datasets.generate_xor(
            args.samples if args.samples is not None else 5000,
            noise_rate=args.noise if args.noise is not None else 0.05,
            seed=data_seed,
            distractors=args.distractors if args.distractors is not None else 10,
        )
    elif name == "idx":
        if not args.images or not args.labels:
            raise UsageError("dataset=idx requires --images and --labels")
        raw = datasets.load_idx(args.images, args.labels)
        return _split_and_booleanize(
            raw, args.booleanize or datasets.ThresholdBooleanizer(75.0),
            args.test_fraction, data_seed,
        )
    elif name == "csv":
        if not args.csv or not args.label_col:
            raise UsageError("dataset=csv requires --csv and --label-col")
        raw = datasets.load_csv(args.csv, args.label_col)
        return _split_and_booleanize(
            raw, args.booleanize or datasets.ThermometerBooleanizer(5),
            args.test_fraction, data_seed,
        )
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown dataset {name!r}")
    if args.test_fraction > 0:
        train, test = trainer.split_dataset(ds, args.test_fraction, data_seed)
        return train, test
    return ds, None


def _split_and_booleanize(raw, booleanizer, test_fraction, seed):
    if test_fraction > 0:
        train_raw, test_raw = trainer.split_dataset(raw, test_fraction, seed)
    else:
        train_raw, test_raw = raw, None
    booleanizer.fit(train_raw.X)
    train = datasets.booleanize(booleanizer, train_raw)
    test = datasets.booleanize(booleanizer, test_raw) if test_raw is not None else None
    return train, test


def _resolve_model(args, n_features, n_classes):
    budget = args.budget
    if budget == "all":
        budget = 2 * n_features
    if budget > 2 * n_features:
        raise UsageError(
            f"budget {budget} exceeds the 2*o = {2 * n_features} literals available"
        )
    if args.clauses < 2 or args.clauses % 2:
        raise UsageError("--clauses must be even and >= 2")
    if args.T < 1:
        raise UsageError("--t must be >= 1")
    if args.s <= 1.0:
        raise UsageError("--s must be > 1")
    return TMModel.create(
        n_features=n_features,
        n_classes=n_classes,
        n_clauses=args.clauses,
        T=args.T,
        s=args.s,
        budget=budget,
        n_states=args.states,
        boost_true_positive=args.boost,
    )


def _write_metrics_file(path, records):
    Path(path).write_text(trainer.format_metrics(records, with_elapsed=False))


def cmd_train(args):
    train_ds, test_ds = resolve_dataset(args, args.seed)
    model = _resolve_model(args, train_ds.n_features, max(train_ds.n_classes, 2))
    cfg = trainer.TrainConfig(
        epochs=args.epochs,
        seed=args.seed,
        workers=args.workers,
        mode=args.mode,
        b_batch=args.b_batch,
    )
    print(",".join(trainer.METRICS_FIELDS))
    if cfg.mode == trainer.SEQUENTIAL:
        records = trainer.train_sequential(
            model,
            train_ds,
            cfg,
            test_ds,
            on_epoch=lambda recs: [print(r.line()) for r in recs],
        )
    else:
        records, _, _ = trainer.train_parallel(model, train_ds, cfg, test_ds)
        for r in records:
            print(r.line())
    if args.out_metrics:
        _write_metrics_file(args.out_metrics, records)
    if args.out_model:
        model_io.save_model(model, args.out_model, include_ta_states=True)
    if args.plots:
        for path in plots.save_training_curves(records, args.plots):
            logger.info("wrote %s", path)
    final = records[-1]
    print(f"final: split={final.split} accuracy={final.accuracy:.4f} l_ave={final.avg_literals_per_clause:.3f}")
    return 0


def cmd_eval(args):
    model = model_io.load_model(args.model)
    train_ds, test_ds = resolve_dataset(args, args.seed)
    ds = test_ds if test_ds is not None else train_ds
    result = trainer.evaluate(model, ds)
    print(f"accuracy: {result.accuracy:.6f} ({result.n_examples} examples)")
    print("confusion (rows=true, cols=predicted):")
    for true_class, row in enumerate(result.confusion):
        print(f"  {true_class}: " + " ".join(str(int(c)) for c in row))
    return 0


def cmd_inspect(args):
    model = model_io.load_model(args.model)
    stats = model_io.clause_stats(model)
    print(f"features:          {model.n_features}")
    print(f"classes:           {model.n_classes}")
    print(f"banks:             {len(model.banks)}")
    print(f"clauses_per_bank:  {model.n_clauses}")
    print(f"T:                 {model.T}")
    print(f"s:                 {model.s}")
    print(f"budget:            {model.budget}")
    print(f"states_per_action: {model.n_states}")
    print(f"l_ave:             {stats.l_ave:.4f}")
    print(f"over_budget_count: {stats.over_budget_count}")
    print(f"model_size_bytes:  {stats.model_size_bytes}")
    try:
        ratio = model_io.energy_ratio(model.budget, stats.l_ave)
        print(f"estimated_clause_energy_fraction: {ratio:.4f}")
    except UndefinedEnergyRatio:
        print("estimated_clause_energy_fraction: n/a")
    print("clauses:")
    listing = model_io.dump_clauses(model, top_k=args.top_k)
    for line in listing.splitlines():
        print(f"  {line}")
    return 0


def budget_ladder(l_ave):
    """Smallest power of two >= l_ave, then halve down to 1."""
    top = 1
    while top < l_ave:
        top *= 2
    ladder = []
    while top >= 1:
        ladder.append(top)
        top //= 2
    return ladder


def _sweep_one_budget(args, budget, train_ds, test_ds):
    """Worst maximum accuracy across --runs independent runs, plus the
    matching run's final l_ave."""
    worst = None
    for run in range(args.runs):
        seed = args.seed + run
        model = _resolve_model_with_budget(args, budget, train_ds)
        cfg = trainer.TrainConfig(epochs=args.epochs, seed=seed)
        records = trainer.train_sequential(model, train_ds, cfg, test_ds)
        split = "test" if test_ds is not None else "train"
        best = max(r.accuracy for r in records if r.split == split)
        l_ave = model.avg_literals()
        if worst is None or best < worst[0]:
            worst = (best, l_ave)
    return {"budget": budget, "accuracy": worst[0], "l_ave": worst[1]}


def _resolve_model_with_budget(args, budget, train_ds):
    saved = args.budget
    args.budget = budget
    try:
        return _resolve_model(args, train_ds.n_features, max(train_ds.n_classes, 2))
    finally:
        args.budget = saved


def cmd_sweep(args):
    train_ds, test_ds = resolve_dataset(args, args.seed)
    rows = []
    if args.budgets == "auto":
        vanilla = _sweep_one_budget(args, "all", train_ds, test_ds)
        rows.append(vanilla)
        budgets = budget_ladder(vanilla["l_ave"])
        logger.info("auto ladder from l_ave %.2f: %s", vanilla["l_ave"], budgets)
    else:
        budgets = args.budgets
    print("budget,accuracy,l_ave")
    for row in rows:
        print(f"{row['budget']},{row['accuracy']:.6f},{row['l_ave']:.6f}")
    for budget in budgets:
        row = _sweep_one_budget(args, budget, train_ds, test_ds)
        rows.append(row)
        print(f"{row['budget']},{row['accuracy']:.6f},{row['l_ave']:.6f}")
    if args.out_metrics:
        lines = ["budget,accuracy,l_ave"]
        lines.extend(
            f"{r['budget']},{r['accuracy']:.6f},{r['l_ave']:.6f}" for r in rows
        )
        Path(args.out_metrics).write_text("\n".join(lines) + "\n")
    if args.plots:
        for path in plots.save_sweep_figures(rows, args.plots):
            logger.info("wrote %s", path)
    return 0


def main(argv=None):
    level = _LOG_LEVELS.get(os.environ.get("CSCTM_LOG", "error").lower())
    if level is None:
        print("CSCTM_LOG must be one of error, info, debug", file=sys.stderr)
        return 2
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "inspect": cmd_inspect,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelIOError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
