"""``pidnet`` command line: train, eval, predict, data-stats, compare."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import COLUMN_LABELS, N_FEATURES, Dataset, column_stats, load_pid, split
from .errors import PidnetError
from .serialize import (
    ModelFile,
    config_from_dict,
    load_model,
    parse_config_values,
    save_model,
)
from .trainer import Metrics, TrainHistory, evaluate, predict, run_comparison, train

# flag dest -> config key; flags beat the config file, which beats defaults
OVERRIDES = {
    "seed": "seed",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "optimizer": "optimizer",
    "rho": "rho",
    "epsilon": "epsilon",
    "learning_rate": "learning_rate",
    "init": "init",
    "init_lo": "init_lo",
    "init_hi": "init_hi",
    "validation_fraction": "validation_fraction",
    "threshold": "classification_threshold",
    "layers": "layers",
}


class CliError(Exception):
    pass


def g5(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else format(x, ".5g")


def g12(x: float) -> str:
    return format(x, ".12g")


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    out = []
    for r in [header] + rows:
        out.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
    return "\n".join(out)


def format_metrics(m: Metrics, title: str) -> str:
    rows = [
        ["tp", str(m.tp)],
        ["fp", str(m.fp)],
        ["tn", str(m.tn)],
        ["fn", str(m.fn)],
        ["accuracy", g5(m.accuracy)],
        ["sensitivity", g5(m.sensitivity)],
        ["specificity", g5(m.specificity)],
        ["mse", g5(m.mse)],
    ]
    return f"{title} (n={m.total})\n" + _table(["metric", "value"], rows)


def format_history(history: TrainHistory, every: int = 1) -> str:
    rows = [
        [str(r.epoch), g5(r.train_loss), g5(r.train_acc), g5(r.val_loss), g5(r.val_acc)]
        for r in history
        if r.epoch % every == 0 or r.epoch == len(history)
    ]
    return _table(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"], rows)


def history_csv(history: TrainHistory) -> str:
    lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
    for r in history:
        lines.append(
            f"{r.epoch},{g12(r.train_loss)},{g12(r.train_acc)},{g12(r.val_loss)},{g12(r.val_acc)}"
        )
    return "\n".join(lines) + "\n"


def _merged_config(args):
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc.strerror}") from None
        values.update(parse_config_values(text, str(path)))
    for dest, key in OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            values[key] = str(val)
    if getattr(args, "stratified", False):
        values["stratified"] = "true"
    config = config_from_dict(values)
    rates = getattr(args, "dropout_rates", None)
    if rates is not None:
        try:
            parsed = [float(r) for r in rates.split(",") if r.strip()]
        except ValueError:
            raise CliError(f"--dropout-rates must be comma-separated numbers, got {rates!r}") from None
        config = replace(config, spec=config.spec.with_dropout_rates(parsed))
    return config


def _load_data(path) -> Dataset:
    try:
        return load_pid(path)
    except OSError as exc:
        raise CliError(f"cannot read data {path}: {exc.strerror}") from None


def cmd_train(args, out) -> int:
    config = _merged_config(args)
    data = _load_data(args.data)
    params, history = train(config, data)
    model = ModelFile.from_training(config, params)
    save_model(model, args.out)
    train_set, val_set = split(data, config.split_spec())
    thr = config.classification_threshold
    print(f"model written to {args.out}", file=out)
    print(format_history(history, args.history_every), file=out)
    print(file=out)
    print(format_metrics(evaluate(config.spec, params, train_set, thr), "train"), file=out)
    print(file=out)
    print(format_metrics(evaluate(config.spec, params, val_set, thr), "validation"), file=out)
    if args.history_csv:
        Path(args.history_csv).write_text(history_csv(history), encoding="utf-8")
    return 0


def cmd_eval(args, out) -> int:
    model = load_model(args.model)
    data = _load_data(args.data)
    threshold = args.threshold
    if args.split != "all":
        config = model.train_config()
        train_set, val_set = split(data, config.split_spec())
        data = train_set if args.split == "train" else val_set
        if threshold is None:
            threshold = config.classification_threshold
    if threshold is None:
        threshold = float(model.fingerprint.get("classification_threshold", 0.5))
    m = evaluate(model.spec, model.params, data, threshold)
    print(format_metrics(m, f"{args.split} rows, threshold {g5(threshold)}"), file=out)
    return 0


def _parse_record(text: str, where: str) -> np.ndarray:
    fields = [f.strip() for f in text.split(",")]
    if len(fields) != N_FEATURES:
        raise CliError(f"{where}: expected {N_FEATURES} fields, found {len(fields)}")
    try:
        return np.array([float(f) for f in fields])
    except ValueError:
        raise CliError(f"{where}: non-numeric field") from None


def cmd_predict(args, out) -> int:
    model = load_model(args.model)
    threshold = args.threshold
    if threshold is None:
        threshold = float(model.fingerprint.get("classification_threshold", 0.5))
    records = []
    if args.input is not None:
        records.append(_parse_record(args.input, "--input"))
    else:
        try:
            lines = Path(args.batch).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise CliError(f"cannot read {args.batch}: {exc.strerror}") from None
        first = True
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            head = line.split(",")[0].strip()
            if first:
                first = False
                try:
                    float(head)
                except ValueError:
                    continue
            records.append(_parse_record(line, f"{args.batch}: line {lineno}"))
    for x in records:
        score, cls = predict(model.spec, model.params, x, threshold)
        print(f"{g12(score)},{cls}", file=out)
    return 0


def cmd_data_stats(args, out) -> int:
    data = _load_data(args.data)
    stats = column_stats(data)
    rows = [
        [str(i), label, g5(s.mean), g5(s.std), g5(s.min), g5(s.max)]
        for i, (label, s) in enumerate(zip(COLUMN_LABELS, stats), start=1)
    ]
    print(_table(["#", "attribute", "mean", "std", "min", "max"], rows), file=out)
    print(
        f"rows: {len(data)}; classes: {data.n_positive} positive / {data.n_negative} negative",
        file=out,
    )
    return 0


def cmd_compare(args, out, err) -> int:
    config = _merged_config(args)
    data = _load_data(args.data)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise CliError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
    report = run_comparison(config, data, seeds, workers=args.workers)
    for seed, msg in report.failures:
        print(f"seed {seed} failed: {msg}", file=err)
    if not report.rows:
        raise CliError("all seeds failed")
    rows = [
        [str(r.seed), r.variant, g5(r.train_acc), g5(r.val_acc), g5(r.gap)] for r in report.rows
    ]
    for variant in report.VARIANTS:
        m = report.mean(variant)
        rows.append(["mean", variant, g5(m.train_acc), g5(m.val_acc), g5(m.gap)])
    print(_table(["seed", "variant", "train_acc", "val_acc", "gap"], rows), file=out)
    with_d, without = report.mean("dropout").gap, report.mean("no_dropout").gap
    verdict = "decreased" if with_d < without else ("unchanged" if with_d == without else "increased")
    print(
        f"mean gap with dropout {g5(with_d)} vs without {g5(without)}: "
        f"{verdict} with dropout (difference {g5(report.gap_difference)})",
        file=out,
    )
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--optimizer", choices=["adadelta", "sgd"])
    p.add_argument("--rho", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--init", choices=["glorot", "fixed"])
    p.add_argument("--init-lo", type=float)
    p.add_argument("--init-hi", type=float)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--threshold", type=float, help="classification threshold on the score")
    p.add_argument("--stratified", action="store_true", help="stratify the validation split")
    p.add_argument("--layers", help='e.g. "dense:64:elu, dropout:0.25, dense:1:softplus"')
    p.add_argument("--dropout-rates", help="comma-separated rate per dropout layer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pidnet", description="Dropout MLP for the Pima Indians Diabetes data."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--history-csv", help="write per-epoch history as CSV")
    p.add_argument("--history-every", type=int, default=1, metavar="N",
                   help="print every Nth epoch of the history table")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="evaluate a model file on a data file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float)
    p.add_argument("--split", choices=["all", "train", "validation"], default="all",
                   help="rows to score; train/validation re-create the training split")

    p = sub.add_parser("predict", help="score feature records")
    p.add_argument("--model", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--input", help="8 comma-separated feature values")
    g.add_argument("--batch", help="CSV file of 8-field records")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("data-stats", help="per-column statistics of a data file")
    p.add_argument("--data", required=True)

    p = sub.add_parser("compare", help="dropout vs no-dropout over several seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", required=True, help='e.g. "1,2,3,4,5"')
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    _add_config_flags(p)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args, out)
        if args.command == "eval":
            return cmd_eval(args, out)
        if args.command == "predict":
            return cmd_predict(args, out)
        if args.command == "data-stats":
            return cmd_data_stats(args, out)
        return cmd_compare(args, out, err)
    except (PidnetError, CliError) as exc:
        print(f"pidnet {args.command}: error: {exc}", file=err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
