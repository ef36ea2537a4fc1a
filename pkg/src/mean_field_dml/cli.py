from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from mean_field_dml.artifacts import atomic_write_text, write_csv, write_jsonl
from mean_field_dml.bench import BENCH_HEADER, bench_loss_scaling, slopes_by_loss
from mean_field_dml.config import RunConfig, parse_data_argument
from mean_field_dml.datasets import class_disjoint_split
from mean_field_dml.errors import ConfigError, DataError, MeanFieldDMLError, NumericalError, ShapeError
from mean_field_dml.magnet import magnet_scan
from mean_field_dml.models import Dataset
from mean_field_dml.retrieval import format_report
from mean_field_dml.runners import (
    evaluate_checkpoints,
    load_checkpoint,
    parse_grid,
    run_sweep,
    save_checkpoint,
    train,
)
from mean_field_dml.runners.sweep import sweep_header
from mean_field_dml.schema import DistanceKind, LossKind, parse_enum

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

LOG_FILE = "log.jsonl"
CHECKPOINT_FILE = "best.ckpt"
REPORT_FILE = "report.txt"
MAGNET_HEADER = ("t_over_jn", "m_mft", "abs_m_exact")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they share exit code 1 with bad config values."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(f"{self.prog}: {message}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=getattr(logging, args.log_level.upper()),
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        if args.command is None:
            parser.print_help()
            return EXIT_OK
        return args.handler(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except (DataError, ShapeError) as exc:
        return _fail(EXIT_DATA, exc)
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except MeanFieldDMLError as exc:
        return _fail(EXIT_CONFIG, exc)


def cmd_train(args: argparse.Namespace) -> int:
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["training.seed"] = args.seed
    if args.loss is not None:
        overrides["loss.kind"] = parse_enum(LossKind, args.loss, "loss.kind").value
    if args.distance is not None:
        overrides["distance"] = parse_enum(DistanceKind, args.distance, "distance").value
    if args.deterministic is not None:
        overrides["training.deterministic"] = args.deterministic
    if args.output_dir is not None:
        overrides["output_dir"] = str(args.output_dir)
    config = RunConfig.load(args.config).with_overrides(overrides)

    train_ds, eval_ds = config.data.load()
    result = train(config.train, train_ds, eval_ds)

    output_dir = config.output_dir
    log_path = output_dir / LOG_FILE
    ckpt_path = output_dir / CHECKPOINT_FILE
    report_path = output_dir / REPORT_FILE
    report_text = format_report(result.best_report, {"best_epoch": result.best_epoch})
    write_jsonl(log_path, (record.as_json() for record in result.history))
    save_checkpoint(result.best, ckpt_path)
    atomic_write_text(report_path, report_text)

    print(f"Log: {log_path}")
    print(f"Checkpoint: {ckpt_path}")
    print(f"Report: {report_path}")
    print("---")
    print(report_text, end="")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    source = parse_data_argument(args.data, args.format)
    ckpts = [load_checkpoint(path) for path in args.checkpoint]
    kind = parse_enum(DistanceKind, args.distance, "distance") if args.distance else None
    full, _ = source.load()
    ds = _select_split(full, args.split)
    report = evaluate_checkpoints(ckpts, ds, kind)
    print(format_report(report), end="")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    losses = [parse_enum(LossKind, name, "losses") for name in _split_list(args.losses)]
    batch_sizes = [_parse_int(value, "batch-sizes") for value in _split_list(args.batch_sizes)]
    if len(set(batch_sizes)) < 3:
        raise ConfigError(f"batch-sizes: a slope fit needs at least 3 distinct batch sizes, got {batch_sizes}")
    distance = parse_enum(DistanceKind, args.distance, "distance")

    rows = bench_loss_scaling(
        losses,
        sorted(set(batch_sizes)),
        num_classes=args.classes,
        dim=args.dim,
        repeats=args.repeats,
        seed=args.seed,
        distance=distance,
    )
    write_csv(args.out, BENCH_HEADER, (row.as_csv_row() for row in rows))
    print(f"Bench: {args.out}")
    print("---")
    for name, slope in slopes_by_loss(rows).items():
        print(f"slope_{name}={slope:.4f}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    grid = parse_grid(args.grid)
    config = RunConfig.load(args.config)
    if args.seed is not None:
        config = config.with_overrides({"training.seed": args.seed})
    out = args.out or config.output_dir / "sweep.csv"

    rows = run_sweep(config, grid, repeats=args.repeats)
    fields = [name for name, _ in grid]
    write_csv(out, sweep_header(grid), (row.as_csv_row(fields) for row in rows))
    print(f"Sweep: {out}")
    print(f"points={len(rows)}")
    return EXIT_OK


def cmd_magnet(args: argparse.Namespace) -> int:
    temps = [_parse_float(value, "temps") for value in _split_list(args.temps)]
    if any(t <= 0 for t in temps):
        raise ConfigError(f"temps: reduced temperatures must be > 0, got {temps}")
    rows = magnet_scan(args.n, args.j, temps, exact=not args.no_exact)
    write_csv(args.out, MAGNET_HEADER, (row.as_csv_row() for row in rows))
    print(f"Magnet: {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="mean-field-dml", description="Mean-field deep metric learning toolkit")
    parser.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"])
    subparsers = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    train_parser = subparsers.add_parser("train", help="Train from a JSON run config and write log, checkpoint, report")
    train_parser.add_argument("--config", type=Path, required=True)
    train_parser.add_argument("--seed", type=int, default=None)
    train_parser.add_argument("--loss", type=str, default=None)
    train_parser.add_argument("--distance", type=str, default=None)
    train_parser.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="zero wall_time in log.jsonl so runs are byte-comparable (config default: on)",
    )
    train_parser.add_argument("--output-dir", type=Path, default=None)
    train_parser.set_defaults(handler=cmd_train)

    eval_parser = subparsers.add_parser("eval", help="Evaluate one checkpoint, or the concatenation of several")
    eval_parser.add_argument("--checkpoint", type=Path, action="append", required=True)
    eval_parser.add_argument("--data", type=str, required=True, help="dataset path or synthetic:key=value,...")
    eval_parser.add_argument("--format", type=str, default=None)
    eval_parser.add_argument("--split", choices=["all", "train", "test"], default="all")
    eval_parser.add_argument("--distance", type=str, default=None)
    eval_parser.set_defaults(handler=cmd_eval)

    bench_parser = subparsers.add_parser("bench", help="Time loss + gradient evaluation against batch size")
    bench_parser.add_argument("--losses", type=str, default="contrastive,cwms,mfcont,mfcwms")
    bench_parser.add_argument("--batch-sizes", type=str, default="64,128,256,512,1024")
    bench_parser.add_argument("--classes", type=int, default=16)
    bench_parser.add_argument("--dim", type=int, default=64)
    bench_parser.add_argument("--repeats", type=int, default=7)
    bench_parser.add_argument("--seed", type=int, default=0)
    bench_parser.add_argument("--distance", type=str, default="cosine")
    bench_parser.add_argument("--out", type=Path, default=Path("bench.csv"))
    bench_parser.set_defaults(handler=cmd_bench)

    sweep_parser = subparsers.add_parser("sweep", help="Grid search over numeric config fields")
    sweep_parser.add_argument("--config", type=Path, required=True)
    sweep_parser.add_argument("--grid", type=str, required=True)
    sweep_parser.add_argument("--repeats", type=int, default=1)
    sweep_parser.add_argument("--seed", type=int, default=None)
    sweep_parser.add_argument("--out", type=Path, default=None)
    sweep_parser.set_defaults(handler=cmd_sweep)

    magnet_parser = subparsers.add_parser("magnet", help="Mean-field vs exact magnetization of the infinite-range magnet")
    magnet_parser.add_argument("--n", type=int, default=12)
    magnet_parser.add_argument("--j", type=float, default=1.0)
    magnet_parser.add_argument("--temps", type=str, default="0.1,0.5,0.9,1.5,2.0", help="T / (J N) values")
    magnet_parser.add_argument("--no-exact", action="store_true")
    magnet_parser.add_argument("--out", type=Path, default=Path("magnet.csv"))
    magnet_parser.set_defaults(handler=cmd_magnet)

    return parser


def _select_split(full: Dataset, split: str) -> Dataset:
    if split == "all":
        return full
    train_ds, test_ds = class_disjoint_split(full)
    return train_ds if split == "train" else test_ds


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _parse_int(text: str, flag: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{flag}: {text!r} is not an integer") from None


def _parse_float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{flag}: {text!r} is not a number") from None


def _fail(code: int, exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
