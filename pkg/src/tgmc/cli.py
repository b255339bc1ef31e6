"""Command-line surface.

Subcommands: prepare, train, temporal, predict, evaluate, pipeline,
baseline, gradcheck. Configuration comes from an optional JSON file
(--config) whose fields all have documented defaults; explicit flags win
over the file. Every run echoes its effective configuration to
``config.used.json`` in the output directory, and that file can be fed
back through --config to reproduce the run.

Exit codes: 0 success; 2 unreadable input; 3 output exists and --force not
given; 4 missing upstream artifact (dataset or checkpoint); 5 config or
shape mismatch (including an empty test set); 64 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import ingest, pipeline, verify
from .ingest import ParseError, ValidationError, WindowingConfig
from .pipeline import (PredictionRecord, TemporalTrainConfig,
                       WindowTrainConfig, aggregate_reports, evaluate)

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_EXISTS = 3
EXIT_MISSING = 4
EXIT_MISMATCH = 5
EXIT_USAGE = 64

logger = logging.getLogger(__name__)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 64."""

    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    dataset_path: str | None
    dataset_format: str
    max_rating: int
    window_days: float
    accumulative: bool
    train_windows: int | None
    window_training: WindowTrainConfig
    temporal: TemporalTrainConfig
    out_dir: Path
    runs: int
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "dataset": {"path": self.dataset_path,
                        "format": self.dataset_format,
                        "max_rating": self.max_rating},
            "windowing": {"window_days": self.window_days,
                          "accumulative": self.accumulative,
                          "train_windows": self.train_windows},
            "window_training": {k: v for k, v in
                                asdict(self.window_training).items()
                                if k != "seed"},
            "temporal": {k: v for k, v in asdict(self.temporal).items()
                         if k != "seed"},
            "runs": self.runs,
            "seed": self.seed,
        }


_SECTION_KEYS = {
    "dataset": {"path", "format", "max_rating"},
    "windowing": {"window_days", "accumulative", "train_windows"},
    "window_training": {"epochs", "batch_size", "learning_rate", "dropout",
                        "hidden_dim", "latent_dim", "accum", "normalization"},
    "temporal": {"cell", "layers", "epochs", "learning_rate",
                 "share_user_item", "decoder", "weight_layers",
                 "mask_inactive_rows"},
}


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_BAD_INPUT, f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise CliError(EXIT_MISMATCH, f"config {path}: expected an object")
    for section, value in data.items():
        if section in ("runs", "seed"):
            continue
        if section not in _SECTION_KEYS:
            raise CliError(EXIT_MISMATCH,
                           f"config {path}: unknown section '{section}'")
        unknown = set(value) - _SECTION_KEYS[section]
        if unknown:
            raise CliError(EXIT_MISMATCH, f"config {path}: unknown keys "
                           f"{sorted(unknown)} in '{section}'")
    return data


def _pick(flag, file_value, default):
    if flag is not None:
        return flag
    if file_value is not None:
        return file_value
    return default


def build_run_config(args) -> RunConfig:
    data = _load_config_file(args.config) if getattr(args, "config", None) else {}
    ds = data.get("dataset", {})
    win = data.get("windowing", {})
    tr = data.get("window_training", {})
    tp = data.get("temporal", {})
    seed = _pick(getattr(args, "seed", None), data.get("seed"), 42)
    try:
        window_training = WindowTrainConfig(
            epochs=_pick(getattr(args, "epochs", None), tr.get("epochs"), 2500),
            batch_size=_pick(getattr(args, "batch_size", None),
                             tr.get("batch_size"), 100_000),
            learning_rate=_pick(getattr(args, "learning_rate", None),
                                tr.get("learning_rate"), 1e-2),
            dropout=_pick(getattr(args, "dropout", None), tr.get("dropout"), 0.3),
            hidden_dim=_pick(getattr(args, "hidden_dim", None),
                             tr.get("hidden_dim"), 500),
            latent_dim=_pick(getattr(args, "latent_dim", None),
                             tr.get("latent_dim"), 50),
            accum=_pick(getattr(args, "accum", None), tr.get("accum"), "sum"),
            normalization=_pick(getattr(args, "normalization", None),
                                tr.get("normalization"), "symmetric"),
            seed=seed)
        temporal = TemporalTrainConfig(
            cell=_pick(getattr(args, "cell", None), tp.get("cell"), "lstm"),
            layers=_pick(getattr(args, "layers", None), tp.get("layers"), 2),
            epochs=_pick(getattr(args, "temporal_epochs", None),
                         tp.get("epochs"), 250),
            learning_rate=_pick(getattr(args, "temporal_lr", None),
                                tp.get("learning_rate"), 1e-2),
            share_user_item=_pick(getattr(args, "share_weights", None),
                                  tp.get("share_user_item"), True),
            decoder=_pick(getattr(args, "decoder", None),
                          tp.get("decoder"), "rnn"),
            weight_layers=_pick(getattr(args, "weight_layers", None),
                                tp.get("weight_layers"), 1),
            mask_inactive_rows=_pick(getattr(args, "mask_inactive", None),
                                     tp.get("mask_inactive_rows"), False),
            seed=seed)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, f"invalid configuration: {exc}")
    return RunConfig(
        dataset_path=_pick(getattr(args, "input", None), ds.get("path"), None),
        dataset_format=_pick(getattr(args, "format", None),
                             ds.get("format"), "movielens-1m"),
        max_rating=_pick(getattr(args, "max_rating", None),
                         ds.get("max_rating"), 5),
        window_days=_pick(getattr(args, "window_days", None),
                          win.get("window_days"), 91.0),
        accumulative=_pick(getattr(args, "accumulative", None),
                           win.get("accumulative"), True),
        train_windows=_pick(getattr(args, "train_windows", None),
                            win.get("train_windows"), None),
        window_training=window_training,
        temporal=temporal,
        out_dir=Path(getattr(args, "out_dir", ".")),
        runs=_pick(getattr(args, "runs", None), data.get("runs"), 1),
        seed=seed)


def _echo_config(cfg: RunConfig) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "config.used.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _prepare_dataset(cfg: RunConfig, force: bool) -> ingest.WindowedDataset:
    if cfg.dataset_path is None:
        raise CliError(EXIT_USAGE, "no input file given (argument or "
                       "config dataset.path)")
    src = Path(cfg.dataset_path)
    if not src.exists():
        raise CliError(EXIT_BAD_INPUT, f"input file not found: {src}")
    try:
        events, id_maps = ingest.parse_ratings(src, cfg.dataset_format,
                                               max_rating=cfg.max_rating)
    except (ParseError, ValidationError, OSError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot parse {src}: {exc}")
    delta = int(round(cfg.window_days * 86_400))
    if delta <= 0:
        raise CliError(EXIT_MISMATCH, "--window-days must be positive")
    span = int(events.ts.max()) - int(events.ts.min())
    n_windows = span // delta + 1
    train_windows = cfg.train_windows
    if train_windows is None:
        train_windows = max(int(n_windows) - 2, 1)
    try:
        wcfg = WindowingConfig(window_length_seconds=delta,
                               accumulative=cfg.accumulative,
                               train_windows=train_windows)
        dataset = ingest.build_windows(events, wcfg, id_maps,
                                       max_rating=cfg.max_rating)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, str(exc))
    ds_dir = cfg.out_dir / "dataset"
    if (ds_dir / "manifest.json").exists() and not force:
        raise CliError(EXIT_EXISTS, f"{ds_dir} already holds a prepared "
                       "dataset; pass --force to overwrite")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ingest.save_dataset(dataset, ds_dir)
    return dataset


def _load_dataset(out_dir: Path) -> ingest.WindowedDataset:
    ds_dir = Path(out_dir) / "dataset"
    if not (ds_dir / "manifest.json").exists():
        raise CliError(EXIT_MISSING, f"no prepared dataset under {ds_dir}; "
                       "run prepare first")
    try:
        return ingest.load_dataset(ds_dir)
    except (ValueError, OSError, KeyError) as exc:
        raise CliError(EXIT_BAD_INPUT, f"cannot load dataset {ds_dir}: {exc}")


def _window_ckpt_path(out_dir: Path, t: int) -> Path:
    return Path(out_dir) / "windows" / f"window_{t + 1:04d}.ckpt"


def _load_window_models(out_dir: Path, t_train: int) -> list:
    models = []
    for t in range(t_train):
        path = _window_ckpt_path(out_dir, t)
        if not path.exists():
            raise CliError(EXIT_MISSING, f"missing window checkpoint {path}; "
                           "run train first")
        try:
            models.append(pipeline.load_window_model(path))
        except (ValueError, OSError) as exc:
            raise CliError(EXIT_BAD_INPUT, f"cannot load {path}: {exc}")
    dims = {m.u_emb.shape[1] for m in models}
    if len(dims) > 1:
        raise CliError(EXIT_MISMATCH, "window checkpoints disagree on the "
                       f"latent dimension: {sorted(dims)}")
    return models


def _write_predictions_csv(path: Path, records: list[PredictionRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_raw_id", "item_raw_id", "window", "predicted",
                         "actual", "cold_start"])
        for r in records:
            actual = "" if r.actual < 0 else str(r.actual)
            writer.writerow([r.user_raw, r.item_raw, r.window,
                             f"{r.predicted:.6f}", actual,
                             "true" if r.cold_start else "false"])


def _read_predictions_csv(path: Path) -> list[PredictionRecord]:
    if not path.exists():
        raise CliError(EXIT_MISSING, f"no predictions at {path}; run "
                       "predict first")
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"user_raw_id", "item_raw_id", "window", "predicted",
                    "actual", "cold_start"}
        if reader.fieldnames is None or expected - set(reader.fieldnames):
            raise CliError(EXIT_BAD_INPUT, f"{path}: not a predictions CSV")
        for row in reader:
            if row["actual"] == "":
                continue
            records.append(PredictionRecord(
                user_raw=row["user_raw_id"], item_raw=row["item_raw_id"],
                window=int(row["window"]),
                predicted=float(row["predicted"]),
                actual=int(row["actual"]),
                cold_start=row["cold_start"] == "true"))
    return records


def _report_text(report_dict: dict) -> str:
    lines = []
    if "aggregate" in report_dict:
        agg = report_dict["aggregate"]
        lines.append(f"{'runs':<12}{agg['runs']}")
        lines.append(f"{'rmse':<12}{agg['rmse_mean']:.6f} +- {agg['rmse_std']:.6f}")
        lines.append(f"{'mae':<12}{agg['mae_mean']:.6f} +- {agg['mae_std']:.6f}")
        lines.append("")
        lines.append(f"{'seed':<8}{'rmse':>10}{'mae':>10}")
        for run in agg["per_run"]:
            lines.append(f"{run['seed']:<8}{run['rmse']:>10.6f}{run['mae']:>10.6f}")
        return "\n".join(lines) + "\n"
    lines.append(f"{'rmse':<12}{report_dict['rmse']:.6f}")
    lines.append(f"{'mae':<12}{report_dict['mae']:.6f}")
    lines.append(f"{'count':<12}{report_dict['count']}")
    lines.append(f"{'cold_start':<12}{report_dict['cold_start_count']}")
    lines.append("")
    lines.append(f"{'window':<8}{'rmse':>10}{'mae':>10}{'count':>8}{'cold':>6}")
    for w, row in sorted(report_dict["per_window"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"{w:<8}{row['rmse']:>10.6f}{row['mae']:>10.6f}"
                     f"{row['count']:>8}{row['cold_start']:>6}")
    return "\n".join(lines) + "\n"


def _write_report(out_dir: Path, report_dict: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = _report_text(report_dict)
    with open(out_dir / "report.txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_prepare(args) -> int:
    cfg = build_run_config(args)
    dataset = _prepare_dataset(cfg, force=args.force)
    _echo_config(cfg)
    print(f"windows: {dataset.n_windows}  "
          f"(train {dataset.config.train_windows}, "
          f"test {dataset.n_windows - dataset.config.train_windows})")
    print(f"users: {dataset.stats.n_users}  items: {dataset.stats.n_items}")
    print(f"{'window':<8}{'events':>10}{'density':>12}")
    for t in range(dataset.n_windows):
        print(f"{t:<8}{len(dataset.window_events(t)):>10}"
              f"{dataset.density(t):>12.6f}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = build_run_config(args)
    dataset = _load_dataset(cfg.out_dir)
    _echo_config(cfg)
    try:
        models = pipeline.train_window_models(dataset, cfg.window_training,
                                              max_workers=args.workers)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, str(exc))
    win_dir = cfg.out_dir / "windows"
    win_dir.mkdir(parents=True, exist_ok=True)
    for m in models:
        pipeline.save_window_model(_window_ckpt_path(cfg.out_dir, m.t), m,
                                   cfg.window_training)
        final = m.loss_curve[-1] if m.loss_curve else float("nan")
        print(f"window {m.t}: final nll/edge {final:.4f}")
    return EXIT_OK


def cmd_temporal(args) -> int:
    cfg = build_run_config(args)
    dataset = _load_dataset(cfg.out_dir)
    models = _load_window_models(cfg.out_dir, dataset.config.train_windows)
    _echo_config(cfg)
    try:
        temporal = pipeline.train_temporal(models, cfg.temporal)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, str(exc))
    pipeline.save_temporal_models(cfg.out_dir / "temporal.ckpt", temporal,
                                  cfg.temporal)
    for role, loss in sorted(temporal.final_losses.items()):
        print(f"{role} trajectory model: final mse {loss:.6f}")
    return EXIT_OK


def _assemble_state(cfg: RunConfig, dataset, models, temporal):
    split = ingest.train_test_split(dataset)
    user_seen, item_seen = pipeline._seen_flags(split, dataset.stats)
    return pipeline.TrainedState(
        window_models=models, temporal=temporal, stats=dataset.stats,
        id_maps=dataset.id_maps, user_seen=user_seen, item_seen=item_seen,
        window_cfg=cfg.window_training, temporal_cfg=cfg.temporal), split


def cmd_predict(args) -> int:
    cfg = build_run_config(args)
    dataset = _load_dataset(cfg.out_dir)
    models = _load_window_models(cfg.out_dir, dataset.config.train_windows)
    temporal = None
    if not args.static:
        tpath = cfg.out_dir / "temporal.ckpt"
        if not tpath.exists():
            raise CliError(EXIT_MISSING, f"missing {tpath}; run temporal "
                           "first or pass --static")
        temporal = pipeline.load_temporal_models(tpath)
    state, split = _assemble_state(cfg, dataset, models, temporal)
    if args.queries:
        try:
            queries = []
            with open(args.queries, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    u, v = line.split(",")[:2]
                    queries.append((int(u), int(v)))
        except (OSError, ValueError) as exc:
            raise CliError(EXIT_BAD_INPUT, f"cannot read queries: {exc}")
        try:
            records = pipeline.predict_window(state, args.horizon, queries)
        except ValueError as exc:
            raise CliError(EXIT_MISMATCH, str(exc))
    else:
        try:
            records = pipeline.predict_test_windows(state, split)
        except ValueError as exc:
            raise CliError(EXIT_MISMATCH, str(exc))
    _write_predictions_csv(cfg.out_dir / "predictions.csv", records)
    print(f"wrote {len(records)} predictions")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out_dir)
    records = _read_predictions_csv(out_dir / "predictions.csv")
    if not records:
        raise CliError(EXIT_MISMATCH, "no scored predictions (empty test set)")
    report = evaluate(records, {"source": "predictions.csv"})
    _write_report(out_dir, report.to_dict())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = build_run_config(args)
    if args.input is not None:
        dataset = _prepare_dataset(cfg, force=args.force)
    else:
        dataset = _load_dataset(cfg.out_dir)
    _echo_config(cfg)
    if cfg.runs < 1:
        raise CliError(EXIT_USAGE, "--runs must be >= 1")
    reports = []
    all_results = []
    for i in range(cfg.runs):
        wcfg = replace(cfg.window_training, seed=cfg.seed + i)
        tcfg = replace(cfg.temporal, seed=cfg.seed + i)
        try:
            result = pipeline.run_experiment(dataset, wcfg, tcfg,
                                             max_workers=args.workers)
        except ValueError as exc:
            raise CliError(EXIT_MISMATCH, str(exc))
        reports.append(result.report)
        all_results.append(result)
        run_dir = cfg.out_dir if cfg.runs == 1 else cfg.out_dir / f"run_{i:02d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_predictions_csv(run_dir / "predictions.csv", result.records)
        if cfg.runs > 1:
            with open(run_dir / "report.json", "w", encoding="utf-8") as fh:
                json.dump(result.report.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
    last = all_results[-1]
    win_dir = cfg.out_dir / "windows"
    win_dir.mkdir(parents=True, exist_ok=True)
    for m in last.state.window_models:
        pipeline.save_window_model(_window_ckpt_path(cfg.out_dir, m.t), m,
                                   last.state.window_cfg)
    if last.state.temporal is not None:
        pipeline.save_temporal_models(cfg.out_dir / "temporal.ckpt",
                                      last.state.temporal,
                                      last.state.temporal_cfg)
    if cfg.runs == 1:
        _write_report(cfg.out_dir, reports[0].to_dict())
    else:
        _write_report(cfg.out_dir, {
            "aggregate": aggregate_reports(reports),
            "runs": [r.to_dict() for r in reports]})
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = build_run_config(args)
    dataset = _load_dataset(cfg.out_dir)
    try:
        if args.kind == "pmf":
            result = pipeline.pmf_baseline(
                dataset, d=args.pmf_d, learning_rate=args.pmf_lr,
                reg=args.pmf_reg, epochs=args.pmf_epochs, seed=cfg.seed)
        else:
            result = pipeline.run_experiment(dataset, cfg.window_training,
                                             None, max_workers=args.workers)
    except ValueError as exc:
        raise CliError(EXIT_MISMATCH, str(exc))
    sub = cfg.out_dir / f"baseline_{args.kind}"
    sub.mkdir(parents=True, exist_ok=True)
    _write_predictions_csv(sub / "predictions.csv", result.records)
    _write_report(sub, result.report.to_dict())
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = verify.run_all(seed=args.seed, step=args.step)
    print(f"{'check':<22}{'max rel err':>14}{'params':>8}{'sec':>8}")
    worst = 0.0
    for r in results:
        print(f"{r.name:<22}{r.max_rel_err:>14.3e}{r.n_params:>8}"
              f"{r.seconds:>8.2f}")
        worst = max(worst, r.max_rel_err)
    ok = worst < args.tolerance
    print(f"worst {worst:.3e} {'<' if ok else '>='} "
          f"tolerance {args.tolerance:.0e}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p, training=True, temporal=True):
    p.add_argument("--out-dir", default=".", help="artifact directory "
                   "(default: current directory)")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int, help="base RNG seed (default 42)")
    if training:
        p.add_argument("--epochs", type=int, help="window training epochs "
                       "(default 2500)")
        p.add_argument("--batch-size", type=int, help="edge batch size "
                       "(default 100000)")
        p.add_argument("--learning-rate", type=float, help="Adam step size "
                       "(default 0.01)")
        p.add_argument("--dropout", type=float, help="dropout rate "
                       "(default 0.3)")
        p.add_argument("--hidden-dim", type=int, help="message width H "
                       "(default 500)")
        p.add_argument("--latent-dim", type=int, help="embedding width d "
                       "(default 50)")
        p.add_argument("--accum", choices=["sum", "stack"],
                       help="message accumulation (default sum)")
        p.add_argument("--normalization", choices=["symmetric", "left"],
                       help="edge normalization (default symmetric)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel window trainers (default: cpu count)")
    if temporal:
        p.add_argument("--cell", choices=["vanilla", "gru", "lstm"],
                       help="trajectory cell type (default lstm)")
        p.add_argument("--layers", type=int, help="trajectory layers "
                       "(default 2)")
        p.add_argument("--temporal-epochs", type=int,
                       help="trajectory training epochs (default 250)")
        p.add_argument("--temporal-lr", type=float,
                       help="trajectory learning rate (default 0.01)")
        p.add_argument("--share-weights", action=argparse.BooleanOptionalAction,
                       default=None, help="share user/item trajectory model "
                       "(default on)")
        p.add_argument("--decoder", choices=["rnn", "last"],
                       help="future decoder weights: forecast or reuse last "
                       "(default rnn)")
        p.add_argument("--weight-layers", type=int,
                       help="decoder-weight model depth (default 1)")
        p.add_argument("--mask-inactive", action=argparse.BooleanOptionalAction,
                       default=None, help="exclude rows before first "
                       "activity from trajectory loss (default off)")


def _add_prepare_args(p):
    p.add_argument("--format", choices=list(ingest.PARSE_FORMATS),
                   help="input format (default movielens-1m)")
    p.add_argument("--max-rating", type=int, help="rating levels R (default 5)")
    p.add_argument("--window-days", type=float, help="window length in days "
                   "(default 91)")
    p.add_argument("--accumulative", action=argparse.BooleanOptionalAction,
                   default=None, help="accumulate windows 1..t for training "
                   "(default on)")
    p.add_argument("--train-windows", type=int, help="leading windows used "
                   "for training (default: all but the last two)")
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing prepared dataset")


def build_parser() -> _Parser:
    parser = _Parser(prog="tgmc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--verbose", action="store_true",
                        help="log stage progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("prepare", help="parse ratings and write windows")
    p.add_argument("input", help="ratings file")
    _add_prepare_args(p)
    _add_common(p, training=False, temporal=False)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="fit encoder+decoder per window")
    _add_common(p, temporal=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("temporal", help="fit trajectory models")
    _add_common(p, training=False)
    p.set_defaults(func=cmd_temporal)

    p = sub.add_parser("predict", help="score future windows")
    _add_common(p)
    p.add_argument("--static", action="store_true",
                   help="skip trajectories; reuse the last window's model")
    p.add_argument("--queries", help="CSV of raw user,item pairs to score "
                   "instead of the test windows")
    p.add_argument("--horizon", type=int, default=1,
                   help="windows ahead for --queries (default 1)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions.csv")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="prepare+train+temporal+predict+evaluate")
    p.add_argument("--input", help="ratings file (else reuse prepared dataset)")
    _add_prepare_args(p)
    _add_common(p)
    p.add_argument("--runs", type=int, help="repeat with seeds "
                   "seed..seed+N-1 and aggregate (default 1)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("baseline", help="reference models on the same split")
    p.add_argument("--kind", choices=["pmf", "static"], default="pmf")
    p.add_argument("--pmf-d", type=int, default=50)
    p.add_argument("--pmf-lr", type=float, default=0.005)
    p.add_argument("--pmf-reg", type=float, default=0.02)
    p.add_argument("--pmf-epochs", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gradcheck", help="compare every backward pass "
                       "against finite differences")
    p.add_argument("--all", action="store_true", help="run the full suite "
                   "(the default and only mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
