"""Experiment harness: gen-dataset, train, run-defense and report commands.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import classifiers, features, qlearning, runtime
from .classifiers import ClassifierKind
from .config import (
    ConfigError,
    DataError,
    ExperimentConfig,
    atomic_write_text,
    echo_config,
    load_config,
)
from .dataplane import ServerConfig
from .evaluation import cross_validate
from .features import dataset_arrays, read_dataset_csv, write_dataset_csv
from .qlearning import (
    RewardWeights,
    enumerate_actions,
    make_dataset_evaluator,
    make_stub_evaluator,
    qtable_to_doc,
    reward,
    run_training,
    write_episode_log,
)
from .runtime import (
    METHOD_NONE,
    METHOD_QMIND,
    METHOD_SIFT,
    METHODS,
    REPORT_SCHEMA_VERSION,
    DefenseConfig,
    measure,
    run_simulation,
    summary_doc,
    write_report_csv,
)
from .traffic import Label, ground_truth

TRAINING_SUMMARY = "training_summary.json"
RUN_SUMMARY = "summary.json"

REPORT_METRICS = (
    "fitness", "precision", "recall", "f_score", "accuracy", "false_alarm",
    "detection_time", "drop_accuracy", "response_time_mean", "time_to_overflow",
)


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    csv.writer(buf).writerows(rows)
    return buf.getvalue()


def cmd_gen_dataset(cfg: ExperimentConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    log = run_simulation(
        cfg.scenario,
        cfg.dataplane,
        cfg.server,
        method=METHOD_NONE,
        collection_period=cfg.window,
        traffic_seed=cfg.seeds.traffic,
    )
    truth = ground_truth(cfg.scenario)
    samples = features.build_dataset(log.snapshots, truth, tick=cfg.dataplane.tick)
    if not samples:
        raise DataError("scenario produced no samples; check duration and window")

    dataset_path = out_dir / "dataset.csv"
    write_dataset_csv(samples, dataset_path)
    atomic_write_text(
        out_dir / "ground_truth.json",
        json.dumps({ip: lab.value for ip, lab in sorted(truth.items())}, indent=1),
    )
    echo_config(cfg, out_dir)

    n_attack = sum(1 for s in samples if s.label is Label.ATTACK)
    n_normal = len(samples) - n_attack
    print(f"dataset: {len(samples)} samples ({n_normal} normal, {n_attack} attack) -> {dataset_path}")
    return 0


def _train_seeds(cfg: ExperimentConfig) -> dict[ClassifierKind, int]:
    return {
        ClassifierKind.SVM: cfg.seeds.svm,
        ClassifierKind.RF: cfg.seeds.rf,
        ClassifierKind.SOM: cfg.seeds.som,
    }


def cmd_train(cfg: ExperimentConfig, dataset_path: Path, out_dir: Path, oracle_stub: bool) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    actions = enumerate_actions(cfg.feature_family)

    if oracle_stub:
        evaluate, stub_table = make_stub_evaluator(actions, seed=cfg.master_seed)
        result = run_training(actions, evaluate, cfg.weights, cfg.learning)
        brute = max(stub_table, key=lambda a: (reward(stub_table[a], cfg.weights), -actions.index(a)))
        print(
            f"oracle-stub optimum: mask={result.best_action.feature_mask:#06x} "
            f"kind={result.best_action.kind.name} q={result.best_q:.6f} "
            f"(brute-force argmax: mask={brute.feature_mask:#06x} kind={brute.kind.name})"
        )
        X = y = None
    else:
        try:
            samples = read_dataset_csv(dataset_path)
        except OSError as exc:
            raise DataError(f"cannot read dataset {dataset_path}: {exc}") from exc
        except ValueError as exc:
            raise DataError(f"dataset {dataset_path}: {exc}") from exc
        X, y = dataset_arrays(samples)
        if len(set(y.tolist())) < 2:
            raise DataError("dataset must contain both classes")
        evaluate = make_dataset_evaluator(
            X, y, k=cfg.learning.k_folds, seed=cfg.seeds.folds,
            hp=cfg.hyperparams, train_seeds=_train_seeds(cfg),
        )
        result = run_training(actions, evaluate, cfg.weights, cfg.learning)
        print(
            f"optimal action: mask={result.best_action.feature_mask:#06x} "
            f"kind={result.best_action.kind.name} fitness={result.best_q:.4f} "
            f"({result.episodes_run} episodes, converged={result.converged})"
        )

    atomic_write_text(out_dir / "qtable.json", json.dumps(qtable_to_doc(result.qtable, actions), indent=1))
    write_episode_log(result.log, out_dir / "episodes.csv")

    best = result.best_action
    m = result.best_metrics
    atomic_write_text(
        out_dir / TRAINING_SUMMARY,
        json.dumps(
            {
                "schema_version": REPORT_SCHEMA_VERSION,
                "method": "qmind",
                "oracle_stub": oracle_stub,
                "feature_mask": best.feature_mask,
                "kind": best.kind.name,
                "fitness": result.best_q,
                "precision": m.precision,
                "recall": m.recall,
                "f_score": m.f_score,
                "accuracy": m.accuracy,
                "false_alarm": m.false_alarm,
                "episodes": result.episodes_run,
                "converged": result.converged,
            },
            indent=1,
        ),
    )

    if not oracle_stub:
        # refit the winning action on the full dataset for the runtime phase
        seed = _train_seeds(cfg)[best.kind]
        model = classifiers.train(
            best.kind, features.project(X, best.feature_mask), y, seed=seed, hp=cfg.hyperparams
        )
        atomic_write_text(
            out_dir / "model.json",
            json.dumps(classifiers.model_to_doc(model, mask=best.feature_mask), indent=1),
        )
    echo_config(cfg, out_dir)
    return 0


def cmd_run_defense(cfg: ExperimentConfig, model_path: Optional[Path], method: str, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    defense_cfg = None
    sift_cfg = None
    if method == METHOD_QMIND:
        if model_path is None:
            raise ConfigError("run-defense with method qmind needs --model")
        try:
            with open(model_path) as fh:
                doc = json.load(fh)
            model, mask = classifiers.model_from_doc(doc)
        except OSError as exc:
            raise DataError(f"cannot read model {model_path}: {exc}") from exc
        except (ValueError, KeyError) as exc:
            raise DataError(f"model {model_path}: {exc}") from exc
        if mask is None:
            raise DataError(f"model {model_path}: missing feature_mask")
        try:
            defense_cfg = DefenseConfig(
                model=model,
                mask=mask,
                collection_period=cfg.defense.collection_period,
                block_duration=cfg.defense.block_duration,
                debounce=cfg.defense.debounce,
            )
        except ValueError as exc:
            raise DataError(f"model {model_path}: {exc}") from exc
    elif method == METHOD_SIFT:
        sift_cfg = cfg.sift.resolve(cfg.dataplane.capacity)

    log = run_simulation(
        cfg.scenario,
        cfg.dataplane,
        cfg.server,
        method=method,
        defense_cfg=defense_cfg,
        sift_cfg=sift_cfg,
        collection_period=cfg.defense.collection_period,
        traffic_seed=cfg.seeds.traffic,
        sift_seed=cfg.seeds.sift,
    )
    report = measure(log)
    write_report_csv(log, out_dir / "report.csv")
    atomic_write_text(out_dir / RUN_SUMMARY, json.dumps(summary_doc(report), indent=1))
    echo_config(cfg, out_dir)
    print(
        f"method={method} detection_time={report.detection_time} "
        f"drop_accuracy={report.drop_accuracy:.4f} overflow_events={report.overflow_count} "
        f"response_time_mean={report.response_time_mean:.4f}"
    )
    return 0


def cmd_report(run_dirs: Sequence[Path], out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, str, str, object]] = []
    found = False
    for run_dir in run_dirs:
        for name in (RUN_SUMMARY, TRAINING_SUMMARY):
            path = run_dir / name
            if not path.exists():
                continue
            found = True
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except (OSError, ValueError) as exc:
                raise DataError(f"cannot read {path}: {exc}") from exc
            if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
                raise DataError(
                    f"{path}: schema_version {doc.get('schema_version')} != {REPORT_SCHEMA_VERSION}"
                )
            method = doc.get("method", "unknown").upper()
            for metric in REPORT_METRICS:
                if metric in doc and doc[metric] is not None:
                    rows.append((run_dir.name, method, metric, doc[metric]))
            if name == RUN_SUMMARY and doc.get("time_to_overflow") is None:
                rows.append((run_dir.name, method, "time_to_overflow", ""))
    if not found:
        raise DataError("no summary.json / training_summary.json found in the given directories")
    rows.sort(key=lambda r: (r[0], r[1], REPORT_METRICS.index(r[2])))
    table = [("experiment", "method", "metric", "value")] + rows
    atomic_write_text(out_dir / "comparison.csv", _csv_text(table))
    print(f"report: {len(rows)} rows -> {out_dir / 'comparison.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmind", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="override the master seed")

    p = sub.add_parser("gen-dataset", help="simulate the scenario and write a labeled dataset CSV")
    add_common(p)

    p = sub.add_parser("train", help="derive the optimal (feature set, classifier) action")
    add_common(p)
    p.add_argument("--dataset", type=Path, default=None)
    p.add_argument("--oracle-stub", action="store_true",
                   help="train against fixed synthetic rewards (testing)")

    p = sub.add_parser("run-defense", help="run the scenario under a defense method")
    add_common(p)
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--method", choices=METHODS, default=METHOD_QMIND)

    p = sub.add_parser("report", help="consolidate run summaries into one comparison table")
    p.add_argument("runs", nargs="+", type=Path)
    p.add_argument("--out", required=True, type=Path)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.runs, args.out)
        cfg = load_config(args.config, seed_override=args.seed)
        if args.command == "gen-dataset":
            return cmd_gen_dataset(cfg, args.out)
        if args.command == "train":
            if not args.oracle_stub and args.dataset is None:
                raise ConfigError("train needs --dataset (or --oracle-stub)")
            return cmd_train(cfg, args.dataset, args.out, args.oracle_stub)
        if args.command == "run-defense":
            return cmd_run_defense(cfg, args.model, args.method, args.out)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
