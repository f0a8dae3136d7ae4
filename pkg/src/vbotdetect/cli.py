"""Command-line entry point: ``vbot <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .canfeatures import CAN_FEATURE_NAMES, can_preprocess, read_can_features, scan_can_csv, write_can_features
from .capture import read_trace, write_trace
from .detect import Policy, run_pipeline
from .errors import ConfigError, VbotError
from .experiment import ExperimentConfig, bundled_experiment, run_experiment, write_reports
from .flowmeter import assemble, flows_to_table, read_flows_csv, write_flows_csv
from .learn import Dataset, kfold_cv, load_model, make_trainer, save_model
from .preprocess import Scaler, preprocess
from .traffic import generate, get_scenario
from .traffic.can import CanScenarioConfig, gen_can_attacks, paper_can_config

CAN_SCENARIO = "can-attacks"


def _is_can_config(path: str) -> bool:
    p = Path(path)
    if not p.is_file():
        return False
    obj = json.loads(p.read_text(encoding="utf-8"))
    return obj.get("kind") == "can" or "benign_ids" in obj


def cmd_gen(args: argparse.Namespace) -> int:
    if args.scenario == CAN_SCENARIO:
        trace = gen_can_attacks(paper_can_config(args.seed))
    elif _is_can_config(args.scenario):
        cfg = CanScenarioConfig.load(args.scenario)
        cfg.seed = args.seed
        trace = gen_can_attacks(cfg)
    else:
        trace = generate(get_scenario(args.scenario, args.seed))
    write_trace(trace, args.out)
    print(f"{len(trace.records)} {trace.kind} records -> {args.out}")
    return 0


def _scale_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".scale.json")


def cmd_meter(args: argparse.Namespace) -> int:
    trace = read_trace(args.inp, "network")
    flows = assemble(trace, args.timeout)
    table = flows_to_table(flows)
    write_flows_csv(table, args.out)
    if len(table.labels):
        Scaler.fit(table.X[np.isfinite(table.X).all(axis=1)], table.feature_names, args.scaling).save(
            _scale_path(args.out))
    print(f"{len(table.labels)} flows -> {args.out}")
    return 0


def cmd_canscan(args: argparse.Namespace) -> int:
    table = scan_can_csv(args.inp, args.attack_label)
    write_can_features(table, args.out)
    print(f"{len(table)} frames -> {args.out} ({table.rejected} rejected)")
    return 0


def _read_training_table(path: str) -> tuple[np.ndarray, list[str], list[str], Scaler | None]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    if header.startswith("Flow ID"):
        table = read_flows_csv(path)
        side = _scale_path(path)
        scaler = Scaler.load(side) if side.is_file() else None
        return table.X, list(table.labels), list(table.feature_names), scaler
    table = read_can_features(path)
    return table.X, list(table.labels), list(table.feature_names), None


def cmd_train(args: argparse.Namespace) -> int:
    X, labels, names, scaler = _read_training_table(args.inp)
    if names == list(CAN_FEATURE_NAMES):
        pre, names = can_preprocess(X, names, args.scaling, drop_timestamp=args.drop_timestamp)
    else:
        pre = preprocess(X, names, args.scaling, scaler)
    labels = [labels[i] for i in pre.kept]
    data = Dataset.from_labels(pre.X, labels, names)
    params = json.loads(args.params) if args.params else {}
    trainer = make_trainer(args.model, seed=args.seed, **params)
    if args.cv:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cv = kfold_cv(data, trainer, args.cv, seed=args.seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        print(f"{args.cv}-fold CV accuracy {cv.mean:.6f} +/- {cv.std:.6f}")
    model = trainer(data)
    model.scaler = pre.scaler.to_json()
    save_model(model, args.out)
    print(f"{args.model} model on {len(data)} rows, {len(names)} features -> {args.out}")
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    if not args.trace and not args.can:
        raise ConfigError("give --trace, --can or both")
    policy = Policy.load(args.policy) if args.policy else Policy()
    trace = read_trace(args.trace, "network") if args.trace else None
    can = read_trace(args.can, "can") if args.can else None
    net_model = load_model(args.net_model) if args.net_model else None
    can_model = load_model(args.can_model) if args.can_model else None
    result = run_pipeline(trace, net_model, can_model, policy, can_trace=can)
    result.audit.write(args.audit)
    kinds: dict[str, int] = {}
    for a in result.actions:
        kinds[a.kind] = kinds.get(a.kind, 0) + 1
    print(f"classified {result.classified}; {len(result.alerts)} alerts; actions {dict(sorted(kinds.items()))}")
    return 0


def _experiment(name: str, seed: int) -> ExperimentConfig:
    if Path(name).is_file():
        obj = json.loads(Path(name).read_text(encoding="utf-8"))
        obj.setdefault("seed", seed)
        try:
            return ExperimentConfig(**obj)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc
    return bundled_experiment(name, seed)


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _experiment(args.experiment, args.seed)
    if args.can_csv:
        cfg.can_csv = list(args.can_csv)
    result = run_experiment(cfg)
    write_reports(result, args.out)
    rep = result.multiclass
    print(f"{cfg.name} seed {cfg.seed}: accuracy {rep.accuracy:.4f}, macro FPR {rep.macro['fpr']:.4f} "
          f"({result.rows} rows) -> {args.out}")
    failed = False
    for name, ok, detail in result.check():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed |= not ok
    return 1 if args.check and failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vbot", description="V2X botnet and in-vehicle attack detection toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic trace")
    p.add_argument("--scenario", required=True, help=f"bundled name, {CAN_SCENARIO!r}, or a JSON config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("meter", help="assemble flows and write the feature CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--timeout", type=float, default=600.0)
    p.add_argument("--scaling", choices=("minmax", "zscore"), default="minmax")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_meter)

    p = sub.add_parser("canscan", help="featurize a CAN CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--attack-label", default=None, help="label for injected rows of a public capture")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_canscan)

    p = sub.add_parser("train", help="train a classifier on a feature CSV")
    p.add_argument("--model", choices=("tree", "nb", "knn", "forest"), default="tree")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cv", type=int, default=0, help="report k-fold CV accuracy first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling", choices=("minmax", "zscore"), default="minmax")
    p.add_argument("--params", default=None, help="JSON object of model parameters")
    p.add_argument("--drop-timestamp", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("detect", help="run the detection and response pipeline")
    p.add_argument("--trace")
    p.add_argument("--can")
    p.add_argument("--net-model")
    p.add_argument("--can-model")
    p.add_argument("--policy")
    p.add_argument("--audit", required=True)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("eval", help="run a bundled experiment and write reports")
    p.add_argument("--experiment", required=True, help="paper-network, paper-can, or a JSON config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--can-csv", nargs="*", default=None)
    p.add_argument("--assert", dest="check", action="store_true", help="exit 1 if a threshold is missed")
    p.set_defaults(fn=cmd_eval)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (VbotError, OSError, json.JSONDecodeError) as exc:
        print(f"vbot {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
