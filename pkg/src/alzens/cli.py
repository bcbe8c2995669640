"""Command-line entry point: ``alzens <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline as P
from .config import config_schema, load_config
from .dataset import load_table_csv
from .errors import AlzensError
from .learners.models import load_model, save_model

log = logging.getLogger("alzens")


def _out(cfg, args) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _access(cfg, out):
    table = P.load_data(cfg)
    split = P.load_split(out)
    return P.SplitAccess(table, split, P.RunLog())


def cmd_split(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    table, split = P.stage_split(cfg, out)
    print(json.dumps(split.report(table), indent=1))


def cmd_transform(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    fitted, _, train_t, val_t = P.stage_transform(cfg, _access(cfg, out), out)
    print(f"{len(fitted.output_columns)} columns; dropped {list(fitted.dropped_columns)}")


def cmd_resample(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    train_t = load_table_csv(out / P.TRAIN_FILE, cfg.data.target)
    _, report = P.stage_resample(cfg, train_t, out)
    print(json.dumps({k: report[k] for k in ("before", "after_smote", "links_removed", "after")}))


def cmd_train(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    train_rs = load_table_csv(out / P.RESAMPLED_FILE, cfg.data.target)
    names = args.model or cfg.enabled_models
    P.stage_train(cfg, train_rs, names, out)
    print(f"trained {', '.join(names)}")


def _evaluation_table(args, cfg, out):
    if args.table:
        return load_table_csv(args.table, cfg.data.target if cfg else "Diagnosis")
    if args.split_name == "validation":
        return load_table_csv(out / P.VALIDATION_FILE, cfg.data.target)
    fitted = P.load_transform(out)
    access = _access(cfg, out)
    return fitted.apply(access.get(args.split_name, "evaluate"))


def cmd_evaluate(args):
    cfg = load_config(args.config) if args.config else None
    out = _out(cfg, args) if cfg else Path(args.out or ".")
    model_path = Path(args.model) if args.model else out / "models" / f"{args.model_name}.json"
    model = load_model(model_path)
    table = _evaluation_table(args, cfg, out)
    dest = Path(args.dest) if args.dest else out / args.split_name / (args.model_name or model_path.stem)
    report = P.evaluate_model(model, table, dest)
    print(json.dumps(report.to_dict()))


def cmd_explain(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    model = load_model(args.model)
    table = load_table_csv(args.table or out / P.VALIDATION_FILE, cfg.data.target)
    dest = Path(args.dest) if args.dest else out
    summary = P.stage_explain(cfg, model, table, dest, Path(args.model).stem)
    print(json.dumps(summary["top_features"], indent=1))


def cmd_cv(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    dev = _access(cfg, out).union(["train", "validation"], "cross_validation")
    for name in args.model or cfg.cv.models:
        result = P.stage_cv(cfg, dev, name, out, args.k)
        for metric, d in result.summary.items():
            print(f"{name} {metric}: {d['mean']:.4f} ± {d['std']:.4f}")


def cmd_sweep(args):
    cfg = load_config(args.config)
    out = _out(cfg, args)
    if args.model or args.seeds:
        sw = cfg.seed_sweep.model_copy(
            update={k: v for k, v in (("model", args.model), ("seeds", args.seeds)) if v}
        )
        cfg = cfg.model_copy(update={"seed_sweep": sw})
    train_rs = load_table_csv(out / P.RESAMPLED_FILE, cfg.data.target)
    val_t = load_table_csv(out / P.VALIDATION_FILE, cfg.data.target)
    name, result = P.stage_sweep(cfg, train_rs, val_t, out)
    print(json.dumps(result.to_dict(), indent=1))


def cmd_pipeline(args):
    cfg = load_config(args.config)
    out = Path(args.out) if args.out else None
    report = P.run_pipeline(cfg, out)
    print(f"selected {report['selected_model']}; test metrics {json.dumps(report['test_metrics'])}")


def cmd_synth(args):
    from .synthetic import make_synthetic, write_study_csv

    write_study_csv(make_synthetic(args.n, args.positives, args.seed), args.path)
    print(f"wrote {args.path}")


def cmd_schema(args):
    print(json.dumps(config_schema(), indent=1))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alzens", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, config=True):
        sp = sub.add_parser(name, help=help_)
        if config:
            sp.add_argument("--config", required=True, help="YAML or JSON pipeline config")
            sp.add_argument("--out", help="output directory (overrides config and env)")
        sp.set_defaults(func=fn)
        return sp

    add("split", cmd_split, "stratified train/validation/test split -> split.json")
    add("transform", cmd_transform, "fit feature pipeline on train -> transform.json, train.csv, validation.csv")
    add("resample", cmd_resample, "SMOTE-Tomek on train.csv -> train_resampled.csv")
    sp = add("train", cmd_train, "fit models on train_resampled.csv -> models/<name>.json")
    sp.add_argument("--model", action="append", help="model name from the config (repeatable)")

    sp = add("evaluate", cmd_evaluate, "score a saved model -> metrics.json, roc.csv, confusion.csv", config=False)
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.add_argument("--model", help="model JSON path")
    sp.add_argument("--model-name", help="model name inside <out>/models")
    sp.add_argument("--table", help="already-transformed CSV to score")
    sp.add_argument("--split-name", default="validation", choices=["validation", "test"])
    sp.add_argument("--dest", help="directory for the evaluation files")

    sp = add("explain", cmd_explain, "SHAP + importances for a saved model -> shap.csv, importance.csv")
    sp.add_argument("--model", required=True)
    sp.add_argument("--table")
    sp.add_argument("--dest")

    sp = add("cv", cmd_cv, "stratified k-fold CV on train+validation -> cv/<name>.json")
    sp.add_argument("--model", action="append")
    sp.add_argument("-k", type=int)

    sp = add("sweep-seeds", cmd_sweep, "per-seed validation sweep -> sweep.json")
    sp.add_argument("--model")
    sp.add_argument("--seeds", type=int, nargs="+")

    add("pipeline", cmd_pipeline, "run every stage end to end")

    sp = add("synth", cmd_synth, "write a synthetic study-shaped CSV", config=False)
    sp.add_argument("path")
    sp.add_argument("--n", type=int, default=2149)
    sp.add_argument("--positives", type=int, default=760)
    sp.add_argument("--seed", type=int, default=0)

    add("config-schema", cmd_schema, "print the config JSON schema", config=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except AlzensError as exc:
        print(f"alzens {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"alzens {args.command}: runtime error: {exc!r}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
