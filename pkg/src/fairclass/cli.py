"""Command-line entry point: generate, fit-predict, evaluate, simulate and replay.

Exit codes: 0 when the command completed (solver statuses such as
``time_limit`` are reported, not raised), 1 for usage or invalid input,
2 for file-system errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pandas as pd

from . import simulate as sim
from .core import read_csv
from .metrics import metrics_report
from .pipeline import config_from_dict, run_pipeline, run_pipeline_mixed
from .synth import MIXED_BETA, REGULAR_BETA, SynthSpec, gen_mixed, gen_regular

EXIT_USAGE = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _fraction(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return value


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _clean(report: dict) -> dict:
    # JSON has no NaN; undefined metrics become null
    return {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in report.items()}


# generate -------------------------------------------------------------------


def cmd_generate(args) -> int:
    family = args.family.upper()
    mixed = args.K is not None
    beta = MIXED_BETA if mixed else REGULAR_BETA
    spec = SynthSpec(
        n=args.n, beta_true=beta, family=family, K=args.K, sigma_g=args.sigma_g,
        seed=args.seed, split_frac=args.split, threshold_labels=args.threshold_labels,
    )
    if mixed:
        train, test, _, _ = gen_mixed(spec)
    else:
        train, test = gen_regular(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train.to_frame().to_csv(out / "train.csv", index=False)
    test.to_frame().to_csv(out / "test.csv", index=False)
    manifest = {
        "spec": asdict(spec),
        "files": {"train": "train.csv", "test": "test.csv"},
        "rows": {"train": train.n, "test": test.n},
        "label_col": "y",
        "sensitive": ["s"],
        "group_col": "group" if mixed else None,
    }
    _dump_json(manifest, out / "manifest.json")
    print(out / "manifest.json")
    return 0


# fit-predict ----------------------------------------------------------------

_FLAG_KEYS = {
    "family": "family", "constraint": "constraint", "c": "c", "mu": "mu", "lam": "lam",
    "pre": "pre", "R": "R", "post": "post", "sf": "sf", "sfpre": "sfpre",
    "sfpost": "sfpost", "seed": "seed", "time_limit": "time_limit",
}


def _merged_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            cfg[key] = value
    return cfg


def _read(path, label_col, sf_names, group_col, required_labels=True):
    cols = pd.read_csv(path, nrows=0).columns
    if label_col not in cols:
        if required_labels:
            raise UsageError(f"{path}: no label column {label_col!r}")
        label_col = None
    group_col = group_col if group_col in cols else None
    return read_csv(path, label_col=label_col, sf_names=sf_names, group_col=group_col)


def cmd_fit_predict(args) -> int:
    raw = _merged_config(args)
    cfg = config_from_dict(raw)
    spec = cfg.inprocess
    sf_names = tuple(dict.fromkeys(cfg.SF + tuple(x for x in (cfg.SFpre, cfg.SFpost) if x)))
    group_col = args.group_col if spec.mixed else None
    train = _read(args.train, args.label_col, sf_names, group_col)
    test = _read(args.test, args.label_col, sf_names, group_col, required_labels=False)
    if spec.mixed:
        res = run_pipeline_mixed(train, None, test, cfg)
    else:
        res = run_pipeline(train, None, test, cfg)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"pred": res.classifications}).to_csv(out / "classifications.csv", index=False)
    train_pred = np.where(res.probs_train >= res.B, 1, -1)
    result = {
        "config": raw,
        "status": res.status,
        "B": res.B,
        "train_metrics": _clean(metrics_report(train, train.labels, train_pred, sf_names)),
        "classifications": "classifications.csv",
    }
    if test.labels is not None:
        result["test_metrics"] = _clean(metrics_report(test, test.labels, res.classifications, sf_names))
    if res.cutoff is not None:
        res.cutoff.write_trace(out / "cutoff_trace.csv")
        result["cutoff_trace"] = "cutoff_trace.csv"
        result["cutoff_fallback"] = res.cutoff.fallback
    if res.selection is not None:
        result["resampling"] = {
            "chosen_run": res.selection.run_index,
            "metric": res.selection.metric,
            "per_run": [None if np.isnan(v) else v for v in res.selection.per_run],
        }
    if hasattr(res.model, "to_dict"):
        _dump_json(res.model.to_dict(), out / "model.json")
        result["model"] = "model.json"
    _dump_json(result, out / "result.json")
    print(out / "result.json")
    return 0


# evaluate -------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    d = _read(args.data, args.label_col, tuple(args.sf), None)
    pred = pd.read_csv(args.pred)[args.pred_col].to_numpy()
    if len(pred) != d.n:
        raise UsageError(f"{args.pred} has {len(pred)} rows but {args.data} has {d.n}")
    report = _clean(metrics_report(d, d.labels, pred, tuple(args.sf)))
    text = json.dumps(report, indent=2, default=_jsonable)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


# simulate / replay ----------------------------------------------------------


def _grid_from_args(args) -> sim.ScenarioGrid:
    return sim.ScenarioGrid(
        mixed=args.mixed, runs=args.runs, n=args.n, split=args.split, c=args.c,
        mu=args.mu, lam=args.lam, base_seed=args.seed, time_limit=args.time_limit,
    )


def cmd_simulate(args) -> int:
    grid = _grid_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = None if args.no_artifacts else out / "artifacts"
    results = sim.run_grid(grid, workers=args.workers, artifacts=artifacts)
    sim.write_results(results, out / "results.csv")
    sim.write_timings(results, out / "timings.csv")
    _dump_json(asdict(grid), out / "grid.json")
    failed = sum(r.status.startswith("failed") for r in results)
    print(f"{len(results)} runs, {failed} failed -> {out / 'results.csv'}")
    return 0


def cmd_replay(args) -> int:
    out = Path(args.dir)
    grid = sim.ScenarioGrid(**json.loads((out / "grid.json").read_text()))
    problems = sim.replay(out / "results.csv", out / "artifacts", grid)
    for p in problems:
        print(p)
    print("replay ok" if not problems else f"{len(problems)} mismatches")
    return 0 if not problems else EXIT_USAGE


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairclass", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic train/test CSVs and a manifest")
    g.add_argument("--family", choices=["lr", "svm", "LR", "SVM"], default="lr")
    g.add_argument("--n", type=_positive_int, default=10_000)
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--split", type=_fraction, default=0.01)
    g.add_argument("--K", type=_positive_int, default=None, help="number of groups (mixed data)")
    g.add_argument("--sigma-g", type=float, default=3.0)
    g.add_argument("--threshold-labels", action="store_true")
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit-predict", help="run the three-phase pipeline on CSV data")
    f.add_argument("--train", required=True)
    f.add_argument("--test", required=True)
    f.add_argument("--config", help="JSON file with the same keys as the flags")
    f.add_argument("--family", choices=["LR", "SVM", "MELR", "MESVM", "lr", "svm", "melr", "mesvm"])
    f.add_argument("--constraint", choices=["none", "di", "fnr", "fpr", "dm", "DI", "FNR", "FPR", "DM"])
    f.add_argument("--c", type=float)
    f.add_argument("--mu", type=float)
    f.add_argument("--lam", type=float)
    f.add_argument("--pre", choices=["id", "di"])
    f.add_argument("--R", type=_positive_int)
    f.add_argument("--post", choices=["none", "di", "dm", "fpr", "fnr"])
    f.add_argument("--sf", nargs="+")
    f.add_argument("--sfpre")
    f.add_argument("--sfpost")
    f.add_argument("--seed", type=int)
    f.add_argument("--time-limit", type=float)
    f.add_argument("--label-col", default="y")
    f.add_argument("--group-col", default="group")
    f.add_argument("--out", default=".")
    f.set_defaults(func=cmd_fit_predict)

    e = sub.add_parser("evaluate", help="metrics for stored classifications")
    e.add_argument("--data", required=True, help="CSV with labels and sensitive columns")
    e.add_argument("--pred", required=True, help="CSV with a column of -1/+1 predictions")
    e.add_argument("--pred-col", default="pred")
    e.add_argument("--sf", nargs="+", required=True)
    e.add_argument("--label-col", default="y")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("simulate", help="run the scenario grid and write a tidy CSV")
    s.add_argument("--runs", type=_positive_int, default=100)
    s.add_argument("--n", type=_positive_int, default=10_000)
    s.add_argument("--split", type=_fraction, default=0.01)
    s.add_argument("--mixed", action="store_true")
    s.add_argument("--c", type=float, default=0.1)
    s.add_argument("--mu", type=float, default=0.1)
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--no-artifacts", action="store_true")
    s.add_argument("--out", default="simulation")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("replay", help="recompute a simulation's metrics from its artifacts")
    r.add_argument("--dir", required=True)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except OSError as err:
        print(f"fairclass: {err}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"fairclass: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
