"""Scenario grid harness: paired simulation runs written as a tidy long-format CSV."""

from __future__ import annotations

import csv
import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Dataset, read_csv
from .metrics import final_metrics, metrics_report
from .optim import ModelSpec
from .pipeline import PipelineConfig, run_pipeline, run_pipeline_mixed
from .solver import SolverOptions
from .synth import MIXED_BETA, REGULAR_BETA, SENSITIVE, SynthSpec, gen_mixed, gen_regular

log = logging.getLogger(__name__)

PRE_OPTIONS = (("id", 1), ("di", 1), ("di", 5))
CONSTRAINT_OPTIONS = ("none", "DI", "FNR", "FPR", "DM")
POST_OPTIONS = ("none", "di", "dm")
METRICS = ("accuracy", "DI", "DM", "FPR_gap", "FNR_gap", "TPR_gap", "TNR_gap")
COLUMNS = (
    "scenario_id", "setting", "pre", "inproc", "post", "run",
    "data_seed", "seed", "metric", "value", "status",
)


@dataclass(frozen=True)
class Scenario:
    index: int
    setting: str
    pre: str
    R: int
    family: str
    constraint: str
    post: str

    @property
    def scenario_id(self) -> str:
        return f"{self.setting[0]}{self.index:03d}"

    @property
    def pre_label(self) -> str:
        return "id" if self.pre == "id" else f"di_R{self.R}"

    @property
    def inproc_label(self) -> str:
        return f"{self.family}_{self.constraint}"

    @property
    def data_family(self) -> str:
        return "SVM" if self.family.endswith("SVM") else "LR"


@dataclass(frozen=True)
class ScenarioGrid:
    """The cross product of phase options.

    The regular grid has 3 preprocessors x 10 in-processors x 3
    post-processors; the mixed grid drops preprocessing and has 30.
    """

    mixed: bool = False
    runs: int = 100
    n: int = 10_000
    split: float = 0.01
    K: int = 100
    sigma_g: float = 3.0
    c: float = 0.1
    mu: float = 0.1
    lam: float = 1.0
    base_seed: int = 1
    time_limit: float = 60.0

    def scenarios(self) -> list[Scenario]:
        setting = "mixed" if self.mixed else "regular"
        families = ("MELR", "MESVM") if self.mixed else ("LR", "SVM")
        pres = (("id", 1),) if self.mixed else PRE_OPTIONS
        combos = itertools.product(pres, families, CONSTRAINT_OPTIONS, POST_OPTIONS)
        return [
            Scenario(k + 1, setting, pre, R, fam, con, post)
            for k, ((pre, R), fam, con, post) in enumerate(combos)
        ]


def data_seed(base_seed: int, run: int) -> int:
    # shared by every scenario so that scenario comparisons are paired
    return int(np.random.SeedSequence([base_seed, run]).generate_state(1)[0])


def algo_seed(base_seed: int, scenario: int, run: int) -> int:
    return int(np.random.SeedSequence([base_seed, scenario, run]).generate_state(1)[0])


def synth_spec(grid: ScenarioGrid, family: str, run: int) -> SynthSpec:
    seed = data_seed(grid.base_seed, run)
    if grid.mixed:
        return SynthSpec(grid.n, MIXED_BETA, family, grid.K, grid.sigma_g, seed=seed, split_frac=grid.split)
    return SynthSpec(grid.n, REGULAR_BETA, family, seed=seed, split_frac=grid.split)


def make_data(grid: ScenarioGrid, family: str, run: int) -> tuple[Dataset, Dataset]:
    spec = synth_spec(grid, family, run)
    if grid.mixed:
        train, test, _, _ = gen_mixed(spec)
        return train, test
    return gen_regular(spec)


def pipeline_config(grid: ScenarioGrid, sc: Scenario, seed: int) -> PipelineConfig:
    return PipelineConfig(
        inprocess=ModelSpec(sc.family, sc.constraint, mu=grid.mu, lam=grid.lam),
        preprocess=f"{sc.pre}_pre",
        postprocess="id_post" if sc.post == "none" else f"{sc.post}_post",
        SF=(SENSITIVE,),
        c=grid.c,
        R=sc.R,
        seed=seed,
        solver=SolverOptions(max_seconds=grid.time_limit),
    )


def score(test: Dataset, pred) -> dict[str, float]:
    """The seven reported metrics on one set of test classifications."""
    y = test.require_labels()
    report = metrics_report(test, y, pred, (SENSITIVE,))
    out = {"accuracy": final_metrics(y, pred).accuracy}
    for name in METRICS[1:]:
        out[name] = report[f"{name}[{SENSITIVE}]"]
    return out


@dataclass
class JobResult:
    scenario: Scenario
    run: int
    data_seed: int
    seed: int
    status: str
    metrics: dict[str, float] = field(default_factory=dict)
    solve_seconds: list[float] = field(default_factory=list)
    B: float = 0.5

    def rows(self) -> list[dict]:
        sc = self.scenario
        base = {
            "scenario_id": sc.scenario_id, "setting": sc.setting, "pre": sc.pre_label,
            "inproc": sc.inproc_label, "post": sc.post, "run": self.run,
            "data_seed": self.data_seed, "seed": self.seed,
        }
        if not self.metrics:
            return [{**base, "metric": "error", "value": math.nan, "status": self.status}]
        return [
            {**base, "metric": m, "value": self.metrics[m], "status": self.status}
            for m in METRICS
        ]


def data_paths(artifacts: Path, grid: ScenarioGrid, family: str, run: int) -> tuple[Path, Path]:
    stem = f"{'mixed' if grid.mixed else 'regular'}_{family}_run{run:03d}"
    return artifacts / "data" / f"{stem}_train.csv", artifacts / "data" / f"{stem}_test.csv"


def prediction_path(artifacts: Path, sc: Scenario, run: int) -> Path:
    return artifacts / "pred" / f"{sc.scenario_id}_run{run:03d}.csv"


def _write_data(artifacts: Path, grid: ScenarioGrid, family: str, run: int, train, test) -> None:
    for path, d in zip(data_paths(artifacts, grid, family, run), (train, test)):
        if not path.exists():
            tmp = path.with_suffix(f".{os.getpid()}.tmp")
            d.to_frame().to_csv(tmp, index=False)
            os.replace(tmp, path)


def run_job(grid: ScenarioGrid, sc: Scenario, run: int, artifacts: str | None = None) -> JobResult:
    dseed = data_seed(grid.base_seed, run)
    seed = algo_seed(grid.base_seed, sc.index, run)
    try:
        train, test = make_data(grid, sc.data_family, run)
        cfg = pipeline_config(grid, sc, seed)
        if grid.mixed:
            res = run_pipeline_mixed(train, None, test, cfg)
        else:
            res = run_pipeline(train, None, test, cfg)
    except Exception as err:  # noqa: BLE001 - a failed run becomes a status row
        log.warning("scenario %s run %d failed: %s", sc.scenario_id, run, err)
        return JobResult(sc, run, dseed, seed, f"failed: {type(err).__name__}: {err}")
    if artifacts is not None:
        root = Path(artifacts)
        _write_data(root, grid, sc.data_family, run, train, test)
        np.savetxt(prediction_path(root, sc, run), res.classifications, fmt="%d", header="pred", comments="")
    return JobResult(
        sc, run, dseed, seed, res.status, score(test, res.classifications), res.solve_seconds, res.B
    )


def _job(args):
    return run_job(*args)


def run_grid(
    grid: ScenarioGrid,
    workers: int = 1,
    artifacts: str | Path | None = None,
    scenarios: list[Scenario] | None = None,
) -> list[JobResult]:
    """Run every (scenario, run) job; results come back in (scenario, run) order."""
    scenarios = grid.scenarios() if scenarios is None else scenarios
    if artifacts is not None:
        for sub in ("data", "pred"):
            (Path(artifacts) / sub).mkdir(parents=True, exist_ok=True)
        artifacts = str(artifacts)
    jobs = [(grid, sc, r, artifacts) for sc in scenarios for r in range(1, grid.runs + 1)]
    if workers <= 1:
        results = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return sorted(results, key=lambda r: (r.scenario.index, r.run))


def write_results(results: list[JobResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COLUMNS)
        w.writeheader()
        for res in results:
            for row in res.rows():
                row["value"] = repr(float(row["value"]))
                w.writerow(row)


def write_timings(results: list[JobResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario_id", "run", "n_solves", "max_solve_seconds"])
        for res in results:
            secs = res.solve_seconds
            w.writerow([res.scenario.scenario_id, res.run, len(secs), max(secs) if secs else 0.0])


def replay(results_csv, artifacts, grid: ScenarioGrid, tol: float = 1e-12) -> list[str]:
    """Recompute every metric from stored classifications and test CSVs.

    Returns a list of mismatch descriptions; empty means the CSV is reproducible.
    """
    import pandas as pd

    artifacts = Path(artifacts)
    by_id = {sc.scenario_id: sc for sc in grid.scenarios()}
    table = pd.read_csv(results_csv)
    problems: list[str] = []
    tests: dict[tuple[str, int], Dataset] = {}
    for (sid, run), rows in table.groupby(["scenario_id", "run"], sort=False):
        if (rows["metric"] == "error").all():
            continue
        sc = by_id[sid]
        key = (sc.data_family, int(run))
        if key not in tests:
            _, test_path = data_paths(artifacts, grid, sc.data_family, int(run))
            group_col = "group" if grid.mixed else None
            tests[key] = read_csv(test_path, label_col="y", sf_names=(SENSITIVE,), group_col=group_col)
        pred = np.loadtxt(prediction_path(artifacts, sc, int(run)), skiprows=1, dtype=int, ndmin=1)
        fresh = score(tests[key], pred)
        for metric, value in zip(rows["metric"], rows["value"]):
            want = fresh[metric]
            same = (math.isnan(value) and math.isnan(want)) or abs(value - want) <= tol
            if not same:
                problems.append(f"{sid} run {run} {metric}: stored {value}, recomputed {want}")
    return problems


def with_overrides(grid: ScenarioGrid, **kwargs) -> ScenarioGrid:
    return replace(grid, **{k: v for k, v in kwargs.items() if v is not None})
