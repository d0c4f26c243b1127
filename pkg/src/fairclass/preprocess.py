"""Preprocessing: four-subset resampling and best-of-R selection."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, partition
from .metrics import fairness_metric

log = logging.getLogger(__name__)

SUBSETS = ("dn0", "dn1", "dp0", "dp1")


@dataclass(frozen=True, eq=False)
class ResampleRun:
    resampled: Dataset
    rng_seed: int
    J: int
    rows: np.ndarray


def id_pre(d: Dataset) -> Dataset:
    return d


def di_resample(d: Dataset, sf: str, seed: int) -> ResampleRun:
    """Draw J rows with replacement from each label x sensitive-category subset.

    J is the size of the smallest subset, so the output has 4*J rows and a
    positive rate of exactly 1/2 inside each sensitive category.
    """
    parts = partition(d, sf)
    sizes = parts.sizes()
    for name in SUBSETS:
        if sizes[name] == 0:
            raise ValueError(f"subset {name} is empty for sensitive feature {sf!r}")
    J = min(sizes.values())
    rng = np.random.default_rng(seed)
    rows = np.concatenate([rng.choice(getattr(parts, name), size=J, replace=True) for name in SUBSETS])
    return ResampleRun(d.take(rows), seed, J, rows)


@dataclass(eq=False)
class Selection:
    """Outcome of the best-of-R loop."""

    model: object
    run_index: int
    metric: str
    metric_value: float
    run: ResampleRun
    per_run: list[float] = field(default_factory=list)


def resample_select(
    d: Dataset,
    sf: str,
    inproc: Callable[[Dataset], object],
    metric: str = "DI",
    R: int = 1,
    seed: int = 42,
) -> Selection:
    """Fit on R resampled copies and keep the model that is fairest on the full data.

    ``inproc`` maps a training dataset to a fitted model exposing
    ``predict_proba(dataset)``. Each model is scored at the 0.5 cut-off on the
    original (not resampled) rows. Run ``r`` (1-based) samples with seed
    ``seed + r``; ties go to the earliest run. Runs whose fit raises are
    skipped with a warning.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    y = d.require_labels()
    best = None
    scores: list[float] = []
    last_error: Exception | None = None
    for r in range(1, R + 1):
        run = di_resample(d, sf, seed + r)
        try:
            model = inproc(run.resampled)
        except Exception as err:  # noqa: BLE001 - a failed fit skips the run
            log.warning("resampling run %d failed: %s", r, err)
            last_error = err
            scores.append(math.nan)
            continue
        pred = np.where(model.predict_proba(d) >= 0.5, 1, -1)
        value = fairness_metric(metric, d, y, pred, sf)
        scores.append(value)
        if best is None or value < best.metric_value:
            best = Selection(model, r, metric.upper(), value, run)
    if best is None:
        raise last_error
    best.per_run = scores
    return best
