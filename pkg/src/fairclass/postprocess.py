"""Post-processing: turn probabilities into labels, optionally with a tuned cut-off."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .metrics import fairness_metric

log = logging.getLogger(__name__)

CUTOFFS = tuple(k / 100 for k in range(1, 100))
POSTPROCESSORS = {"di_post": "DI", "dm_post": "DM", "fpr_post": "FPR", "fnr_post": "FNR"}


@dataclass(frozen=True)
class SweepPoint:
    v: float
    accuracy: float
    fairness: float
    admissible: bool


@dataclass(frozen=True)
class CutoffChoice:
    B: float
    baseline_ac: float
    metric: str = "DI"
    trace: tuple[SweepPoint, ...] = field(default=(), repr=False)
    fallback: bool = False

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v", "AC_v", "fm_v", "admissible"])
            for p in self.trace:
                w.writerow([f"{p.v:.2f}", p.accuracy, p.fairness, int(p.admissible)])


def classify(probs, cutoff: float = 0.5) -> np.ndarray:
    return np.where(np.asarray(probs) >= cutoff, 1, -1)


def id_post(probs_new) -> np.ndarray:
    return classify(probs_new, 0.5)


def apply_cutoff(probs_new, choice: CutoffChoice) -> np.ndarray:
    return classify(probs_new, choice.B)


def _score(v, acc, fm):
    # ties: larger AC - fm, then closer to 0.5, then smaller v
    return (round(acc - fm, 12), -round(abs(v - 0.5), 12), -v)


def cutoff_sweep(
    probs_train,
    y_train,
    d_train: Dataset,
    sf: str,
    metric: str = "DI",
    guard: float = 0.05,
) -> CutoffChoice:
    """Pick the cut-off maximising accuracy minus unfairness on the training data.

    Only cut-offs whose accuracy is at least ``(1 - guard)`` times the accuracy
    at 0.5 are admissible. A cut-off where the metric is undefined is never
    admissible.
    """
    y = np.asarray(y_train)
    probs = np.asarray(probs_train, float)
    if len(probs) != len(y) or len(y) != d_train.n:
        raise ValueError("probabilities, labels and training data differ in length")
    s = d_train.s(sf)
    if not (np.any(s == 0) and np.any(s == 1)):
        raise ValueError(f"training data lacks one category of {sf!r}")

    baseline = float(np.mean(classify(probs, 0.5) == y))
    floor = (1.0 - guard) * baseline
    trace = []
    best = None
    for v in CUTOFFS:
        pred = classify(probs, v)
        acc = float(np.mean(pred == y))
        try:
            fm = float(fairness_metric(metric, d_train, y, pred, sf))
        except ValueError:
            fm = math.nan
        ok = not math.isnan(fm) and acc >= floor - 1e-12
        trace.append(SweepPoint(v, acc, fm, ok))
        if ok and (best is None or _score(v, acc, fm) > _score(*best)):
            best = (v, acc, fm)
    if best is None:
        log.warning("%s is undefined at every cut-off; keeping 0.5", metric)
        return CutoffChoice(0.5, baseline, metric.upper(), tuple(trace), fallback=True)
    return CutoffChoice(best[0], baseline, metric.upper(), tuple(trace))
