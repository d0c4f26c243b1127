"""Classification and fairness metrics.

Rates whose denominator is empty are reported as ``nan`` rather than 0 so
that degenerate data never reads as perfectly fair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset

RATE_KINDS = ("FPR", "FNR", "TPR", "TNR")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int
    by_sensitive: tuple["ConfusionCounts", "ConfusionCounts"] | None = None

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsBundle:
    accuracy: float
    fpr: float
    fnr: float
    tpr: float
    tnr: float
    recall: float
    counts: ConfusionCounts

    def to_dict(self) -> dict:
        c = self.counts
        return {
            "Accuracy": self.accuracy,
            "FPR": self.fpr,
            "FNR": self.fnr,
            "TPR": self.tpr,
            "TNR": self.tnr,
            "Recall": self.recall,
            "TP": c.tp,
            "FP": c.fp,
            "TN": c.tn,
            "FN": c.fn,
        }


def _pm1(v, name) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if not np.all(np.isin(v, (-1, 1))):
        raise ValueError(f"{name} must be coded -1/+1")
    return v.astype(int)


def _tally(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    return ConfusionCounts(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        tn=int(np.sum((y_true == -1) & (y_pred == -1))),
        fp=int(np.sum((y_true == -1) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == -1))),
    )


def confusion_counts(y_true, y_pred, s=None) -> ConfusionCounts:
    y_true = _pm1(y_true, "y_true")
    y_pred = _pm1(y_pred, "y_pred")
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise ValueError("cannot score an empty prediction vector")
    total = _tally(y_true, y_pred)
    if s is None:
        return total
    s = np.asarray(s)
    if len(s) != len(y_true):
        raise ValueError("sensitive vector length does not match labels")
    split = tuple(_tally(y_true[s == k], y_pred[s == k]) for k in (0, 1))
    return ConfusionCounts(total.tp, total.tn, total.fp, total.fn, split)


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def final_metrics(y_true, y_pred) -> MetricsBundle:
    c = confusion_counts(y_true, y_pred)
    fpr = _ratio(c.fp, c.fp + c.tn)
    fnr = _ratio(c.fn, c.fn + c.tp)
    return MetricsBundle(
        accuracy=(c.tp + c.tn) / c.total,
        fpr=fpr,
        fnr=fnr,
        tpr=1.0 - fnr,
        tnr=1.0 - fpr,
        recall=1.0 - fnr,
        counts=c,
    )


def disparate_impact(d: Dataset, y_pred, sf: str) -> float:
    """One minus the smaller of the positive-rate ratio between s=0 and s=1 and its inverse."""
    y_pred = _pm1(y_pred, "y_pred")
    s = d.s(sf)
    if len(y_pred) != len(s):
        raise ValueError("prediction length does not match dataset")
    n0, n1 = int(np.sum(s == 0)), int(np.sum(s == 1))
    if n0 == 0 or n1 == 0:
        raise ValueError(f"sensitive feature {sf!r} has an empty category")
    k0 = int(np.sum(y_pred[s == 0] == 1))
    k1 = int(np.sum(y_pred[s == 1] == 1))
    if k0 == 0 and k1 == 0:
        return 0.0
    if k0 == 0 or k1 == 0:
        return 1.0
    di = (k0 / n0) / (k1 / n1)
    return 1.0 - min(di, 1.0 / di)


# kind -> (true label of the defining set, predicted label counted, set name stem)
_RATE_DEF = {
    "FPR": (-1, 1, "DN"),
    "TNR": (-1, -1, "DN"),
    "FNR": (1, -1, "DP"),
    "TPR": (1, 1, "DP"),
}


def group_rate(d: Dataset, y_true, y_pred, sf: str, kind: str, category: int) -> float:
    try:
        label, counted, stem = _RATE_DEF[kind]
    except KeyError:
        raise ValueError(f"unknown rate kind {kind!r}; expected one of {RATE_KINDS}") from None
    y_true = _pm1(y_true, "y_true")
    y_pred = _pm1(y_pred, "y_pred")
    s = d.s(sf)
    if not len(y_true) == len(y_pred) == len(s):
        raise ValueError("label, prediction and dataset lengths differ")
    members = (s == category) & (y_true == label)
    size = int(np.sum(members))
    if size == 0:
        raise ValueError(f"set {stem}_{category} is empty for sensitive feature {sf!r}")
    return int(np.sum(y_pred[members] == counted)) / size


def rate_gap(d: Dataset, y_true, y_pred, sf: str, kind: str) -> float:
    """Absolute difference of a confusion rate between the two sensitive categories."""
    r0 = group_rate(d, y_true, y_pred, sf, kind, 0)
    r1 = group_rate(d, y_true, y_pred, sf, kind, 1)
    return abs(r0 - r1)


def disparate_mistreatment(d: Dataset, y_true, y_pred, sf: str) -> float:
    return (rate_gap(d, y_true, y_pred, sf, "FPR") + rate_gap(d, y_true, y_pred, sf, "FNR")) / 2


def fairness_metric(name: str, d: Dataset, y_true, y_pred, sf: str) -> float:
    """Dispatch by metric name: DI, DM, or one of the rate gaps."""
    name = name.upper()
    if name == "DI":
        return disparate_impact(d, y_pred, sf)
    if name == "DM":
        return disparate_mistreatment(d, y_true, y_pred, sf)
    return rate_gap(d, y_true, y_pred, sf, name)


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except ValueError:
        return math.nan


def metrics_report(d: Dataset, y_true, y_pred, sf_names) -> dict:
    """Flat report: the ten appendix fields plus DI, DM and the rate gaps per sensitive feature.

    Fairness entries that cannot be computed on this data are ``nan``.
    """
    report = final_metrics(y_true, y_pred).to_dict()
    for sf in sf_names:
        report[f"DI[{sf}]"] = _safe(disparate_impact, d, y_pred, sf)
        report[f"DM[{sf}]"] = _safe(disparate_mistreatment, d, y_true, y_pred, sf)
        for kind in RATE_KINDS:
            report[f"{kind}_gap[{sf}]"] = _safe(rate_gap, d, y_true, y_pred, sf, kind)
    return report
