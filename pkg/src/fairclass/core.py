"""Data model shared by every phase: datasets, ingestion and sensitive/label partitions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

INTERCEPT = "intercept"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix with a leading intercept column plus labels and sensitive features.

    ``labels`` are coded -1/+1 and may be ``None`` for prediction-only data.
    ``sensitive`` maps a feature name to its 0/1 vector; the same column also
    stays inside ``features``. ``group_ids`` holds one string label per row
    when the data is grouped.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    sensitive: Mapping[str, np.ndarray] = field(default_factory=dict)
    group_ids: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        n = X.shape[0]
        if n and not np.all(X[:, 0] == 1.0):
            raise ValueError("column 0 of features must be the all-ones intercept")
        object.__setattr__(self, "features", _frozen(X))

        names = tuple(self.feature_names) or (INTERCEPT,) + tuple(
            f"x{k}" for k in range(1, X.shape[1])
        )
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "feature_names", names)

        if self.labels is not None:
            y = np.asarray(self.labels, dtype=float)
            if y.shape != (n,):
                raise ValueError(f"labels have shape {y.shape}, expected ({n},)")
            if not np.all(np.isin(y, (-1.0, 1.0))):
                raise ValueError("labels must be coded -1/+1")
            object.__setattr__(self, "labels", _frozen(y.astype(int)))

        sens = {}
        for name, col in self.sensitive.items():
            s = np.asarray(col)
            if s.shape != (n,):
                raise ValueError(f"sensitive feature {name!r} has wrong length")
            if not np.all(np.isin(s, (0, 1))):
                raise ValueError(f"sensitive feature {name!r} is not binary 0/1")
            sens[name] = _frozen(s.astype(int))
        object.__setattr__(self, "sensitive", sens)

        if self.group_ids is not None:
            g = np.asarray(self.group_ids).astype(str)
            if g.shape != (n,):
                raise ValueError("group_ids must have one entry per row")
            object.__setattr__(self, "group_ids", _frozen(g))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        """Width of the design matrix including the intercept (p + 1)."""
        return self.features.shape[1]

    @property
    def groups(self) -> list[str]:
        """Distinct group labels in order of first appearance."""
        if self.group_ids is None:
            return []
        _, first = np.unique(self.group_ids, return_index=True)
        return [str(self.group_ids[i]) for i in sorted(first)]

    def s(self, name: str) -> np.ndarray:
        try:
            return self.sensitive[name]
        except KeyError:
            raise KeyError(f"unknown sensitive feature {name!r}") from None

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return self.labels

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            features=self.features[rows],
            labels=None if self.labels is None else self.labels[rows],
            sensitive={k: v[rows] for k, v in self.sensitive.items()},
            group_ids=None if self.group_ids is None else self.group_ids[rows],
            feature_names=self.feature_names,
        )

    def with_labels(self, labels) -> "Dataset":
        return Dataset(
            self.features, labels, self.sensitive, self.group_ids, self.feature_names
        )

    def with_groups(self, group_ids) -> "Dataset":
        return Dataset(
            self.features, self.labels, self.sensitive, group_ids, self.feature_names
        )

    def to_frame(self, label_col: str = "y", group_col: str = "group") -> pd.DataFrame:
        """Columnar view suitable for CSV export and re-ingestion."""
        df = pd.DataFrame(self.features, columns=list(self.feature_names))
        for name, s in self.sensitive.items():
            if name not in df.columns:
                df[name] = s
            else:
                df[name] = df[name].astype(int)
        if self.labels is not None:
            df[label_col] = self.labels
        if self.group_ids is not None:
            df[group_col] = self.group_ids
        return df


def ingest_dataset(
    raw_table,
    label_col: str | None = None,
    sf_names: Sequence[str] = (),
    group_col: str | None = None,
    label_coding: str | None = None,
) -> Dataset:
    """Build a :class:`Dataset` from a DataFrame or a mapping of columns.

    Every column other than the label and group columns becomes a feature.
    An intercept column is prepended unless an all-ones column already exists,
    in which case that column is moved to the front.

    Parameters
    ----------
    label_coding : {"pm1", "01", None}
        Coding of the label column. ``None`` accepts either and maps 0 to -1.
    """
    df = raw_table if isinstance(raw_table, pd.DataFrame) else pd.DataFrame(raw_table)

    labels = None
    if label_col is not None:
        if label_col not in df.columns:
            raise KeyError(f"label column {label_col!r} not found")
        labels = _code_labels(df[label_col], label_coding)

    group_ids = None
    if group_col is not None:
        if group_col not in df.columns:
            raise KeyError(f"group column {group_col!r} not found")
        group_ids = _code_groups(df[group_col], group_col)

    feat_cols = [c for c in df.columns if c not in (label_col, group_col)]
    sensitive = {}
    for name in sf_names:
        if name not in df.columns:
            raise KeyError(f"sensitive feature {name!r} not found")
        col = pd.to_numeric(df[name], errors="coerce").to_numpy(dtype=float)
        if np.isnan(col).any() or not np.all(np.isin(col, (0.0, 1.0))):
            raise ValueError(f"sensitive column {name!r} is not binary 0/1")
        sensitive[name] = col.astype(int)

    X = df[feat_cols].apply(pd.to_numeric).to_numpy(dtype=float)
    names = [str(c) for c in feat_cols]
    ones = [k for k in range(X.shape[1]) if np.all(X[:, k] == 1.0)]
    if ones:
        k = ones[0]
        order = [k] + [j for j in range(X.shape[1]) if j != k]
        X = X[:, order]
        names = [names[j] for j in order]
    else:
        X = np.column_stack([np.ones(len(df)), X])
        names = [INTERCEPT] + names

    return Dataset(X, labels, sensitive, group_ids, tuple(names))


def _code_labels(col: pd.Series, coding: str | None) -> np.ndarray:
    y = pd.to_numeric(col, errors="coerce").to_numpy(dtype=float)
    values = set(np.unique(y[~np.isnan(y)]).tolist())
    if np.isnan(y).any() or len(values) != 2:
        raise ValueError(f"label column must take exactly two values, got {sorted(values)}")
    if coding is None:
        coding = "01" if values == {0.0, 1.0} else "pm1"
    expected = {"01": {0.0, 1.0}, "pm1": {-1.0, 1.0}}.get(coding)
    if expected is None:
        raise ValueError(f"unknown label coding {coding!r}")
    if values != expected:
        raise ValueError(f"labels {sorted(values)} do not match coding {coding!r}")
    return np.where(y > 0, 1, -1)


def coerce_group_ids(values, name: str = "group") -> np.ndarray:
    """Validate a group vector (list, array or pandas categorical) and return it as strings."""
    return _code_groups(pd.Series(values), name)


def _code_groups(col: pd.Series, name: str) -> np.ndarray:
    if col.isna().any():
        raise ValueError(f"group column {name!r} has missing values")
    if isinstance(col.dtype, pd.CategoricalDtype):
        counts = col.value_counts()
        empty = counts.index[counts == 0].tolist()
        if empty:
            raise ValueError(f"group column {name!r} has empty categories {empty}")
    return col.astype(str).to_numpy()


def read_csv(path, **kwargs) -> Dataset:
    """Read a headed CSV and ingest it; the group column is kept as strings."""
    group_col = kwargs.get("group_col")
    dtype = {group_col: str} if group_col else None
    return ingest_dataset(pd.read_csv(path, dtype=dtype), **kwargs)


@dataclass(frozen=True)
class Partition:
    """Row-index sets splitting data by sensitive value and true label.

    ``dp0`` holds positives with s = 0, ``dn1`` negatives with s = 1, and so on.
    ``by_group`` is filled for grouped partitions with one octet per group.
    """

    s0: np.ndarray
    s1: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    dp0: np.ndarray
    dp1: np.ndarray
    dn0: np.ndarray
    dn1: np.ndarray
    by_group: tuple[tuple[str, "Partition"], ...] = ()

    def sizes(self) -> dict[str, int]:
        return {k: len(getattr(self, k)) for k in ("dn0", "dn1", "dp0", "dp1")}


def _octet(s: np.ndarray, y: np.ndarray, rows: np.ndarray) -> Partition:
    s, y = s[rows], y[rows]

    def pick(mask):
        return rows[mask]

    return Partition(
        s0=pick(s == 0),
        s1=pick(s == 1),
        pos=pick(y == 1),
        neg=pick(y == -1),
        dp0=pick((s == 0) & (y == 1)),
        dp1=pick((s == 1) & (y == 1)),
        dn0=pick((s == 0) & (y == -1)),
        dn1=pick((s == 1) & (y == -1)),
    )


def partition(d: Dataset, sf: str, grouped: bool = False) -> Partition:
    y = d.require_labels()
    s = d.s(sf)
    whole = _octet(s, y, np.arange(d.n))
    if not grouped:
        return whole
    if d.group_ids is None:
        raise ValueError("grouped partition requested but dataset has no group ids")
    per_group = tuple(
        (g, _octet(s, y, np.flatnonzero(d.group_ids == g))) for g in d.groups
    )
    return replace(whole, by_group=per_group)
