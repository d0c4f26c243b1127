"""Synthetic populations for the simulation protocol.

Covariates are i.i.d. standard normal, followed by one binary sensitive
column ``s`` whose coefficient is the last entry of ``beta_true``. Labels come
from the family's prediction function: Bernoulli draws from the logistic
probability for LR, the sign of the margin for SVM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import INTERCEPT, Dataset

REGULAR_BETA = (-2.0, 0.4, 0.8, 0.5, 2.0)
MIXED_BETA = (-4.0, 0.4, 0.8, 0.5, 4.0)
SENSITIVE = "s"


@dataclass(frozen=True)
class SynthSpec:
    n: int = 10_000
    beta_true: tuple[float, ...] = REGULAR_BETA
    family: str = "LR"
    K: int | None = None
    sigma_g: float = 3.0
    sf_prob: float = 0.5
    seed: int = 42
    split_frac: float = 0.01
    threshold_labels: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if len(self.beta_true) < 2:
            raise ValueError("beta_true needs an intercept and a sensitive coefficient")
        if self.family.upper() not in ("LR", "SVM"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.sigma_g < 0:
            raise ValueError("sigma_g must be non-negative")
        if not 0 < self.split_frac < 1:
            raise ValueError("split_frac must lie strictly between 0 and 1")
        if not 0 <= self.sf_prob <= 1:
            raise ValueError("sf_prob must be a probability")
        object.__setattr__(self, "family", self.family.upper())
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))


def _design(spec: SynthSpec, rng: np.random.Generator):
    p = len(spec.beta_true) - 2
    Z = rng.standard_normal((spec.n, p))
    s = (rng.random(spec.n) < spec.sf_prob).astype(int)
    X = np.column_stack([np.ones(spec.n), Z, s])
    names = (INTERCEPT,) + tuple(f"x{k}" for k in range(1, p + 1)) + (SENSITIVE,)
    return X, s, names


def _labels(spec: SynthSpec, lp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if spec.family == "SVM":
        return np.where(lp >= 0, 1, -1)
    prob = 1.0 / (1.0 + np.exp(-lp))
    if spec.threshold_labels:
        return np.where(prob >= 0.5, 1, -1)
    return np.where(rng.random(len(lp)) < prob, 1, -1)


def _split_sizes(spec: SynthSpec) -> int:
    n_train = int(round(spec.n * spec.split_frac))
    if n_train < 1 or n_train >= spec.n:
        raise ValueError(f"split_frac {spec.split_frac} leaves an empty train or test set")
    return n_train


def gen_regular(spec: SynthSpec) -> tuple[Dataset, Dataset]:
    if spec.K is not None:
        raise ValueError("gen_regular takes no groups; use gen_mixed")
    n_train = _split_sizes(spec)
    rng = np.random.default_rng(spec.seed)
    X, s, names = _design(spec, rng)
    y = _labels(spec, X @ np.asarray(spec.beta_true), rng)
    order = rng.permutation(spec.n)
    full = Dataset(X, y, {SENSITIVE: s}, feature_names=names)
    return full.take(order[:n_train]), full.take(order[n_train:])


def gen_mixed(spec: SynthSpec):
    """Grouped population with normal random intercepts.

    Returns ``(train, test, groups_train, groups_test)``; both datasets also
    carry their group ids.
    """
    K = spec.K
    if K is None or K < 1:
        raise ValueError("gen_mixed needs K >= 1 groups")
    if K > spec.n:
        raise ValueError(f"K={K} groups cannot be filled by n={spec.n} rows")
    n_train = _split_sizes(spec)
    if n_train < K:
        raise ValueError(f"training set of {n_train} rows cannot cover {K} groups")
    rng = np.random.default_rng(spec.seed)
    X, s, names = _design(spec, rng)
    effects = rng.normal(0.0, spec.sigma_g, size=K)
    # round-robin after a seeded shuffle: sizes differ by at most one
    codes = np.empty(spec.n, dtype=int)
    codes[rng.permutation(spec.n)] = np.arange(spec.n) % K
    y = _labels(spec, X @ np.asarray(spec.beta_true) + effects[codes], rng)

    # one training row per group first, the rest of the training set at random
    first = np.array([rng.choice(np.flatnonzero(codes == k)) for k in range(K)], dtype=int)
    rest = np.setdiff1d(np.arange(spec.n), first)
    extra = rng.choice(rest, size=n_train - K, replace=False)
    train_rows = np.sort(np.concatenate([first, extra]))
    test_rows = np.setdiff1d(np.arange(spec.n), train_rows)

    width = len(str(K))
    labels = np.array([f"g{k + 1:0{width}d}" for k in codes])
    full = Dataset(X, y, {SENSITIVE: s}, labels, names)
    train, test = full.take(train_rows), full.take(test_rows)
    return train, test, train.group_ids, test.group_ids


def group_effects(spec: SynthSpec) -> np.ndarray:
    """The random intercepts drawn by :func:`gen_mixed` for this spec."""
    rng = np.random.default_rng(spec.seed)
    _design(spec, rng)
    return rng.normal(0.0, spec.sigma_g, size=spec.K)
