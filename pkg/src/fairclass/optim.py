"""Objectives, fairness constraints and prediction functions for the in-processing models.

Parameters are packed as ``theta = [beta, g]`` where ``g`` holds one random
intercept per training group (mixed families only). Every model acts on the
data through its linear predictor ``X @ beta + g[group]``, so constraints are
written as functions of that predictor and chained back to ``theta``.

Nonsmooth pieces take an optional smoothing width ``tau``. With ``tau=None``
the exact forms are used (hinge and ``min(0, u)``) and the returned gradient
is a subgradient; with ``tau > 0``

    min(0, u)     ~ -tau * softplus(-u / tau)
    max(0, 1 - m) ~  tau * softplus((1 - m) / tau)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .core import Dataset

FAMILIES = ("LR", "SVM", "MELR", "MESVM")
CONSTRAINTS = ("none", "DI", "FNR", "FPR", "DM")
MIXED = ("MELR", "MESVM")

# -log(1e-12): loss cap from clipping probabilities to [1e-12, 1 - 1e-12]
LOSS_CAP = -np.log(1e-12)

_EVALUATORS = {"none": (), "DI": ("DI",), "FNR": ("FNR",), "FPR": ("FPR",), "DM": ("FNR", "FPR")}


def softplus(z):
    return np.logaddexp(0.0, z)


@dataclass(frozen=True)
class ModelSpec:
    family: str = "LR"
    constraint: str = "none"
    sf_names: tuple[str, ...] = ()
    c: float = 0.1
    mu: float = 0.1
    lam: float = 1.0

    def __post_init__(self):
        family = self.family.upper()
        constraint = "none" if self.constraint.lower() == "none" else self.constraint.upper()
        if family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}; expected one of {CONSTRAINTS}")
        if self.c < 0:
            raise ValueError("fairness threshold c must be non-negative")
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("mu and lam must be positive")
        sf = (self.sf_names,) if isinstance(self.sf_names, str) else tuple(self.sf_names)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "constraint", constraint)
        object.__setattr__(self, "sf_names", sf)

    @property
    def mixed(self) -> bool:
        return self.family in MIXED

    @property
    def svm(self) -> bool:
        return self.family in ("SVM", "MESVM")


@dataclass(frozen=True, eq=False)
class Coefficients:
    family: str
    beta: np.ndarray
    g: np.ndarray | None = None
    groups: tuple[str, ...] = ()

    def linear_predictor(self, d: Dataset) -> np.ndarray:
        if d.n_features != len(self.beta):
            raise ValueError(
                f"dataset has {d.n_features} columns but the model expects {len(self.beta)}"
            )
        lp = d.features @ self.beta
        if self.family in MIXED:
            if d.group_ids is None:
                raise ValueError("mixed model needs group ids to predict")
            lp = lp + _group_effects(self, d.group_ids)
        return lp

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "beta": self.beta.tolist(),
            "g": None if self.g is None else dict(zip(self.groups, self.g.tolist())),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Coefficients":
        g = obj.get("g")
        if g is None:
            return cls(obj["family"], np.asarray(obj["beta"], float))
        return cls(
            obj["family"],
            np.asarray(obj["beta"], float),
            np.asarray(list(g.values()), float),
            tuple(g.keys()),
        )


def _group_effects(coeffs: Coefficients, group_ids: np.ndarray) -> np.ndarray:
    # unseen groups get the prior mean 0
    lookup = dict(zip(coeffs.groups, coeffs.g))
    return np.array([lookup.get(str(k), 0.0) for k in group_ids])


def predict_proba(coeffs: Coefficients, d: Dataset, family: str | None = None) -> np.ndarray:
    """Probability of the positive class.

    Margins of the SVM families are passed through the logistic link so every
    model hands probabilities to post-processing.
    """
    if family is not None and family.upper() != coeffs.family:
        raise ValueError(f"coefficients are for {coeffs.family}, not {family}")
    return expit(coeffs.linear_predictor(d))


def group_codes(d: Dataset, groups: Sequence[str] | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Map row group labels to indices into ``groups`` (default: the data's own groups)."""
    if d.group_ids is None:
        raise ValueError("dataset has no group ids")
    groups = tuple(d.groups if groups is None else groups)
    index = {g: k for k, g in enumerate(groups)}
    try:
        codes = np.array([index[str(k)] for k in d.group_ids], dtype=int)
    except KeyError as err:
        raise ValueError(f"row has unknown group id {err.args[0]!r}") from None
    return codes, groups


# ---------------------------------------------------------------- losses on lp


def _logistic_loss(lp, y):
    z = -y * lp
    per_row = softplus(z)
    live = per_row < LOSS_CAP
    value = float(np.sum(np.minimum(per_row, LOSS_CAP)))
    dlp = np.where(live, -y * expit(z), 0.0)
    return value, dlp


def _hinge_loss(lp, y, mu, tau):
    slack = 1.0 - y * lp
    if tau is None:
        value = mu * float(np.sum(np.maximum(0.0, slack)))
        dlp = np.where(slack > 0, -mu * y, 0.0)
    else:
        value = mu * tau * float(np.sum(softplus(slack / tau)))
        dlp = -mu * y * expit(slack / tau)
    return value, dlp


def _min0(u, tau):
    """``min(0, u)`` (or its smooth lower approximation) and derivative."""
    if tau is None:
        return np.minimum(0.0, u), (u < 0).astype(float)
    return -tau * softplus(-u / tau), expit(-u / tau)


# ---------------------------------------------------------------- objectives


def lr_objective(beta, d: Dataset):
    """Negative log-likelihood of logistic regression and its gradient."""
    y = d.require_labels()
    X = d.features
    value, dlp = _logistic_loss(X @ beta, y)
    return value, X.T @ dlp


def svm_objective(beta, d: Dataset, mu: float, tau: float | None = None):
    """Slack-eliminated primal SVM: ``0.5 ||beta||^2 + mu * sum(hinge)``."""
    beta = np.asarray(beta, float)
    y = d.require_labels()
    X = d.features
    value, dlp = _hinge_loss(X @ beta, y, mu, tau)
    return 0.5 * float(beta @ beta) + value, beta + X.T @ dlp


def _mixed_lp(beta, g, d, groups):
    codes, _ = group_codes(d, groups)
    g = np.asarray(g, float)
    return d.features @ beta + g[codes], codes


def _chain(d, codes, dlp, k):
    return d.features.T @ dlp, np.bincount(codes, weights=dlp, minlength=k)


def melr_objective(beta, g, d: Dataset, lam: float, groups=None):
    """Mixed-effects logistic loss plus the ridge penalty on group intercepts.

    Returns the value and the gradient over the concatenated ``(beta, g)``.
    """
    g = np.asarray(g, float)
    lp, codes = _mixed_lp(beta, g, d, groups)
    value, dlp = _logistic_loss(lp, d.require_labels())
    gb, gg = _chain(d, codes, dlp, len(g))
    return value + lam * float(g @ g), np.concatenate([gb, gg + 2 * lam * g])


def mesvm_objective(beta, g, d: Dataset, mu: float, lam: float, tau=None, groups=None):
    beta = np.asarray(beta, float)
    g = np.asarray(g, float)
    lp, codes = _mixed_lp(beta, g, d, groups)
    value, dlp = _hinge_loss(lp, d.require_labels(), mu, tau)
    gb, gg = _chain(d, codes, dlp, len(g))
    value += 0.5 * float(beta @ beta) + lam * float(g @ g)
    return value, np.concatenate([gb + beta, gg + 2 * lam * g])


# ---------------------------------------------------------------- constraints on lp


def _di_on_lp(lp, s, y, tau):
    n = len(lp)
    w = (s - s.mean()) / n
    return float(w @ lp), w


def _fnr_on_lp(lp, s, y, tau):
    n = len(lp)
    n0, n1 = np.sum(s == 0), np.sum(s == 1)
    weight = np.where(y == 1, np.where(s == 1, n0 / n, -n1 / n), 0.0)
    m, dm = _min0(lp, tau)
    return float(weight @ m), weight * dm


def _fpr_on_lp(lp, s, y, tau):
    n = len(lp)
    n0, n1 = np.sum(s == 0), np.sum(s == 1)
    weight = np.where(y == -1, np.where(s == 1, n0 / n, -n1 / n), 0.0)
    m, dm = _min0(-lp, tau)
    return float(weight @ m), -weight * dm


CONSTRAINT_ON_LP = {"DI": _di_on_lp, "FNR": _fnr_on_lp, "FPR": _fpr_on_lp}


def _constraint_value(kind, beta, g, d, sf, tau, groups):
    beta = np.asarray(beta, float)
    if g is None:
        lp = d.features @ beta
    else:
        lp, _ = _mixed_lp(beta, g, d, groups)
    y = d.labels if d.labels is not None else np.zeros(d.n)
    value, _ = CONSTRAINT_ON_LP[kind](lp, d.s(sf), y, tau)
    return value


def di_constraint_value(beta, g, d: Dataset, sf: str, groups=None) -> float:
    """Mean of ``(s - mean(s)) * lp``; the disparate-impact constraints bound it by +-c."""
    return _constraint_value("DI", beta, g, d, sf, None, groups)


def fnr_constraint_value(beta, g, d: Dataset, sf: str, tau=None, groups=None) -> float:
    return _constraint_value("FNR", beta, g, d, sf, tau, groups)


def fpr_constraint_value(beta, g, d: Dataset, sf: str, tau=None, groups=None) -> float:
    return _constraint_value("FPR", beta, g, d, sf, tau, groups)


# ---------------------------------------------------------------- problem assembly


@dataclass(frozen=True)
class ConstraintSpec:
    """One inequality: ``kind(sf) <= bound`` or ``kind(sf) >= bound``."""

    kind: str
    sf: str
    direction: str
    bound: float


@dataclass(eq=False)
class Problem:
    spec: ModelSpec
    data: Dataset
    groups: tuple[str, ...] = ()
    constraints: list[ConstraintSpec] = field(default_factory=list)

    def __post_init__(self):
        self._y = self.data.require_labels()
        self._codes = None
        if self.spec.mixed:
            self._codes, self.groups = group_codes(self.data)
        # one evaluator per (kind, sf); each yields the <= and >= constraint
        self.evaluators = [(c.kind, c.sf) for c in self.constraints if c.direction == "<="]
        self._s = {sf: self.data.s(sf).astype(float) for _, sf in self.evaluators}

    @property
    def n_beta(self) -> int:
        return self.data.n_features

    @property
    def n_params(self) -> int:
        return self.n_beta + len(self.groups)

    @property
    def bounds(self) -> np.ndarray:
        """Absolute bound c per evaluator."""
        return np.full(len(self.evaluators), self.spec.c)

    def split(self, theta):
        theta = np.asarray(theta, float)
        return theta[: self.n_beta], (theta[self.n_beta :] if self.spec.mixed else None)

    def linear_predictor(self, theta) -> np.ndarray:
        beta, g = self.split(theta)
        lp = self.data.features @ beta
        if g is not None:
            lp = lp + g[self._codes]
        return lp

    def _to_theta(self, dlp) -> np.ndarray:
        grad = self.data.features.T @ dlp
        if self.spec.mixed:
            grad = np.concatenate([grad, np.bincount(self._codes, dlp, len(self.groups))])
        return grad

    def objective(self, theta, tau: float | None = None):
        beta, g = self.split(theta)
        lp = self.linear_predictor(theta)
        if self.spec.svm:
            value, dlp = _hinge_loss(lp, self._y, self.spec.mu, tau)
            value += 0.5 * float(beta @ beta)
        else:
            value, dlp = _logistic_loss(lp, self._y)
        grad = self._to_theta(dlp)
        if self.spec.svm:
            grad[: self.n_beta] += beta
        if g is not None:
            value += self.spec.lam * float(g @ g)
            grad[self.n_beta :] += 2 * self.spec.lam * g
        return value, grad

    def constraint_values(self, theta, tau: float | None = None):
        """Values of every evaluator and their Jacobian (rows = evaluators)."""
        lp = self.linear_predictor(theta)
        vals = np.empty(len(self.evaluators))
        jac = np.empty((len(self.evaluators), self.n_params))
        for k, (kind, sf) in enumerate(self.evaluators):
            vals[k], dlp = CONSTRAINT_ON_LP[kind](lp, self._s[sf], self._y, tau)
            jac[k] = self._to_theta(dlp)
        return vals, jac

    def coefficients(self, theta) -> Coefficients:
        beta, g = self.split(theta)
        return Coefficients(self.spec.family, beta.copy(), None if g is None else g.copy(), self.groups)


def assemble_problem(spec: ModelSpec, d: Dataset) -> Problem:
    if spec.mixed and d.group_ids is None:
        raise ValueError(f"{spec.family} needs grouped data")
    if not spec.mixed and d.group_ids is not None:
        d = d.with_groups(None)
    if spec.constraint != "none" and not spec.sf_names:
        raise ValueError(f"constraint {spec.constraint} needs at least one sensitive feature")
    for sf in spec.sf_names:
        if sf not in d.sensitive:
            raise ValueError(f"constraint sensitive feature {sf!r} not in data")
    d.require_labels()
    constraints = []
    for sf in spec.sf_names:
        for kind in _EVALUATORS[spec.constraint]:
            constraints.append(ConstraintSpec(kind, sf, "<=", spec.c))
            constraints.append(ConstraintSpec(kind, sf, ">=", -spec.c))
    return Problem(spec, d, constraints=constraints)
