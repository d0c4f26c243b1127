"""Three-phase orchestration: preprocessing, in-processing and post-processing."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .core import Dataset, coerce_group_ids
from .optim import ModelSpec, assemble_problem
from .postprocess import POSTPROCESSORS, CutoffChoice, apply_cutoff, cutoff_sweep, id_post
from .preprocess import Selection, resample_select
from .solver import Solution, SolverOptions, solve

PREPROCESSORS = ("id_pre", "di_pre")


@dataclass(frozen=True)
class PluginClassifier:
    """Any external classifier: ``fit(X, y) -> model`` and ``predict_proba(model, X) -> probs``.

    ``X`` is the design matrix including the intercept column and ``y`` is
    coded -1/+1. No fairness constraints act on a plugin.
    """

    fit: Callable[[np.ndarray, np.ndarray], Any]
    predict_proba: Callable[[Any, np.ndarray], np.ndarray]
    name: str = "plugin"


@dataclass(eq=False)
class FittedPlugin:
    plugin: PluginClassifier
    model: Any
    status: str = "fitted"

    def predict_proba(self, d: Dataset) -> np.ndarray:
        probs = np.asarray(self.plugin.predict_proba(self.model, d.features), float)
        if probs.shape != (d.n,):
            raise ValueError(f"plugin returned {probs.shape} probabilities for {d.n} rows")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("plugin probabilities must lie in [0, 1]")
        return probs


@dataclass(frozen=True)
class PipelineConfig:
    inprocess: ModelSpec | PluginClassifier = field(default_factory=ModelSpec)
    preprocess: str = "id_pre"
    postprocess: str = "id_post"
    SF: tuple[str, ...] = ()
    SFpre: str | None = None
    SFpost: str | None = None
    c: float = 0.1
    R: int = 1
    seed: int = 42
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.preprocess not in PREPROCESSORS:
            raise ValueError(f"unknown preprocess {self.preprocess!r}; expected one of {PREPROCESSORS}")
        if self.postprocess != "id_post" and self.postprocess not in POSTPROCESSORS:
            raise ValueError(f"unknown postprocess {self.postprocess!r}")
        if self.R < 1:
            raise ValueError("R must be at least 1")
        for name in ("SFpre", "SFpost"):
            if not isinstance(getattr(self, name), (str, type(None))):
                raise ValueError(f"{name} takes a single sensitive feature name")
        sf = (self.SF,) if isinstance(self.SF, str) else tuple(self.SF)
        object.__setattr__(self, "SF", sf)

    def _default_sf(self, explicit, phase):
        if explicit:
            return explicit
        if not self.SF:
            raise ValueError(f"{phase} is enabled but no sensitive feature was given")
        return self.SF[0]

    @property
    def sf_pre(self) -> str | None:
        return self._default_sf(self.SFpre, "preprocessing") if self.preprocess == "di_pre" else None

    @property
    def sf_post(self) -> str | None:
        return self._default_sf(self.SFpost, "post-processing") if self.postprocess != "id_post" else None

    @property
    def post_metric(self) -> str | None:
        return POSTPROCESSORS.get(self.postprocess)

    def model_spec(self) -> ModelSpec | None:
        if isinstance(self.inprocess, PluginClassifier):
            return None
        spec = self.inprocess
        if spec.constraint == "none":
            return spec
        return replace(spec, sf_names=spec.sf_names or self.SF, c=self.c)


@dataclass(eq=False)
class PipelineResult:
    classifications: np.ndarray
    probs_train: np.ndarray
    probs_new: np.ndarray
    cutoff: CutoffChoice | None
    model: Any
    selection: Selection | None = None
    solve_seconds: list[float] = field(default_factory=list)

    @property
    def B(self) -> float:
        return 0.5 if self.cutoff is None else self.cutoff.B

    @property
    def status(self) -> str:
        return getattr(self.model, "status", "fitted")


def make_inprocessor(cfg: PipelineConfig, timings: list | None = None) -> Callable[[Dataset], Any]:
    """Return ``fit(train) -> model`` for the configured in-processing method.

    When ``timings`` is a list, the wall time of every solve is appended to it.
    """
    if isinstance(cfg.inprocess, PluginClassifier):
        plugin = cfg.inprocess

        def fit_plugin(train: Dataset) -> FittedPlugin:
            return FittedPlugin(plugin, plugin.fit(train.features, train.require_labels()))

        return fit_plugin

    spec = cfg.model_spec()

    def fit_model(train: Dataset) -> Solution:
        sol = solve(assemble_problem(spec, train), cfg.solver)
        if timings is not None:
            timings.append(sol.wall_seconds)
        return sol

    return fit_model


def _check_compatible(xtrain: Dataset, newdata: Dataset, cfg: PipelineConfig) -> None:
    if xtrain.n_features != newdata.n_features:
        raise ValueError(
            f"training data has {xtrain.n_features} columns but new data has {newdata.n_features}"
        )
    for sf in cfg.SF + tuple(x for x in (cfg.SFpre, cfg.SFpost) if x):
        xtrain.s(sf)


def _post(cfg: PipelineConfig, train: Dataset, model, newdata: Dataset):
    probs_train = model.predict_proba(train)
    probs_new = model.predict_proba(newdata)
    if cfg.postprocess == "id_post":
        return id_post(probs_new), probs_train, probs_new, None
    choice = cutoff_sweep(probs_train, train.labels, train, cfg.sf_post, cfg.post_metric)
    return apply_cutoff(probs_new, choice), probs_train, probs_new, choice


def run_pipeline(xtrain: Dataset, ytrain, newdata: Dataset, cfg: PipelineConfig) -> PipelineResult:
    if ytrain is not None:
        xtrain = xtrain.with_labels(ytrain)
    xtrain.require_labels()
    _check_compatible(xtrain, newdata, cfg)
    timings: list[float] = []
    fit = make_inprocessor(cfg, timings)

    selection = None
    if cfg.preprocess == "di_pre":
        metric = cfg.post_metric or "DI"
        selection = resample_select(xtrain, cfg.sf_pre, fit, metric, cfg.R, cfg.seed)
        model = selection.model
    else:
        model = fit(xtrain)

    labels, probs_train, probs_new, choice = _post(cfg, xtrain, model, newdata)
    return PipelineResult(labels, probs_train, probs_new, choice, model, selection, timings)


def fair_pred(xtrain: Dataset, ytrain, newdata: Dataset, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Classify ``newdata`` (-1/+1) after the configured three-phase pipeline.

    ``ytrain`` overrides the labels stored in ``xtrain`` when given.
    """
    return run_pipeline(xtrain, ytrain, newdata, cfg or PipelineConfig()).classifications


def run_pipeline_mixed(
    xtrain: Dataset,
    ytrain,
    newdata: Dataset,
    cfg: PipelineConfig,
    group_id_train: Sequence | None = None,
    group_id_newdata: Sequence | None = None,
) -> PipelineResult:
    if cfg.preprocess != "id_pre":
        raise ValueError(
            "mixed models skip preprocessing: resampling can empty whole groups"
        )
    spec = cfg.model_spec()
    if spec is None or not spec.mixed:
        raise ValueError("mixed pipeline needs a MELR or MESVM model spec")
    if group_id_train is not None:
        xtrain = xtrain.with_groups(coerce_group_ids(group_id_train, "group_id_train"))
    if group_id_newdata is not None:
        newdata = newdata.with_groups(coerce_group_ids(group_id_newdata, "group_id_newdata"))
    if xtrain.group_ids is None or newdata.group_ids is None:
        raise ValueError("mixed pipeline needs group ids for training and new data")
    if ytrain is not None:
        xtrain = xtrain.with_labels(ytrain)
    xtrain.require_labels()
    _check_compatible(xtrain, newdata, cfg)

    timings: list[float] = []
    model = make_inprocessor(cfg, timings)(xtrain)
    labels, probs_train, probs_new, choice = _post(cfg, xtrain, model, newdata)
    return PipelineResult(labels, probs_train, probs_new, choice, model, solve_seconds=timings)


def fair_pred_mixed(
    xtrain: Dataset,
    ytrain,
    newdata: Dataset,
    cfg: PipelineConfig,
    group_id_train=None,
    group_id_newdata=None,
) -> np.ndarray:
    return run_pipeline_mixed(
        xtrain, ytrain, newdata, cfg, group_id_train, group_id_newdata
    ).classifications


CONFIG_KEYS = {
    "family", "constraint", "c", "mu", "lam", "pre", "R", "post",
    "sf", "sfpre", "sfpost", "seed", "time_limit",
}


def config_from_dict(obj: dict) -> PipelineConfig:
    """Build a config from the flat key-value schema shared with the CLI flags.

    Keys: family, constraint, c, mu, lam, pre (id|di), R, post
    (none|di|dm|fpr|fnr), sf (name or list), sfpre, sfpost, seed, time_limit.
    """
    unknown = set(obj) - CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    sf = obj.get("sf") or ()
    sf = (sf,) if isinstance(sf, str) else tuple(sf)
    spec = ModelSpec(
        family=obj.get("family", "LR"),
        constraint=obj.get("constraint", "none"),
        c=float(obj.get("c", 0.1)),
        mu=float(obj.get("mu", 0.1)),
        lam=float(obj.get("lam", 1.0)),
    )
    post = obj.get("post", "none")
    return PipelineConfig(
        inprocess=spec,
        preprocess=f"{obj.get('pre', 'id')}_pre",
        postprocess="id_post" if post in (None, "none", "id") else f"{post}_post",
        SF=sf,
        SFpre=obj.get("sfpre"),
        SFpost=obj.get("sfpost"),
        c=float(obj.get("c", 0.1)),
        R=int(obj.get("R", 1)),
        seed=int(obj.get("seed", 42)),
        solver=SolverOptions(max_seconds=float(obj.get("time_limit", 60.0))),
    )
