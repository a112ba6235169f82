"""End-to-end training pipeline and the self-contained risk-model bundle.

The bundle carries everything needed to score a raw prediction CSV: the raw
schema, the fitted discretizer (train-partition bin edges), the selected
feature list, and the trained classifier. Every artifact is written with
sorted keys and no timestamps, so identical (config, seed) runs are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import models
from .balance import ResamplingMethod, rebalance
from .data import NUMERIC, Dataset, Schema, curate_scope, load_dataset, load_schema, split_stratified
from .evaluate import (
    CvReport,
    confusion_metrics,
    grid_search,
    permutation_importance,
    render_cv_table,
    render_importance,
    render_roc_points,
    roc_auc,
)
from .features import (
    BinningRule,
    Discretizer,
    EQUAL_FREQUENCY,
    rank_and_filter,
    render_score_report,
    score_report,
)
from .models import (
    BagParams,
    ForestParams,
    LdaParams,
    NBParams,
    SvmParams,
    TreeParams,
    TrainedModel,
    hyperparameters_from_dict,
)


class ConfigError(Exception):
    pass


SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    """Training-run parameters; unset grids fall back to the documented defaults."""

    data: str
    schema: str
    out_dir: str
    seed: int = 0
    split_fraction: float = 0.5
    keep_fraction: float = 0.6
    k_folds: int = 10
    holdout_fraction: float | None = None
    threshold: float = 0.5
    exit_reason_column: str | None = None
    numeric_bins: int = 4
    importance_repetitions: int = 5
    resampling: list[dict] = field(default_factory=list)
    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.split_fraction < 1.0):
            raise ConfigError(f"split_fraction must be in (0,1), got {self.split_fraction}")
        if not (0.0 < self.keep_fraction <= 1.0):
            raise ConfigError(f"keep_fraction must be in (0,1], got {self.keep_fraction}")
        if self.k_folds < 2:
            raise ConfigError(f"k_folds must be >= 2, got {self.k_folds}")
        if self.holdout_fraction is not None and not (0.0 < self.holdout_fraction < 1.0):
            raise ConfigError(
                f"holdout_fraction must be in (0,1), got {self.holdout_fraction}"
            )
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError(f"threshold must be in (0,1), got {self.threshold}")
        if self.numeric_bins < 2:
            raise ConfigError(f"numeric_bins must be >= 2, got {self.numeric_bins}")
        if self.importance_repetitions < 1:
            raise ConfigError("importance_repetitions must be >= 1")

    def to_dict(self) -> dict:
        return {
            "data": self.data,
            "schema": self.schema,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "split_fraction": self.split_fraction,
            "keep_fraction": self.keep_fraction,
            "k_folds": self.k_folds,
            "holdout_fraction": self.holdout_fraction,
            "threshold": self.threshold,
            "exit_reason_column": self.exit_reason_column,
            "numeric_bins": self.numeric_bins,
            "importance_repetitions": self.importance_repetitions,
            "resampling": self.resampling,
            "grids": self.grids,
        }

    @staticmethod
    def from_dict(doc: dict) -> "RunConfig":
        known = {
            "data", "schema", "out_dir", "seed", "split_fraction", "keep_fraction",
            "k_folds", "holdout_fraction", "threshold", "exit_reason_column",
            "numeric_bins", "importance_repetitions", "resampling", "grids",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("data", "schema", "out_dir"):
            if key not in doc:
                raise ConfigError(f"config is missing required key {key!r}")
        return RunConfig(**doc)


def default_grids(n_features: int) -> list[tuple[str, list]]:
    """Documented default search space, sized to the selected feature count."""
    p = max(1, n_features)
    mtry_values = sorted({max(1, int(np.sqrt(p))), max(1, p // 3), p})
    depths = [4, 8, None]
    return [
        (models.NAIVE_BAYES, [NBParams(laplace_alpha=a) for a in (0.1, 1.0)]),
        (models.LDA, [LdaParams(ridge=r) for r in (1e-3, 1e-1)]),
        (models.SVM_RBF, [
            SvmParams(cost=c, gamma=g)
            for c in (0.1, 1.0, 10.0)
            for g in (0.01, 0.1, 1.0)
        ]),
        (models.TREE, [TreeParams(max_depth=d, min_leaf=5.0) for d in depths]),
        (models.TREE_BAG, [BagParams(n_trees=100, tree=TreeParams(min_leaf=5.0))]),
        (models.RANDOM_FOREST, [
            ForestParams(n_trees=n, mtry=m, tree=TreeParams(min_leaf=5.0))
            for n in (100, 300)
            for m in mtry_values
        ]),
    ]


def grids_from_config(doc: dict, n_features: int) -> list[tuple[str, list]]:
    if not doc:
        return default_grids(n_features)
    out = []
    for family, points in doc.items():
        if family not in models.FAMILIES:
            raise ConfigError(f"unknown model family {family!r}")
        out.append(
            (family, [hyperparameters_from_dict(family, p) for p in points])
        )
    return out


def default_resampling(seed: int) -> list[ResamplingMethod]:
    return [
        ResamplingMethod("none", seed=seed),
        ResamplingMethod("down", seed=seed),
        ResamplingMethod("up", seed=seed),
        ResamplingMethod("weights", seed=seed),
        ResamplingMethod("smote", seed=seed, k_neighbors=5),
        ResamplingMethod("rose", seed=seed, shrink=1.0),
    ]


def resampling_from_config(docs: list[dict], seed: int) -> list[ResamplingMethod]:
    if not docs:
        return default_resampling(seed)
    out = []
    for doc in docs:
        doc = dict(doc)
        doc.setdefault("seed", seed)
        out.append(ResamplingMethod.from_dict(doc))
    return out


@dataclass
class RiskModel:
    """A trained classifier plus the preprocessing that feeds it."""

    model: TrainedModel
    raw_schema: Schema
    model_schema: Schema
    discretizer: Discretizer
    mi_scores: dict

    def prepare(self, ds: Dataset) -> Dataset:
        """Map a raw-schema dataset into model space (banded numerics)."""
        if ds.schema == self.model_schema:
            return ds
        return self.discretizer.apply(ds)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": models.model_to_dict(self.model),
            "raw_schema": self.raw_schema.to_dict(),
            "model_schema": self.model_schema.to_dict(),
            "discretizer": self.discretizer.to_dict(),
            "mi_scores": self.mi_scores,
        }

    @staticmethod
    def from_dict(doc: dict) -> "RiskModel":
        model_schema = Schema.from_dict(doc["model_schema"])
        return RiskModel(
            model=models.model_from_dict(doc["model"], model_schema),
            raw_schema=Schema.from_dict(doc["raw_schema"]),
            model_schema=model_schema,
            discretizer=Discretizer.from_dict(doc["discretizer"]),
            mi_scores=doc["mi_scores"],
        )


def save_bundle(bundle: RiskModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(bundle.to_dict(), sort_keys=True) + "\n")


def load_bundle(path: str | Path) -> RiskModel:
    return RiskModel.from_dict(json.loads(Path(path).read_text()))


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


@dataclass
class TrainArtifacts:
    bundle: RiskModel
    cv_report: CvReport
    test_metrics: dict
    importance: dict


def train_pipeline(cfg: RunConfig) -> TrainArtifacts:
    """curate -> split -> discretize -> rank/filter -> grid search -> refit ->
    test evaluation -> permutation importance, with all artifacts written to
    cfg.out_dir."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_probe"
    probe.write_text("")
    probe.unlink()

    raw_schema = load_schema(cfg.schema)
    ds = load_dataset(cfg.data, raw_schema)
    if cfg.exit_reason_column:
        ds = curate_scope(ds, cfg.exit_reason_column)
        raw_schema = ds.schema

    train_raw, test_raw = split_stratified(ds, cfg.split_fraction, cfg.seed)

    rules = [
        BinningRule(f.name, EQUAL_FREQUENCY, bins=cfg.numeric_bins)
        for f in raw_schema.features
        if f.kind == NUMERIC
    ]
    discretizer = Discretizer.fit(train_raw, rules)
    train = discretizer.apply(train_raw)
    test = discretizer.apply(test_raw)

    scores, selected = rank_and_filter(train, cfg.keep_fraction)
    mi_doc = score_report(scores, selected)

    grids = grids_from_config(cfg.grids, len(selected))
    resampling = resampling_from_config(cfg.resampling, cfg.seed)
    report = grid_search(
        train,
        grids,
        resampling,
        k=cfg.k_folds,
        seed=cfg.seed,
        selected=selected,
        threshold=cfg.threshold,
        holdout_fraction=cfg.holdout_fraction,
    )
    if report.best is None:
        raise ConfigError("every grid cell failed; see cv_report errors")

    best = report.best
    refit_wds = rebalance(
        train,
        ResamplingMethod(
            variant=best.resampling.variant,
            seed=cfg.seed,
            k_neighbors=best.resampling.k_neighbors,
            shrink=best.resampling.shrink,
        ),
    )
    model = models.fit(
        refit_wds, best.family, best.hyperparams, selected,
        seed=cfg.seed, threshold=cfg.threshold,
    )

    probs = models.predict_proba(model, test)
    curve = roc_auc(probs, test.labels())
    cm = confusion_metrics(models.predict_class(model, test), test.labels())
    test_metrics = {
        "auc": curve.auc,
        "leaver_precision": cm.leaver_precision,
        "stayer_recall": cm.stayer_recall,
        "sensitivity": cm.sensitivity,
        "specificity": cm.specificity,
        "threshold": cfg.threshold,
        "test_rows": len(test.rows),
        "best_config": best.describe(),
    }

    importance = permutation_importance(
        model, test, cfg.importance_repetitions, cfg.seed
    )

    bundle = RiskModel(
        model=model,
        raw_schema=raw_schema,
        model_schema=train.schema,
        discretizer=discretizer,
        mi_scores=mi_doc,
    )

    save_bundle(bundle, out / "model.json")
    _write_json(out / "run_config.json", {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict()})
    _write_json(out / "mi_scores.json", {"schema_version": SCHEMA_VERSION, **mi_doc})
    (out / "mi_scores.txt").write_text(render_score_report(scores, selected))
    _write_json(out / "cv_report.json", {"schema_version": SCHEMA_VERSION, **report.to_dict()})
    (out / "cv_report.txt").write_text(render_cv_table(report))
    _write_json(out / "test_metrics.json", {"schema_version": SCHEMA_VERSION, **test_metrics})
    (out / "roc_points.txt").write_text(render_roc_points(curve))
    importance_doc = {"schema_version": SCHEMA_VERSION, **importance.to_dict()}
    _write_json(out / "importance.json", importance_doc)
    (out / "importance.txt").write_text(render_importance(importance))

    return TrainArtifacts(
        bundle=bundle,
        cv_report=report,
        test_metrics=test_metrics,
        importance=importance_doc,
    )
