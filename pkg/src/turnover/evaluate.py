"""Cross-validated model selection and scoring.

ROC curves sweep all distinct score thresholds, grouping tied scores into one
step, so the trapezoidal area equals the Mann-Whitney statistic
P(score_pos > score_neg) + 0.5 * P(equal) exactly. Grid search rebalances the
training portion of each fold only; holdout rows are never resampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .balance import ResamplingMethod, rebalance
from .data import Dataset, Label
from .models import (
    Hyperparameters,
    TrainedModel,
    fit,
    hyperparameters_to_dict,
    predict_class,
    predict_proba,
)


class EvalError(Exception):
    pass


@dataclass(frozen=True)
class RocCurve:
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), from (0,0) to (1,1)
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """ROC polyline and trapezoidal AUC over all distinct score thresholds."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(
        [1 if (l is Label.TERMINATED or l == Label.TERMINATED.value) else 0 for l in labels]
    )
    if len(s) != len(y):
        raise EvalError("scores and labels must align")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvalError("both classes must be present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    distinct = np.nonzero(np.diff(s_sorted))[0]
    step_ends = np.append(distinct, len(s) - 1)
    tps = np.cumsum(y_sorted)[step_ends]
    fps = step_ends + 1 - tps
    tpr = np.concatenate(([0.0], tps / n_pos))
    fpr = np.concatenate(([0.0], fps / n_neg))
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    points = tuple(zip(fpr.tolist(), tpr.tolist()))
    return RocCurve(points, auc)


@dataclass(frozen=True)
class ConfusionMetrics:
    """Threshold metrics of the Terminated flag.

    leaver_precision: share of flagged leavers who really left, TP/(TP+FP).
    stayer_recall:    share of actual stayers correctly flagged, TN/(TN+FP).
    sensitivity / specificity carry the textbook definitions. Metrics with a
    zero denominator are None (undefined), never 0.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    leaver_precision: float | None
    stayer_recall: float | None
    sensitivity: float | None
    specificity: float | None


def confusion_metrics(predicted, actual) -> ConfusionMetrics:
    tp = fp = tn = fn = 0
    for p, a in zip(predicted, actual, strict=True):
        if a is Label.UNKNOWN:
            raise EvalError("actual labels must be known")
        if p is Label.TERMINATED:
            if a is Label.TERMINATED:
                tp += 1
            else:
                fp += 1
        else:
            if a is Label.TERMINATED:
                fn += 1
            else:
                tn += 1

    def ratio(num, den):
        return num / den if den > 0 else None

    return ConfusionMetrics(
        tp=tp, fp=fp, tn=tn, fn=fn,
        leaver_precision=ratio(tp, tp + fp),
        stayer_recall=ratio(tn, tn + fp),
        sensitivity=ratio(tp, tp + fn),
        specificity=ratio(tn, tn + fp),
    )


@dataclass(frozen=True)
class FoldMetrics:
    fold_index: int
    auc: float
    leaver_precision: float | None
    stayer_recall: float | None
    sensitivity: float | None
    specificity: float | None

    def to_dict(self) -> dict:
        return {
            "fold_index": self.fold_index,
            "auc": self.auc,
            "leaver_precision": self.leaver_precision,
            "stayer_recall": self.stayer_recall,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
        }


def stratified_kfold(ds: Dataset, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint index folds with per-fold class counts within 1 of proportional."""
    if k < 2:
        raise EvalError(f"k must be >= 2, got {k}")
    by_class: dict[str, list[int]] = {}
    for i, r in enumerate(ds.rows):
        if r.label is Label.UNKNOWN:
            raise EvalError(f"row {r.id!r} has an Unknown label")
        by_class.setdefault(r.label.value, []).append(i)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in sorted(by_class):
        members = np.array(by_class[cls])
        if len(members) < k:
            raise EvalError(f"class {cls!r} has {len(members)} rows, fewer than k={k}")
        rng.shuffle(members)
        for fold_id, chunk in enumerate(np.array_split(members, k)):
            folds[fold_id].extend(chunk.tolist())
    return [np.array(sorted(f)) for f in folds]


def holdout_split(ds: Dataset, fraction: float, seed: int) -> np.ndarray:
    """Single stratified holdout: indices of the held-out evaluation rows."""
    if not (0.0 < fraction < 1.0):
        raise EvalError(f"holdout fraction must be in (0,1), got {fraction}")
    by_class: dict[str, list[int]] = {}
    for i, r in enumerate(ds.rows):
        if r.label is Label.UNKNOWN:
            raise EvalError(f"row {r.id!r} has an Unknown label")
        by_class.setdefault(r.label.value, []).append(i)
    rng = np.random.default_rng(seed)
    held: list[int] = []
    for cls in sorted(by_class):
        members = np.array(by_class[cls])
        rng.shuffle(members)
        take = max(1, math.floor(fraction * len(members) + 0.5))
        if take >= len(members):
            raise EvalError(f"holdout would consume every {cls!r} row")
        held.extend(members[:take].tolist())
    return np.array(sorted(held))


@dataclass(frozen=True)
class GridConfig:
    family: str
    hyperparams: Hyperparameters
    resampling: ResamplingMethod

    def describe(self) -> dict:
        return {
            "family": self.family,
            "hyperparams": hyperparameters_to_dict(self.hyperparams),
            "resampling": self.resampling.to_dict(),
        }


def _simplicity_key(cfg: GridConfig) -> tuple:
    """Tie-break ordering: fewer trees first, larger regularization first."""
    hp = cfg.hyperparams
    doc = hyperparameters_to_dict(hp)
    n_trees = doc.get("n_trees", 0)
    regularization = 0.0
    if cfg.family == "lda":
        regularization = -doc["ridge"]
    elif cfg.family == "naive_bayes":
        regularization = -doc["laplace_alpha"]
    elif cfg.family == "svm_rbf":
        regularization = doc["cost"]  # small cost = strong regularization
    depth = 0
    tree_doc = doc.get("tree", doc if cfg.family == "tree" else {})
    if tree_doc:
        depth = tree_doc.get("max_depth") or 10**9
    return (n_trees, regularization, depth)


@dataclass
class ConfigResult:
    config: GridConfig
    declaration_index: int
    fold_metrics: list[FoldMetrics] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def mean_auc(self) -> float | None:
        if not self.fold_metrics:
            return None
        return float(np.mean([m.auc for m in self.fold_metrics]))

    @property
    def sd_auc(self) -> float | None:
        if len(self.fold_metrics) < 2:
            return None
        return float(np.std([m.auc for m in self.fold_metrics], ddof=1))

    def to_dict(self) -> dict:
        return {
            "config": self.config.describe(),
            "mean_auc": self.mean_auc,
            "sd_auc": self.sd_auc,
            "folds": [m.to_dict() for m in self.fold_metrics],
            "errors": list(self.errors),
        }


@dataclass
class CvReport:
    results: list[ConfigResult]
    best: GridConfig | None
    k: int
    seed: int
    selection_metric: str = "mean_auc"

    def to_dict(self) -> dict:
        return {
            "selection_metric": self.selection_metric,
            "k": self.k,
            "seed": self.seed,
            "best": self.best.describe() if self.best else None,
            "results": [r.to_dict() for r in self.results],
        }


def _cell_seed(seed: int, config_index: int, method_index: int, fold_index: int) -> int:
    ss = np.random.SeedSequence([seed, config_index, method_index, fold_index])
    return int(ss.generate_state(1)[0])


def grid_search(
    train: Dataset,
    families_and_grids: list[tuple[str, list[Hyperparameters]]],
    resampling_methods: list[ResamplingMethod],
    k: int,
    seed: int,
    selected: list[str] | tuple[str, ...] | None = None,
    threshold: float = 0.5,
    holdout_fraction: float | None = None,
) -> CvReport:
    """Cross every (family, hyperparameter point, resampling method).

    Each fold rebalances its training portion only, fits, and scores the
    untouched holdout rows. Configurations whose fits fail record the error
    per cell and stay out of the ranking; the best configuration maximizes
    mean AUC with ties broken by simplicity, then declaration order.
    """
    if selected is None:
        selected = train.schema.feature_names
    if holdout_fraction is not None:
        held = holdout_split(train, holdout_fraction, seed)
        folds = [held]
    else:
        folds = stratified_kfold(train, k, seed)

    results: list[ConfigResult] = []
    decl = 0
    for cfg_idx, (family, grid) in enumerate(families_and_grids):
        for hp_idx, hp in enumerate(grid):
            for m_idx, method in enumerate(resampling_methods):
                cfg = GridConfig(family, hp, method)
                result = ConfigResult(cfg, decl)
                decl += 1
                for fold_idx, fold in enumerate(folds):
                    fold_set = set(fold.tolist())
                    train_idx = [i for i in range(len(train.rows)) if i not in fold_set]
                    cell_seed = _cell_seed(seed, cfg_idx * 1000 + hp_idx, m_idx, fold_idx)
                    try:
                        wds = rebalance(
                            train.subset(train_idx),
                            ResamplingMethod(
                                variant=method.variant,
                                seed=cell_seed,
                                k_neighbors=method.k_neighbors,
                                shrink=method.shrink,
                            ),
                        )
                        model = fit(wds, family, hp, selected, seed=cell_seed,
                                    threshold=threshold)
                        holdout = train.subset(fold.tolist())
                        probs = predict_proba(model, holdout)
                        curve = roc_auc(probs, holdout.labels())
                        cm = confusion_metrics(predict_class(model, holdout), holdout.labels())
                        result.fold_metrics.append(
                            FoldMetrics(
                                fold_index=fold_idx,
                                auc=curve.auc,
                                leaver_precision=cm.leaver_precision,
                                stayer_recall=cm.stayer_recall,
                                sensitivity=cm.sensitivity,
                                specificity=cm.specificity,
                            )
                        )
                    except Exception as e:  # recorded per cell, not fatal
                        result.errors.append(f"fold {fold_idx}: {e}")
                results.append(result)

    scored = [r for r in results if r.mean_auc is not None]
    best = None
    if scored:
        best = min(
            scored,
            key=lambda r: (-r.mean_auc, _simplicity_key(r.config), r.declaration_index),
        ).config
    return CvReport(results=results, best=best, k=k, seed=seed)


@dataclass(frozen=True)
class ImportanceEntry:
    feature: str
    mean_drop: float
    std_error: float | None
    repetitions: int


@dataclass
class ImportanceReport:
    baseline_auc: float
    entries: list[ImportanceEntry]

    def ranked(self) -> list[ImportanceEntry]:
        return sorted(self.entries, key=lambda e: (-e.mean_drop, e.feature))

    def to_dict(self) -> dict:
        return {
            "baseline_auc": self.baseline_auc,
            "entries": [
                {
                    "feature": e.feature,
                    "mean_drop": e.mean_drop,
                    "std_error": e.std_error,
                    "repetitions": e.repetitions,
                }
                for e in self.ranked()
            ],
        }


def permutation_importance(
    m: TrainedModel, ds: Dataset, repetitions: int, seed: int
) -> ImportanceReport:
    """Mean AUC drop per selected feature under column permutation."""
    if repetitions < 1:
        raise EvalError(f"repetitions must be >= 1, got {repetitions}")
    baseline = roc_auc(predict_proba(m, ds), ds.labels()).auc
    rng = np.random.default_rng(seed)
    entries = []
    n = len(ds.rows)
    for feature in m.selected:
        drops = []
        for _ in range(repetitions):
            perm = rng.permutation(n)
            column = ds.column(feature)
            rows = [
                r.with_values({feature: column[perm[i]]})
                for i, r in enumerate(ds.rows)
            ]
            shuffled = ds.replace_rows(rows)
            drops.append(baseline - roc_auc(predict_proba(m, shuffled), ds.labels()).auc)
        se = float(np.std(drops, ddof=1) / np.sqrt(repetitions)) if repetitions > 1 else None
        entries.append(
            ImportanceEntry(feature, float(np.mean(drops)), se, repetitions)
        )
    return ImportanceReport(baseline, entries)


def render_cv_table(report: CvReport) -> str:
    """Human-readable grid results: sampling x family with AUC and flag metrics."""
    lines = [
        f"{'resampling':<10} {'family':<14} {'mean AUC':>9} {'sd':>7} "
        f"{'leaver prec.':>13} {'stayer recall':>14}"
    ]

    def fmt(v, width):
        return f"{v:>{width}.3f}" if v is not None else " " * (width - 2) + "--"

    for r in sorted(
        report.results,
        key=lambda r: (-(r.mean_auc if r.mean_auc is not None else -1), r.declaration_index),
    ):
        lp = [m.leaver_precision for m in r.fold_metrics if m.leaver_precision is not None]
        sr = [m.stayer_recall for m in r.fold_metrics if m.stayer_recall is not None]
        lines.append(
            f"{r.config.resampling.name:<10} {r.config.family:<14} "
            f"{fmt(r.mean_auc, 9)} {fmt(r.sd_auc, 7)} "
            f"{fmt(float(np.mean(lp)) if lp else None, 13)} "
            f"{fmt(float(np.mean(sr)) if sr else None, 14)}"
        )
    if report.best:
        lines.append("")
        lines.append(f"best: {report.best.describe()}")
    return "\n".join(lines) + "\n"


def render_importance(report: ImportanceReport) -> str:
    lines = [f"baseline AUC: {report.baseline_auc:.4f}", ""]
    entries = report.ranked()
    width = max((len(e.feature) for e in entries), default=8)
    top = max((e.mean_drop for e in entries), default=0.0)
    for e in entries:
        bar = "#" * int(round(30 * e.mean_drop / top)) if top > 0 else ""
        se = f" +/-{e.std_error:.4f}" if e.std_error is not None else ""
        lines.append(f"{e.feature:<{width}}  {e.mean_drop:+.4f}{se}  {bar}")
    return "\n".join(lines) + "\n"


def render_roc_points(curve: RocCurve) -> str:
    """Two-column numeric text (fpr tpr) for external plotting."""
    return "\n".join(f"{x:.10f} {y:.10f}" for x, y in curve.points) + "\n"
