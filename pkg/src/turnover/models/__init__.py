"""Classifier families: Naive Bayes, LDA, RBF SVM, CART, bagged trees, and
random forests, behind a single fit / predict_proba / predict_class surface.

Every fit canonically re-sorts training rows by id before touching them, so
row order never influences the fitted state. Predictions are refused when the
dataset's schema fingerprint (selected features + kinds + domains) differs
from the one recorded at fit time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..balance import WeightedDataset
from ..data import Dataset, Label, Schema
from ..encode import NativeCodec, OneHotCodec, labels01, schema_fingerprint
from .cart import (
    BagParams,
    FittedEnsemble,
    FittedTree,
    ForestParams,
    TreeParams,
    grow_ensemble,
    grow_tree,
)
from .lda import FittedLda, LdaError, LdaParams, fit_lda
from .naive_bayes import FittedNB, NBParams, fit_nb
from .svm import FittedSvm, SvmParams, fit_svm

NAIVE_BAYES = "naive_bayes"
LDA = "lda"
SVM_RBF = "svm_rbf"
TREE = "tree"
TREE_BAG = "tree_bag"
RANDOM_FOREST = "random_forest"

FAMILIES = (NAIVE_BAYES, LDA, SVM_RBF, TREE, TREE_BAG, RANDOM_FOREST)

Hyperparameters = NBParams | LdaParams | SvmParams | TreeParams | BagParams | ForestParams

_HP_TYPES = {
    NAIVE_BAYES: NBParams,
    LDA: LdaParams,
    SVM_RBF: SvmParams,
    TREE: TreeParams,
    TREE_BAG: BagParams,
    RANDOM_FOREST: ForestParams,
}


class ModelError(Exception):
    pass


class FingerprintError(ModelError):
    """Dataset schema does not match the features the model was fitted on."""


def default_hyperparameters(family: str) -> Hyperparameters:
    return _HP_TYPES[family]()


def hyperparameters_to_dict(hp: Hyperparameters) -> dict:
    if isinstance(hp, NBParams):
        return {"laplace_alpha": hp.laplace_alpha}
    if isinstance(hp, LdaParams):
        return {"ridge": hp.ridge}
    if isinstance(hp, SvmParams):
        return {
            "cost": hp.cost,
            "gamma": hp.gamma,
            "smo_tolerance": hp.smo_tolerance,
            "max_passes": hp.max_passes,
        }
    if isinstance(hp, TreeParams):
        return {"max_depth": hp.max_depth, "min_leaf": hp.min_leaf}
    if isinstance(hp, BagParams):
        return {"n_trees": hp.n_trees, "tree": hyperparameters_to_dict(hp.tree)}
    if isinstance(hp, ForestParams):
        return {"n_trees": hp.n_trees, "mtry": hp.mtry, "tree": hyperparameters_to_dict(hp.tree)}
    raise ModelError(f"unknown hyperparameter type {type(hp).__name__}")


def hyperparameters_from_dict(family: str, doc: dict) -> Hyperparameters:
    if family == NAIVE_BAYES:
        return NBParams(laplace_alpha=doc.get("laplace_alpha", 1.0))
    if family == LDA:
        return LdaParams(ridge=doc.get("ridge", 1e-3))
    if family == SVM_RBF:
        return SvmParams(
            cost=doc.get("cost", 1.0),
            gamma=doc.get("gamma", 0.1),
            smo_tolerance=doc.get("smo_tolerance", 1e-3),
            max_passes=doc.get("max_passes", 200),
        )
    if family == TREE:
        return TreeParams(max_depth=doc.get("max_depth"), min_leaf=doc.get("min_leaf", 1.0))
    if family == TREE_BAG:
        tree = hyperparameters_from_dict(TREE, doc.get("tree", {}))
        return BagParams(n_trees=doc.get("n_trees", 100), tree=tree)
    if family == RANDOM_FOREST:
        tree = hyperparameters_from_dict(TREE, doc.get("tree", {}))
        return ForestParams(
            n_trees=doc.get("n_trees", 100), mtry=doc.get("mtry", 1), tree=tree
        )
    raise ModelError(f"unknown family {family!r}")


@dataclass
class TrainedModel:
    family: str
    hyperparams: Hyperparameters
    fitted: object
    selected: tuple[str, ...]
    schema_fingerprint: str
    threshold: float = 0.5
    class_labels: tuple[str, str] = (Label.ACTIVE.value, Label.TERMINATED.value)
    converged: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ModelError(f"threshold must be in (0,1), got {self.threshold}")


def _sorted_by_id(wds: WeightedDataset) -> tuple[Dataset, np.ndarray]:
    ids = wds.dataset.ids()
    order = sorted(range(len(ids)), key=ids.__getitem__)
    ds = wds.dataset.subset(order)
    w = np.asarray([wds.weights[i] for i in order], dtype=float)
    return ds, w


def fit(
    wds: WeightedDataset,
    family: str,
    hp: Hyperparameters | None,
    selected: list[str] | tuple[str, ...],
    seed: int = 0,
    threshold: float = 0.5,
) -> TrainedModel:
    if family not in FAMILIES:
        raise ModelError(f"unknown family {family!r}")
    if hp is None:
        hp = default_hyperparameters(family)
    if not isinstance(hp, _HP_TYPES[family]):
        raise ModelError(
            f"{family} expects {_HP_TYPES[family].__name__}, got {type(hp).__name__}"
        )
    ds, w = _sorted_by_id(wds)
    y = labels01(ds)
    if y.min() == y.max():
        raise ModelError("training data must contain both classes")
    selected = tuple(selected)
    fingerprint = schema_fingerprint(ds.schema, selected)
    converged = True

    if family in (NAIVE_BAYES, TREE, TREE_BAG, RANDOM_FOREST):
        codec = NativeCodec(ds.schema, selected)
        cols = codec.encode(ds)
        if family == NAIVE_BAYES:
            fitted = fit_nb(codec.columns, cols, y, w, hp)
        elif family == TREE:
            fitted = grow_tree(codec.columns, cols, y, w, hp)
        else:
            if family == RANDOM_FOREST:
                if hp.mtry > len(codec.columns):
                    raise ModelError(
                        f"mtry={hp.mtry} exceeds {len(codec.columns)} selected features"
                    )
                mtry = hp.mtry
            else:
                mtry = None
            fitted = grow_ensemble(
                codec.columns, cols, y, w, hp.n_trees, hp.tree, mtry, seed
            )
    else:
        codec = OneHotCodec(ds.schema, selected)
        if family == SVM_RBF:
            codec.fit_standardizer(ds, w)
            X = codec.encode(ds)
            fitted = fit_svm(X, y, w, hp, codec.state(), seed)
            converged = fitted.converged
        else:
            X = codec.encode(ds)
            try:
                fitted = fit_lda(X, y, w, hp, codec.state())
            except LdaError as e:
                raise ModelError(str(e)) from e

    return TrainedModel(
        family=family,
        hyperparams=hp,
        fitted=fitted,
        selected=selected,
        schema_fingerprint=fingerprint,
        threshold=threshold,
        converged=converged,
        seed=seed,
    )


def _check_fingerprint(m: TrainedModel, ds: Dataset) -> None:
    fp = schema_fingerprint(ds.schema, m.selected)
    if fp != m.schema_fingerprint:
        raise FingerprintError(
            "dataset schema fingerprint does not match the model "
            f"({fp[:12]}... vs {m.schema_fingerprint[:12]}...)"
        )


def predict_proba(m: TrainedModel, ds: Dataset) -> np.ndarray:
    """Per-row probability of Terminated."""
    _check_fingerprint(m, ds)
    if m.family in (NAIVE_BAYES, TREE, TREE_BAG, RANDOM_FOREST):
        codec = NativeCodec(ds.schema, m.selected)
        cols = codec.encode(ds)
        if m.family == NAIVE_BAYES:
            return m.fitted.predict_proba(cols)
        if m.family == TREE:
            return m.fitted.leaf_shares(cols)
        return m.fitted.vote_shares(cols)
    codec = OneHotCodec(ds.schema, m.selected)
    codec.load_state(m.fitted.codec_state)
    X = codec.encode(ds)
    return m.fitted.predict_proba(X)


def predict_class(m: TrainedModel, ds: Dataset) -> list[Label]:
    """Terminated iff probability >= threshold (boundary inclusive)."""
    probs = predict_proba(m, ds)
    return [Label.TERMINATED if p >= m.threshold else Label.ACTIVE for p in probs]


def _fitted_to_dict(m: TrainedModel) -> dict:
    if m.family in (TREE_BAG, RANDOM_FOREST):
        return {"trees": [t.to_dict() for t in m.fitted.trees]}
    return m.fitted.to_dict()


def model_to_dict(m: TrainedModel) -> dict:
    return {
        "family": m.family,
        "hyperparams": hyperparameters_to_dict(m.hyperparams),
        "fitted": _fitted_to_dict(m),
        "selected": list(m.selected),
        "schema_fingerprint": m.schema_fingerprint,
        "threshold": m.threshold,
        "class_labels": list(m.class_labels),
        "converged": m.converged,
        "seed": m.seed,
    }


def model_from_dict(doc: dict, schema: Schema) -> TrainedModel:
    family = doc["family"]
    hp = hyperparameters_from_dict(family, doc["hyperparams"])
    selected = tuple(doc["selected"])
    codec = NativeCodec(schema, selected)
    fitted_doc = doc["fitted"]
    if family == NAIVE_BAYES:
        fitted = FittedNB.from_dict(fitted_doc, codec.columns)
    elif family == LDA:
        fitted = FittedLda.from_dict(fitted_doc)
    elif family == SVM_RBF:
        fitted = FittedSvm.from_dict(fitted_doc)
    elif family == TREE:
        fitted = FittedTree.from_dict(fitted_doc, codec.columns)
    elif family in (TREE_BAG, RANDOM_FOREST):
        fitted = FittedEnsemble(
            [FittedTree.from_dict(td, codec.columns) for td in fitted_doc["trees"]]
        )
    else:
        raise ModelError(f"unknown family {family!r}")
    m = TrainedModel(
        family=family,
        hyperparams=hp,
        fitted=fitted,
        selected=selected,
        schema_fingerprint=doc["schema_fingerprint"],
        threshold=doc["threshold"],
        class_labels=tuple(doc["class_labels"]),
        converged=doc.get("converged", True),
        seed=doc.get("seed", 0),
    )
    expected = schema_fingerprint(schema, selected)
    if expected != m.schema_fingerprint:
        raise FingerprintError("persisted model does not match the given schema")
    return m


def save_model(m: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), sort_keys=True) + "\n")


def load_model(path: str | Path, schema: Schema) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()), schema)
