"""CART decision trees with weighted Gini impurity, plus bagging and random
forests built on them.

Categorical splits use the ordered-level trick for binary targets: levels are
sorted by their weighted positive rate and only contiguous cuts of that
ordering are scanned, which finds the optimal binary partition without
enumerating all subsets. Numeric splits scan midpoints between distinct
sorted values. Ties are broken toward the lowest feature index, then the
lowest cut, by scanning in that order and requiring strict improvement.

min_leaf is a weight mass, not a row count, so fits with integer weights are
identical to fits on physically replicated rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import NUMERIC
from ..encode import Column


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_leaf: float = 1.0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_leaf <= 0:
            raise ValueError(f"min_leaf must be positive, got {self.min_leaf}")


@dataclass
class TreeNode:
    feature: int = -1            # column index; -1 marks a leaf
    threshold: float = 0.0       # numeric split: go left when value <= threshold
    left_levels: tuple[int, ...] = ()  # categorical split: level codes going left
    left: int = -1
    right: int = -1
    share: float = 0.0           # weighted Terminated share at this node


@dataclass
class FittedTree:
    columns: list[Column]
    nodes: list[TreeNode] = field(default_factory=list)

    def leaf_shares(self, cols: list[np.ndarray]) -> np.ndarray:
        n = len(cols[0]) if cols else 0
        out = np.empty(n, dtype=float)
        stack = [(0, np.arange(n))]
        while stack:
            node_id, idx = stack.pop()
            node = self.nodes[node_id]
            if node.feature < 0:
                out[idx] = node.share
                continue
            col = cols[node.feature]
            if self.columns[node.feature].kind == NUMERIC:
                go_left = col[idx] <= node.threshold
            else:
                lookup = np.zeros(len(self.columns[node.feature].levels), dtype=bool)
                lookup[list(node.left_levels)] = True
                go_left = lookup[col[idx]]
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {
                    "feature": n.feature,
                    "threshold": n.threshold,
                    "left_levels": list(n.left_levels),
                    "left": n.left,
                    "right": n.right,
                    "share": n.share,
                }
                for n in self.nodes
            ]
        }

    @staticmethod
    def from_dict(doc: dict, columns: list[Column]) -> "FittedTree":
        tree = FittedTree(columns)
        tree.nodes = [
            TreeNode(
                feature=nd["feature"],
                threshold=nd["threshold"],
                left_levels=tuple(nd["left_levels"]),
                left=nd["left"],
                right=nd["right"],
                share=nd["share"],
            )
            for nd in doc["nodes"]
        ]
        return tree


def _best_numeric_cut(values, w, wy, w_total, pos_total, min_leaf):
    order = np.argsort(values, kind="stable")
    sv = values[order]
    cw = np.cumsum(w[order])
    cwy = np.cumsum(wy[order])
    boundary = np.nonzero(sv[:-1] < sv[1:])[0]
    if boundary.size == 0:
        return None
    wl = cw[boundary]
    pl = cwy[boundary]
    wr = w_total - wl
    pr = pos_total - pl
    valid = (wl >= min_leaf) & (wr >= min_leaf)
    if not np.any(valid):
        return None
    # minimizing sum of child weights * gini, up to the constant factor 2
    score = np.where(valid, pl * (wl - pl) / wl + pr * (wr - pr) / wr, np.inf)
    b = int(np.argmin(score))
    if not np.isfinite(score[b]):
        return None
    return float(score[b]), float((sv[boundary[b]] + sv[boundary[b] + 1]) / 2.0)


def _best_categorical_cut(codes, w, wy, w_total, pos_total, n_levels, min_leaf):
    tot = np.bincount(codes, weights=w, minlength=n_levels)
    pos = np.bincount(codes, weights=wy, minlength=n_levels)
    present = np.nonzero(tot > 0)[0]
    if present.size < 2:
        return None
    rate = pos[present] / tot[present]
    order = np.lexsort((present, rate))
    lv = present[order]
    ctot = np.cumsum(tot[lv])
    cpos = np.cumsum(pos[lv])
    wl = ctot[:-1]
    pl = cpos[:-1]
    wr = w_total - wl
    pr = pos_total - pl
    valid = (wl >= min_leaf) & (wr >= min_leaf)
    if not np.any(valid):
        return None
    score = np.where(valid, pl * (wl - pl) / wl + pr * (wr - pr) / wr, np.inf)
    c = int(np.argmin(score))
    if not np.isfinite(score[c]):
        return None
    return float(score[c]), tuple(int(x) for x in lv[: c + 1])


def grow_tree(
    columns: list[Column],
    cols: list[np.ndarray],
    y: np.ndarray,
    w: np.ndarray,
    params: TreeParams,
    mtry: int | None = None,
    rng: np.random.Generator | None = None,
) -> FittedTree:
    """Grow one CART tree; mtry, when set, samples candidate features per node."""
    tree = FittedTree(columns)
    wy = w * y
    p = len(columns)

    # Zero-gain splits are kept as long as both children satisfy min_leaf:
    # parity-style problems (e.g. XOR) need a first cut that does not reduce
    # impurity at all. Termination still holds because every split strictly
    # shrinks both sides.
    tree.nodes.append(TreeNode())
    stack = [(0, np.arange(len(y)), 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        node = tree.nodes[node_id]
        w_total = float(w[idx].sum())
        pos_total = float(wy[idx].sum())
        node.share = pos_total / w_total

        depth_ok = params.max_depth is None or depth < params.max_depth
        if not depth_ok or pos_total <= 0 or pos_total >= w_total or w_total < 2 * params.min_leaf:
            continue

        if mtry is not None and mtry < p:
            candidates = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            candidates = np.arange(p)

        best_score = np.inf
        best_feature = -1
        best_threshold = 0.0
        best_levels: tuple[int, ...] = ()
        for j in candidates:
            col = cols[j][idx]
            if columns[j].kind == NUMERIC:
                found = _best_numeric_cut(col, w[idx], wy[idx], w_total, pos_total, params.min_leaf)
                if found and found[0] < best_score:
                    best_score, best_threshold = found
                    best_feature = int(j)
                    best_levels = ()
            else:
                found = _best_categorical_cut(
                    col, w[idx], wy[idx], w_total, pos_total,
                    len(columns[j].levels), params.min_leaf,
                )
                if found and found[0] < best_score:
                    best_score, best_levels = found
                    best_feature = int(j)

        if best_feature < 0:
            continue

        col = cols[best_feature][idx]
        if columns[best_feature].kind == NUMERIC:
            go_left = col <= best_threshold
        else:
            lookup = np.zeros(len(columns[best_feature].levels), dtype=bool)
            lookup[list(best_levels)] = True
            go_left = lookup[col]

        node.feature = best_feature
        node.threshold = best_threshold
        node.left_levels = best_levels
        node.left = len(tree.nodes)
        tree.nodes.append(TreeNode())
        node.right = len(tree.nodes)
        tree.nodes.append(TreeNode())
        stack.append((node.left, idx[go_left], depth + 1))
        stack.append((node.right, idx[~go_left], depth + 1))
    return tree


@dataclass(frozen=True)
class BagParams:
    n_trees: int = 100
    tree: TreeParams = TreeParams()

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    mtry: int = 1
    tree: TreeParams = TreeParams()

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")


@dataclass
class FittedEnsemble:
    trees: list[FittedTree]

    def vote_shares(self, cols: list[np.ndarray]) -> np.ndarray:
        """Fraction of trees voting Terminated per row."""
        n = len(cols[0]) if cols else 0
        votes = np.zeros(n, dtype=float)
        for tree in self.trees:
            votes += tree.leaf_shares(cols) >= 0.5
        return votes / len(self.trees)


def grow_ensemble(
    columns: list[Column],
    cols: list[np.ndarray],
    y: np.ndarray,
    w: np.ndarray,
    n_trees: int,
    tree_params: TreeParams,
    mtry: int | None,
    seed: int,
) -> FittedEnsemble:
    """Bootstrap + grow n_trees; per-tree generators derive from one seed."""
    n = len(y)
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(children[t])
        boot = rng.integers(0, n, size=n)
        boot_cols = [c[boot] for c in cols]
        trees.append(
            grow_tree(columns, boot_cols, y[boot], w[boot], tree_params, mtry, rng)
        )
    return FittedEnsemble(trees)
