"""CART random forests for mixed-type imputation targets.

Regression trees minimize within-node variance (equivalently SSE);
classification trees minimize Gini impurity. Each tree fits on a bootstrap
resample with mtry candidate variables per split; prediction is the mean
over trees (regression) or a majority vote with the lowest class index
winning ties (classification). Out-of-bag rows are tracked per tree and an
aggregate OOB error is recorded.

All randomness comes from per-tree streams derived with a counter, so a
serial and a parallel fit would produce identical forests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyTrainingSet
from .rng import generator


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters. mtry/min_leaf of None mean the per-target
    defaults: mtry ceil(sqrt(p)) classification / ceil(p/3) regression,
    min_leaf 1 classification / 5 regression. max_iterations caps the
    imputation sweep count."""

    n_trees: int = 100
    mtry: int | None = None
    min_leaf: int | None = None
    seed: int = 0
    max_iterations: int = 10

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be >= 1, got {self.mtry}")
        if self.min_leaf is not None and self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def resolved_mtry(self, p: int, classification: bool) -> int:
        if self.mtry is not None:
            return min(self.mtry, p)
        m = math.ceil(math.sqrt(p)) if classification else math.ceil(p / 3)
        return max(1, min(m, p))

    def resolved_min_leaf(self, classification: bool) -> int:
        if self.min_leaf is not None:
            return self.min_leaf
        return 1 if classification else 5


@dataclass
class _Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[np.ndarray] = field(default_factory=list)  # mean or class counts

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(np.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.empty(0))
        return len(self.feature) - 1

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        out = []
        for i in range(X.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if X[i, self.feature[node]] <= self.threshold[node] else self.right[node]
            out.append(self.value[node])
        return np.asarray(out)


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    feats: np.ndarray,
    min_leaf: int,
    n_classes: int,
) -> tuple[int, float, np.ndarray, np.ndarray] | None:
    best_score = np.inf
    best: tuple[int, float, np.ndarray, np.ndarray] | None = None
    yv = y[rows]
    n = rows.size
    for f in feats:
        xv = X[rows, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        ys = yv[order]
        boundary = xs[1:] != xs[:-1]
        n_left = np.arange(1, n)
        ok = boundary & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        if n_classes == 0:
            csum = np.cumsum(ys)[:-1]
            csq = np.cumsum(ys * ys)[:-1]
            total, total_sq = csum[-1] + ys[-1], csq[-1] + ys[-1] ** 2
            n_right = n - n_left
            sse = (csq - csum**2 / n_left) + ((total_sq - csq) - (total - csum) ** 2 / n_right)
            score = np.where(ok, sse, np.inf)
        else:
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), ys.astype(np.int64)] = 1.0
            counts = np.cumsum(onehot, axis=0)[:-1]
            totals = counts[-1] + onehot[-1]
            n_right = (n - n_left).astype(np.float64)
            gini_l = n_left - (counts**2).sum(axis=1) / n_left
            rc = totals[None, :] - counts
            gini_r = n_right - (rc**2).sum(axis=1) / n_right
            score = np.where(ok, gini_l + gini_r, np.inf)
        idx = int(np.argmin(score))
        if score[idx] < best_score:
            best_score = float(score[idx])
            thr = 0.5 * (xs[idx] + xs[idx + 1])
            left_rows = rows[order[: idx + 1]]
            right_rows = rows[order[idx + 1 :]]
            best = (int(f), thr, left_rows, right_rows)
    return best


def _leaf_value(y: np.ndarray, rows: np.ndarray, n_classes: int) -> np.ndarray:
    if n_classes == 0:
        return np.array([float(np.mean(y[rows]))])
    return np.bincount(y[rows].astype(np.int64), minlength=n_classes).astype(np.float64)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    rng: np.random.Generator,
    mtry: int,
    min_leaf: int,
    n_classes: int,
) -> _Tree:
    tree = _Tree()
    stack = [(tree.add_node(), rows)]
    p = X.shape[1]
    while stack:
        node, node_rows = stack.pop()
        yv = y[node_rows]
        if node_rows.size < 2 * min_leaf or np.all(yv == yv[0]):
            tree.value[node] = _leaf_value(y, node_rows, n_classes)
            continue
        feats = rng.choice(p, size=mtry, replace=False) if mtry < p else np.arange(p)
        split = _best_split(X, y, node_rows, feats, min_leaf, n_classes)
        if split is None:
            tree.value[node] = _leaf_value(y, node_rows, n_classes)
            continue
        f, thr, left_rows, right_rows = split
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = tree.add_node()
        tree.right[node] = tree.add_node()
        stack.append((tree.right[node], right_rows))
        stack.append((tree.left[node], left_rows))
    return tree


@dataclass(frozen=True)
class RandomForest:
    """Fitted forest; kind is "regression" or "classification"."""

    kind: str
    trees: tuple[_Tree, ...] = field(repr=False)
    oob_rows: tuple[np.ndarray, ...] = field(repr=False)
    n_classes: int
    oob_error: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.kind == "regression":
            acc = np.zeros(X.shape[0])
            for tree in self.trees:
                acc += tree.predict_rows(X)[:, 0]
            return acc / len(self.trees)
        votes = np.zeros((X.shape[0], self.n_classes))
        for tree in self.trees:
            counts = tree.predict_rows(X)
            votes[np.arange(X.shape[0]), np.argmax(counts, axis=1)] += 1.0
        return np.argmax(votes, axis=1).astype(np.float64)  # argmax takes lowest index on ties


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig,
    classification: bool = False,
    n_classes: int = 0,
) -> RandomForest:
    """Fit a forest of n_trees bootstrap CART trees.

    Classification targets must be level codes 0..n_classes-1. Constant y
    yields constant-leaf trees (a valid degenerate predictor).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n == 0:
        raise EmptyTrainingSet("no rows to fit on")
    if classification and n_classes < 2:
        raise ConfigError("classification needs n_classes >= 2")
    mtry = config.resolved_mtry(p, classification)
    min_leaf = config.resolved_min_leaf(classification)
    nc = n_classes if classification else 0
    trees: list[_Tree] = []
    oob: list[np.ndarray] = []
    for t in range(config.n_trees):
        rng = generator(config.seed, "tree", t)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y, boot, rng, mtry, min_leaf, nc))
        in_bag = np.zeros(n, dtype=bool)
        in_bag[boot] = True
        oob.append(np.flatnonzero(~in_bag))
    forest = RandomForest(
        kind="classification" if classification else "regression",
        trees=tuple(trees),
        oob_rows=tuple(oob),
        n_classes=nc,
        oob_error=np.nan,
    )
    return RandomForest(
        kind=forest.kind,
        trees=forest.trees,
        oob_rows=forest.oob_rows,
        n_classes=nc,
        oob_error=_oob_error(forest, X, y),
    )


def _oob_error(forest: RandomForest, X: np.ndarray, y: np.ndarray) -> float:
    """OOB MSE (regression) or misclassification rate (classification),
    aggregated over rows covered by at least one tree's OOB set."""
    n = X.shape[0]
    if forest.kind == "regression":
        acc = np.zeros(n)
        cnt = np.zeros(n)
        for tree, rows in zip(forest.trees, forest.oob_rows):
            if rows.size:
                acc[rows] += tree.predict_rows(X[rows])[:, 0]
                cnt[rows] += 1.0
        covered = cnt > 0
        if not covered.any():
            return float("nan")
        pred = acc[covered] / cnt[covered]
        return float(np.mean((pred - y[covered]) ** 2))
    votes = np.zeros((n, forest.n_classes))
    cnt = np.zeros(n)
    for tree, rows in zip(forest.trees, forest.oob_rows):
        if rows.size:
            counts = tree.predict_rows(X[rows])
            votes[rows, np.argmax(counts, axis=1)] += 1.0
            cnt[rows] += 1.0
    covered = cnt > 0
    if not covered.any():
        return float("nan")
    pred = np.argmax(votes[covered], axis=1)
    return float(np.mean(pred != y[covered]))
