"""Model-based forest for moderator preselection.

Many deliberately permissive MOB trees (relaxed alpha) are grown on
bootstrap resamples with random moderator subsets; permutation importance
on out-of-bag rows ranks the moderators, and only strictly positive
importances survive preselection.

Per-tree significance uses a Bonferroni multiplier equal to the full
moderator count by default (family_correction), not just the subset
tested in the tree: each tree then applies the same family-wise standard
the main tree would, so spurious splits on noise moderators stay rare and
null importances concentrate at exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, EmptySelection, RankDeficient
from .mob import MobConfig, MobTree, Moderator, grow, predict
from .rng import derive_seed, generator


def _default_tree_config() -> MobConfig:
    return MobConfig(alpha=0.2, mc_replicates=999)


@dataclass(frozen=True)
class MobForestConfig:
    n_trees: int = 300
    moderators_per_tree: int | None = None  # default ceil(sqrt(m))
    sampling: str = "bootstrap"  # "full" exists for equivalence testing only
    tree_config: MobConfig = field(default_factory=_default_tree_config)
    family_correction: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.moderators_per_tree is not None and self.moderators_per_tree < 1:
            raise ConfigError("moderators_per_tree must be >= 1")
        if self.sampling not in ("bootstrap", "full"):
            raise ConfigError(f"sampling must be 'bootstrap' or 'full', got {self.sampling!r}")

    def resolved_subset_size(self, m: int) -> int:
        size = self.moderators_per_tree if self.moderators_per_tree is not None else math.ceil(math.sqrt(m))
        if not 1 <= size <= m:
            raise ConfigError(f"moderators_per_tree={size} outside 1..{m}")
        return size


@dataclass(frozen=True)
class MobForest:
    config: MobForestConfig
    moderator_names: tuple[str, ...]
    trees: tuple[MobTree | None, ...] = field(repr=False)
    subsets: tuple[np.ndarray, ...] = field(repr=False)
    oob_rows: tuple[np.ndarray, ...] = field(repr=False)
    n_failed: int
    y: np.ndarray = field(repr=False)
    baseline: np.ndarray = field(repr=False)
    treatment: np.ndarray = field(repr=False)
    moderators: tuple[Moderator, ...] = field(repr=False)


def fit_forest(
    y: np.ndarray,
    baseline: np.ndarray,
    treatment: np.ndarray,
    moderators: list[Moderator] | tuple[Moderator, ...],
    config: MobForestConfig,
) -> MobForest:
    """Fit the preselection forest; deterministic per seed."""
    y = np.asarray(y, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    treatment = np.asarray(treatment, dtype=np.float64)
    moderators = tuple(moderators)
    m = len(moderators)
    if m < 2:
        raise ConfigError(f"need >= 2 moderators, got {m}")
    n = y.size
    if n < 4 * config.tree_config.min_node_size:
        raise ConfigError(f"need n >= {4 * config.tree_config.min_node_size}, got {n}")
    subset_size = config.resolved_subset_size(m)

    trees: list[MobTree | None] = []
    subsets: list[np.ndarray] = []
    oob: list[np.ndarray] = []
    failed = 0
    for t in range(config.n_trees):
        rng = generator(config.seed, "tree", t)
        subset = np.sort(rng.choice(m, size=subset_size, replace=False))
        if config.sampling == "bootstrap":
            rows = rng.integers(0, n, size=n)
            in_bag = np.zeros(n, dtype=bool)
            in_bag[rows] = True
            oob_t = np.flatnonzero(~in_bag)
        else:
            rows = np.arange(n)
            oob_t = np.empty(0, dtype=np.int64)
        tree_cfg = replace(
            config.tree_config,
            seed=derive_seed(config.seed, "tree", t, "mob"),
            bonferroni_m=m if config.family_correction else None,
        )
        sliced = [
            Moderator(name=mod.name, kind=mod.kind, values=mod.values[rows])
            for mod in (moderators[j] for j in subset)
        ]
        try:
            tree = grow(y[rows], baseline[rows], treatment[rows], sliced, tree_cfg)
        except RankDeficient:
            tree = None  # degenerate resample; skipped by importance
            failed += 1
        trees.append(tree)
        subsets.append(subset)
        oob.append(oob_t)
    return MobForest(
        config=config,
        moderator_names=tuple(mod.name for mod in moderators),
        trees=tuple(trees),
        subsets=tuple(subsets),
        oob_rows=tuple(oob),
        n_failed=failed,
        y=y,
        baseline=baseline,
        treatment=treatment,
        moderators=moderators,
    )


@dataclass(frozen=True)
class ImportanceTable:
    names: tuple[str, ...]
    importance: np.ndarray
    ranks: np.ndarray  # 1 = most important
    selected: np.ndarray  # importance > 0, strictly

    def rows(self) -> list[dict]:
        return [
            {
                "name": self.names[j],
                "importance": float(self.importance[j]),
                "rank": int(self.ranks[j]),
                "selected": bool(self.selected[j]),
            }
            for j in range(len(self.names))
        ]


def _split_variables(tree: MobTree) -> set[str]:
    return {nd.split_variable for nd in tree.nodes() if nd.split_variable is not None}


def permutation_importance(forest: MobForest) -> ImportanceTable:
    """Mean OOB MSE increase per moderator over the trees containing it.

    A moderator no split of a tree uses contributes exactly 0 from that
    tree (permuting it cannot change any OOB prediction); a moderator never
    sampled into any tree scores 0 overall.
    """
    m = len(forest.moderator_names)
    sums = np.zeros(m)
    counts = np.zeros(m, dtype=np.int64)
    for t, (tree, subset, oob) in enumerate(zip(forest.trees, forest.subsets, forest.oob_rows)):
        if tree is None or oob.size == 0:
            continue
        mod_vals = {
            forest.moderator_names[j]: forest.moderators[j].values[oob] for j in subset
        }
        base_pred, _ = predict(tree, forest.baseline[oob], forest.treatment[oob], mod_vals)
        base_mse = float(np.mean((forest.y[oob] - base_pred) ** 2))
        used = _split_variables(tree)
        for j in subset:
            counts[j] += 1
            name = forest.moderator_names[j]
            if name not in used:
                continue  # exact zero contribution
            perm = generator(forest.config.seed, "perm", t, int(j)).permutation(oob.size)
            permuted = dict(mod_vals)
            permuted[name] = mod_vals[name][perm]
            pred, _ = predict(tree, forest.baseline[oob], forest.treatment[oob], permuted)
            sums[j] += float(np.mean((forest.y[oob] - pred) ** 2)) - base_mse
    importance = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    order = sorted(range(m), key=lambda j: (-importance[j], j))
    ranks = np.empty(m, dtype=np.int64)
    for pos, j in enumerate(order):
        ranks[j] = pos + 1
    return ImportanceTable(
        names=forest.moderator_names,
        importance=importance,
        ranks=ranks,
        selected=importance > 0,
    )


def preselect(importance: ImportanceTable) -> list[str]:
    """Moderators with strictly positive importance, in declaration order."""
    chosen = [name for j, name in enumerate(importance.names) if importance.selected[j]]
    if not chosen:
        raise EmptySelection("no moderator has positive importance")
    return chosen
