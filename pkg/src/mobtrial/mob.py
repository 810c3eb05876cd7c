"""Model-based recursive partitioning.

Each node fits the 3-parameter OLS model, tests every moderator for
parameter instability via M-fluctuation statistics on the decorrelated
score contributions, Bonferroni-corrects across the moderators tested,
and splits on the most significant moderator at the RSS-minimizing
cutpoint. Recursion stops on non-significance, infeasible cuts, node
size, or depth. Pruning re-applies the significance rule bottom-up.

Numeric moderators use the supLM statistic, max over candidate fractions
t in [trim, 1-trim] (at distinct-value boundaries) of ||W(t)||^2/(t(1-t)),
with p-values from seeded Monte-Carlo simulation of the same functional of
a Brownian bridge evaluated on the same candidate set. All numeric
moderators of one node share a single bridge simulation over the union of
their candidate fractions (each statistic reads its own subset), which is
distributionally identical to simulating per moderator. Binary and
categorical moderators use the level-sum chi-square statistic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import (
    ConfigError,
    MissingSplitValue,
    NoFeasibleSplit,
    RankDeficient,
    SingleArmLeaf,
)
from .linreg import K_PARAMS, NodeModel, fit_ols, score_contributions
from .rng import generator
from .tables import DataTable
from .validate import EffectSize, cohens_d

_RIDGE = 1e-8


@dataclass(frozen=True)
class MobConfig:
    """Partitioning parameters.

    test_scope "all" tests instability of the full coefficient vector;
    "treatment" restricts the score matrix to the treatment column.
    bonferroni_m, when set, replaces the per-node tested-moderator count as
    the Bonferroni multiplier (the forest uses this to correct for the full
    moderator family even though each tree sees only a subset).
    """

    alpha: float = 0.05
    bonferroni: bool = True
    min_node_size: int = 10
    max_depth: int | None = None
    trim: float = 0.1
    mc_replicates: int = 9999
    seed: int = 0
    test_scope: str = "all"
    bonferroni_m: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.min_node_size < K_PARAMS + 1:
            raise ConfigError(f"min_node_size must be >= {K_PARAMS + 1}, got {self.min_node_size}")
        if not 0 <= self.trim < 0.5:
            raise ConfigError(f"trim must be in [0, 0.5), got {self.trim}")
        if self.mc_replicates < 19:
            raise ConfigError(f"mc_replicates must be >= 19, got {self.mc_replicates}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.test_scope not in ("all", "treatment"):
            raise ConfigError(f"test_scope must be 'all' or 'treatment', got {self.test_scope!r}")
        if self.bonferroni_m is not None and self.bonferroni_m < 1:
            raise ConfigError("bonferroni_m must be >= 1")


@dataclass(frozen=True)
class Moderator:
    """One partitioning variable: name, kind, and its full-length values."""

    name: str
    kind: str  # "numeric" | "binary" | "categorical"
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("numeric", "binary", "categorical"):
            raise ConfigError(f"moderator {self.name!r}: unknown kind {self.kind!r}")


def moderators_from_table(table: DataTable, names: list[str] | tuple[str, ...]) -> list[Moderator]:
    """Build moderator views from table columns; values must be complete."""
    out = []
    for name in names:
        spec = table.spec(name)
        values, mask = table.column(name)
        if mask.any():
            raise ConfigError(f"moderator {name!r} has missing values; impute first")
        out.append(Moderator(name=name, kind=spec.kind, values=values))
    return out


@dataclass(frozen=True)
class StabilityTestRecord:
    moderator: str
    statistic_kind: str  # "suplm" | "chi_square"
    statistic: float
    raw_p: float
    adjusted_p: float
    df: int | None = None
    trim: float | None = None
    tested: bool = True
    ridged: bool = False

    def to_json(self) -> dict:
        return {
            "moderator": self.moderator,
            "statistic_kind": self.statistic_kind,
            "statistic": self.statistic,
            "raw_p": self.raw_p,
            "adjusted_p": self.adjusted_p,
            "df": self.df,
            "trim": self.trim,
            "tested": self.tested,
            "ridged": self.ridged,
        }


@dataclass
class MobNode:
    id: int
    depth: int
    rows: np.ndarray = field(repr=False)
    model: NodeModel = field(repr=False)
    effect: EffectSize | None = None
    test_records: tuple[StabilityTestRecord, ...] = ()
    n_tested: int = 0
    split_variable: str | None = None
    cutpoint: float | None = None
    left_levels: frozenset[int] | None = None
    children: tuple["MobNode", "MobNode"] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    @property
    def n(self) -> int:
        return int(self.rows.size)


@dataclass(frozen=True)
class MobTree:
    root: MobNode
    config: MobConfig
    training_n: int
    moderators: tuple[Moderator, ...] = field(repr=False)
    y: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)

    def nodes(self) -> list[MobNode]:
        out: list[MobNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            if node.children is not None:
                stack.extend(reversed(node.children))
        return sorted(out, key=lambda nd: nd.id)

    def leaves(self) -> list[MobNode]:
        return [nd for nd in self.nodes() if nd.is_leaf]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    @property
    def depth(self) -> int:
        return max(nd.depth for nd in self.nodes())


# ---------------------------------------------------------------------------
# Stability testing


def _decorrelated_scores(scores: np.ndarray) -> tuple[np.ndarray, bool]:
    """phi = psi J^{-1/2} / sqrt(n) with J = (1/n) sum psi psi'; adds the
    1e-8 ridge when J is numerically singular (flagged)."""
    n = scores.shape[0]
    J = scores.T @ scores / n
    w, V = np.linalg.eigh(J)
    ridged = bool(w.min() <= _RIDGE)
    if ridged:
        w = w + _RIDGE
    inv_sqrt = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    return scores @ inv_sqrt / np.sqrt(n), ridged


def _suplm_candidates(values: np.ndarray, trim: float) -> tuple[np.ndarray, np.ndarray]:
    """Sort order and candidate left-block sizes (distinct-value boundaries
    whose fraction lies in [trim, 1-trim])."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    n = values.size
    sizes = np.flatnonzero(sv[1:] != sv[:-1]) + 1  # left-block sizes 1..n-1
    if sizes.size:
        fracs = sizes / n
        sizes = sizes[(fracs >= trim) & (fracs <= 1.0 - trim)]
    return order, sizes


def _suplm_statistic(phi: np.ndarray, order: np.ndarray, sizes: np.ndarray) -> tuple[float, np.ndarray]:
    """Max of ||W(t)||^2/(t(1-t)) over candidate boundaries; returns the
    statistic and the candidate fractions."""
    n = phi.shape[0]
    W = np.cumsum(phi[order], axis=0)
    fracs = sizes / n
    vals = (W[sizes - 1] ** 2).sum(axis=1) / (fracs * (1.0 - fracs))
    return float(vals.max()), fracs


def _chi_square_record(phi: np.ndarray, values: np.ndarray, name: str) -> StabilityTestRecord:
    n, k = phi.shape
    codes = np.unique(values)
    if codes.size < 2:
        return StabilityTestRecord(name, "chi_square", 0.0, 1.0, 1.0, df=None, tested=False)
    stat = 0.0
    for code in codes:
        sel = values == code
        delta = phi[sel].sum(axis=0)
        stat += float(delta @ delta) / (sel.sum() / n)
    df = (codes.size - 1) * k
    raw_p = float(stats.chi2.sf(stat, df))
    return StabilityTestRecord(name, "chi_square", stat, raw_p, raw_p, df=df)


def _bridge_sup_pvalues(
    stats_fracs: list[tuple[float, np.ndarray]],
    k: int,
    mc_replicates: int,
    rng: np.random.Generator,
) -> list[float]:
    """Monte-Carlo p-values for supLM statistics sharing one k-dim Brownian
    bridge simulated on the union of all candidate fractions."""
    union = np.unique(np.concatenate([f for _, f in stats_fracs]))
    col_idx = [np.searchsorted(union, f) for _, f in stats_fracs]
    steps = np.diff(np.concatenate([[0.0], union, [1.0]]))
    sqrt_steps = np.sqrt(steps)
    weights = union * (1.0 - union)
    counts = np.zeros(len(stats_fracs), dtype=np.int64)
    chunk = max(1, 4_000_000 // ((union.size + 1) * k))
    done = 0
    while done < mc_replicates:
        r = min(chunk, mc_replicates - done)
        Z = rng.standard_normal((r, union.size + 1, k)) * sqrt_steps[None, :, None]
        S = np.cumsum(Z, axis=1)
        B = S[:, :-1, :] - union[None, :, None] * S[:, -1:, :]
        q = np.einsum("ruk,ruk->ru", B, B) / weights[None, :]
        for i, (stat, _) in enumerate(stats_fracs):
            counts[i] += int(np.sum(q[:, col_idx[i]].max(axis=1) >= stat))
        done += r
    return [(1.0 + int(c)) / (mc_replicates + 1.0) for c in counts]


def _node_scores(model: NodeModel, X: np.ndarray, scope: str) -> np.ndarray:
    psi = score_contributions(model, X)
    return psi[:, [2]] if scope == "treatment" else psi


def _test_node(
    model: NodeModel,
    X: np.ndarray,
    moderators: list[Moderator],
    rows: np.ndarray,
    config: MobConfig,
    node_id: int,
) -> tuple[tuple[StabilityTestRecord, ...], int]:
    """All stability tests for one node, Bonferroni-adjusted."""
    phi, ridged = _decorrelated_scores(_node_scores(model, X[rows], config.test_scope))
    k = phi.shape[1]
    records: list[StabilityTestRecord | None] = []
    suplm: list[tuple[int, float, np.ndarray]] = []  # (record slot, stat, fracs)
    for mod in moderators:
        values = mod.values[rows]
        if mod.kind == "numeric":
            order, sizes = _suplm_candidates(values, config.trim)
            if sizes.size == 0:
                records.append(
                    StabilityTestRecord(mod.name, "suplm", 0.0, 1.0, 1.0, trim=config.trim, tested=False, ridged=ridged)
                )
                continue
            stat, fracs = _suplm_statistic(phi, order, sizes)
            suplm.append((len(records), stat, fracs))
            records.append(None)
        else:
            rec = _chi_square_record(phi, values, mod.name)
            records.append(replace(rec, ridged=ridged) if rec.tested else rec)
    if suplm:
        rng = generator(config.seed, "node", node_id, "suplm")
        pvals = _bridge_sup_pvalues([(s, f) for _, s, f in suplm], k, config.mc_replicates, rng)
        for (slot, stat, _), p in zip(suplm, pvals):
            records[slot] = StabilityTestRecord(
                moderators[slot].name, "suplm", stat, p, p, trim=config.trim, ridged=ridged
            )
    m = sum(1 for r in records if r is not None and r.tested)
    mult = config.bonferroni_m if config.bonferroni_m is not None else m
    final: list[StabilityTestRecord] = []
    for rec in records:
        assert rec is not None
        if rec.tested and config.bonferroni:
            rec = replace(rec, adjusted_p=min(1.0, mult * rec.raw_p))
        final.append(rec)
    return tuple(final), m


def stability_test(
    scores: np.ndarray,
    moderator: Moderator,
    config: MobConfig,
    node_id: int = 0,
) -> StabilityTestRecord:
    """Single-moderator stability test on a raw score matrix.

    Decorrelates the scores, then applies the supLM (numeric) or level
    chi-square (binary/categorical) statistic. The record's adjusted_p
    equals raw_p here (m = 1).
    """
    scores = np.asarray(scores, dtype=np.float64)
    phi, ridged = _decorrelated_scores(scores)
    values = moderator.values
    if values.shape[0] != scores.shape[0]:
        raise ValueError("moderator length must match score rows")
    if moderator.kind == "numeric":
        order, sizes = _suplm_candidates(values, config.trim)
        if sizes.size == 0:
            return StabilityTestRecord(
                moderator.name, "suplm", 0.0, 1.0, 1.0, trim=config.trim, tested=False, ridged=ridged
            )
        stat, fracs = _suplm_statistic(phi, order, sizes)
        rng = generator(config.seed, "node", node_id, "suplm")
        (p,) = _bridge_sup_pvalues([(stat, fracs)], phi.shape[1], config.mc_replicates, rng)
        return StabilityTestRecord(moderator.name, "suplm", stat, p, p, trim=config.trim, ridged=ridged)
    rec = _chi_square_record(phi, values, moderator.name)
    return replace(rec, ridged=ridged) if rec.tested else rec


def select_split_variable(records: tuple[StabilityTestRecord, ...] | list[StabilityTestRecord], alpha: float) -> str | None:
    """Moderator with minimal adjusted_p if <= alpha, else None. Ties break
    by smaller statistic, then declaration order."""
    tested = [(rec.adjusted_p, rec.statistic, i, rec) for i, rec in enumerate(records) if rec.tested]
    if not tested:
        return None
    tested.sort(key=lambda item: (item[0], item[1], item[2]))
    best = tested[0][3]
    return best.moderator if best.adjusted_p <= alpha else None


# ---------------------------------------------------------------------------
# Split search


def _fit_side(y: np.ndarray, X: np.ndarray, rows: np.ndarray) -> float | None:
    try:
        return fit_ols(y[rows], X[rows]).rss
    except RankDeficient:
        return None


def find_cutpoint(
    y: np.ndarray,
    X: np.ndarray,
    rows: np.ndarray,
    moderator: Moderator,
    min_node_size: int,
) -> tuple[float | None, frozenset[int] | None, np.ndarray, np.ndarray]:
    """Exhaustive RSS-minimizing split of `rows` on one moderator.

    Numeric: returns (cutpoint, None, left, right) with the cutpoint at the
    largest left-side observed value ("<= v" convention); ties take the
    smallest cut. Categorical: returns (None, left_levels, left, right)
    over all binary level partitions. Raises NoFeasibleSplit when no cut
    leaves two fittable children of size >= min_node_size.
    """
    values = moderator.values[rows]
    n = rows.size
    best_obj = np.inf
    best: tuple[float | None, frozenset[int] | None, np.ndarray, np.ndarray] | None = None
    if moderator.kind == "numeric":
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sizes = np.flatnonzero(sv[1:] != sv[:-1]) + 1
        for size in sizes:
            if size < min_node_size or n - size < min_node_size:
                continue
            left = rows[order[:size]]
            right = rows[order[size:]]
            rss_l = _fit_side(y, X, left)
            rss_r = _fit_side(y, X, right) if rss_l is not None else None
            if rss_l is None or rss_r is None:
                continue
            obj = rss_l + rss_r
            if obj < best_obj:
                best_obj = obj
                best = (float(sv[size - 1]), None, left, right)
    else:
        codes = np.unique(values)
        if codes.size >= 2:
            rest = codes[1:]
            for mask in range(2 ** rest.size):
                left_codes = {float(codes[0])}
                left_codes.update(float(rest[b]) for b in range(rest.size) if mask >> b & 1)
                sel = np.isin(values, sorted(left_codes))
                if not min_node_size <= int(sel.sum()) <= n - min_node_size:
                    continue
                left = rows[sel]
                right = rows[~sel]
                rss_l = _fit_side(y, X, left)
                rss_r = _fit_side(y, X, right) if rss_l is not None else None
                if rss_l is None or rss_r is None:
                    continue
                obj = rss_l + rss_r
                if obj < best_obj:
                    best_obj = obj
                    best = (None, frozenset(int(c) for c in left_codes), left, right)
    if best is None:
        raise NoFeasibleSplit(f"no feasible cut on {moderator.name!r}")
    return best


# ---------------------------------------------------------------------------
# Growing, pruning, prediction


def _leaf_effect(y: np.ndarray, treatment: np.ndarray, rows: np.ndarray) -> EffectSize | None:
    t = treatment[rows]
    try:
        return cohens_d(y[rows][t == 1.0], y[rows][t == 0.0])
    except SingleArmLeaf:
        return None


def grow(
    y: np.ndarray,
    baseline: np.ndarray,
    treatment: np.ndarray,
    moderators: list[Moderator] | tuple[Moderator, ...],
    config: MobConfig,
) -> MobTree:
    """Grow a tree on complete arrays (post composite, baseline composite,
    0/1 treatment, moderator columns)."""
    y = np.asarray(y, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    treatment = np.asarray(treatment, dtype=np.float64)
    n = y.size
    if baseline.shape != (n,) or treatment.shape != (n,):
        raise ConfigError("y, baseline, treatment must have equal length")
    moderators = list(moderators)
    if not moderators:
        raise ConfigError("at least one moderator is required")
    for mod in moderators:
        if mod.values.shape != (n,):
            raise ConfigError(f"moderator {mod.name!r} length mismatch")
        if np.isnan(mod.values).any():
            raise ConfigError(f"moderator {mod.name!r} has missing values")
    if n < config.min_node_size:
        raise ConfigError(f"n={n} below min_node_size={config.min_node_size}")
    X = np.column_stack([np.ones(n), baseline, treatment])
    by_name = {mod.name: mod for mod in moderators}
    counter = {"next": 0}

    def build(rows: np.ndarray, depth: int) -> MobNode:
        node_id = counter["next"]
        counter["next"] += 1
        model = fit_ols(y[rows], X[rows])
        node = MobNode(
            id=node_id,
            depth=depth,
            rows=rows,
            model=model,
            effect=_leaf_effect(y, treatment, rows),
        )
        if rows.size < 2 * config.min_node_size:
            return node
        if config.max_depth is not None and depth >= config.max_depth:
            return node
        records, m = _test_node(model, X, moderators, rows, config, node_id)
        node.test_records = records
        node.n_tested = m
        selected = select_split_variable(records, config.alpha)
        if selected is None:
            return node
        try:
            cutpoint, left_levels, left, right = find_cutpoint(
                y, X, rows, by_name[selected], config.min_node_size
            )
        except NoFeasibleSplit:
            return node
        node.split_variable = selected
        node.cutpoint = cutpoint
        node.left_levels = left_levels
        node.children = (build(left, depth + 1), build(right, depth + 1))
        return node

    root = build(np.arange(n), 0)
    return MobTree(
        root=root,
        config=config,
        training_n=n,
        moderators=tuple(moderators),
        y=y,
        X=X,
    )


def grow_table(
    table: DataTable,
    post: np.ndarray,
    baseline: np.ndarray,
    moderator_names: list[str] | tuple[str, ...],
    config: MobConfig,
) -> MobTree:
    """Convenience wrapper: moderators and treatment pulled from the table."""
    treatment_cols = table.by_role("treatment")
    if len(treatment_cols) != 1:
        raise ConfigError("table must declare exactly one treatment column")
    treatment, _ = table.column(treatment_cols[0].name)
    moderators = moderators_from_table(table, moderator_names)
    return grow(post, baseline, treatment, moderators, config)


def _node_adjusted(node: MobNode, config: MobConfig) -> float | None:
    """Best adjusted p at this node under `config`, from stored records."""
    if not node.test_records:
        return None
    mult = config.bonferroni_m if config.bonferroni_m is not None else node.n_tested
    best: float | None = None
    for rec in node.test_records:
        if not rec.tested:
            continue
        adj = min(1.0, mult * rec.raw_p) if config.bonferroni else rec.raw_p
        if best is None or adj < best:
            best = adj
    return best


def prune(tree: MobTree, config: MobConfig | None = None) -> MobTree:
    """Collapse inner nodes whose best adjusted p exceeds alpha, bottom-up.

    Uses the stored raw p-values (the tests are deterministic, so a re-run
    would reproduce them); idempotent; a different config may be supplied
    to prune at a stricter level than the tree was grown with.
    """
    cfg = config or tree.config

    def visit(node: MobNode) -> MobNode:
        if node.children is None:
            return node
        children = tuple(visit(child) for child in node.children)
        best = _node_adjusted(node, cfg)
        if best is None or best > cfg.alpha:
            return MobNode(
                id=node.id,
                depth=node.depth,
                rows=node.rows,
                model=node.model,
                effect=node.effect,
                test_records=node.test_records,
                n_tested=node.n_tested,
            )
        out = MobNode(
            id=node.id,
            depth=node.depth,
            rows=node.rows,
            model=node.model,
            effect=node.effect,
            test_records=node.test_records,
            n_tested=node.n_tested,
            split_variable=node.split_variable,
            cutpoint=node.cutpoint,
            left_levels=node.left_levels,
        )
        out.children = children
        return out

    return MobTree(
        root=visit(tree.root),
        config=tree.config,
        training_n=tree.training_n,
        moderators=tree.moderators,
        y=tree.y,
        X=tree.X,
    )


def predict(
    tree: MobTree,
    baseline: np.ndarray,
    treatment: np.ndarray,
    moderator_values: dict[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Route rows to leaves and apply each leaf's model.

    Returns (predictions, leaf ids). Rows at a numeric cutpoint go left
    ("<=" convention); categorical codes absent from a node's left set go
    right. NaN in a needed split variable or model covariate raises
    MissingSplitValue.
    """
    baseline = np.asarray(baseline, dtype=np.float64)
    treatment = np.asarray(treatment, dtype=np.float64)
    n = baseline.size
    if np.isnan(baseline).any() or np.isnan(treatment).any():
        raise MissingSplitValue("model covariates contain missing values")
    X = np.column_stack([np.ones(n), baseline, treatment])
    pred = np.empty(n, dtype=np.float64)
    leaf_ids = np.empty(n, dtype=np.int64)

    def route(node: MobNode, idx: np.ndarray) -> None:
        if idx.size == 0:
            return
        if node.children is None:
            pred[idx] = node.model.predict(X[idx])
            leaf_ids[idx] = node.id
            return
        assert node.split_variable is not None
        if node.split_variable not in moderator_values:
            raise MissingSplitValue(f"split variable {node.split_variable!r} not supplied")
        vals = np.asarray(moderator_values[node.split_variable], dtype=np.float64)[idx]
        if np.isnan(vals).any():
            raise MissingSplitValue(f"split variable {node.split_variable!r} has missing values")
        if node.cutpoint is not None:
            go_left = vals <= node.cutpoint
        else:
            assert node.left_levels is not None
            go_left = np.isin(vals, sorted(node.left_levels))
        route(node.children[0], idx[go_left])
        route(node.children[1], idx[~go_left])

    route(tree.root, np.arange(n))
    return pred, leaf_ids


def tree_to_json(tree: MobTree) -> dict:
    """JSON-ready dict with stable key order (diffable artifact)."""
    nodes = []
    for node in tree.nodes():
        entry: dict = {
            "id": node.id,
            "kind": "leaf" if node.is_leaf else "inner",
            "n": node.n,
            "depth": node.depth,
        }
        if not node.is_leaf:
            assert node.children is not None
            entry["split"] = {
                "variable": node.split_variable,
                "cutpoint": node.cutpoint,
                "left_levels": sorted(node.left_levels) if node.left_levels is not None else None,
                "children": [child.id for child in node.children],
            }
        if node.test_records:
            entry["tests"] = [rec.to_json() for rec in node.test_records]
            entry["n_tested"] = node.n_tested
        if node.is_leaf:
            entry["model"] = {
                "b": [float(v) for v in node.model.coefficients],
                "se": [float(v) for v in node.model.standard_errors],
                "t": [float(v) for v in node.model.t_statistics],
                "p": [float(v) for v in node.model.p_values],
                "n": node.model.n,
                "rss": node.model.rss,
                "sigma2": node.model.sigma2_hat,
            }
            entry["effect"] = None if node.effect is None else node.effect.to_json()
        nodes.append(entry)
    return {
        "training_n": tree.training_n,
        "n_leaves": tree.n_leaves,
        "config": {
            "alpha": tree.config.alpha,
            "bonferroni": tree.config.bonferroni,
            "min_node_size": tree.config.min_node_size,
            "max_depth": tree.config.max_depth,
            "trim": tree.config.trim,
            "mc_replicates": tree.config.mc_replicates,
            "test_scope": tree.config.test_scope,
        },
        "nodes": nodes,
    }


def tree_json_text(tree: MobTree) -> str:
    return json.dumps(tree_to_json(tree), indent=2) + "\n"
