"""Iterative random-forest imputation of mixed-type missing data.

The algorithm: initialize numerics with the column mean and categoricals
with the mode; visit columns in ascending missing-count order; for each,
fit a forest of the column on all other variables using the originally
observed rows of the working matrix and predict the originally missing
cells; after each full sweep compare against the previous sweep and stop
as soon as either the numeric or the categorical difference increases
(keeping the previous sweep's values), or after max_iterations sweeps.

Observed cells are never modified. The treatment column participates as a
predictor (post-test outcomes differ by arm) but is never a target; the id
column is excluded entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllMissingColumn, ConfigError
from .forest import ForestConfig, fit_random_forest
from .rng import derive_seed
from .tables import DataTable


@dataclass(frozen=True)
class ImputationResult:
    completed: DataTable
    iterations_run: int
    convergence_trace: tuple[tuple[float, float], ...]  # (delta_numeric, delta_categorical)
    oob_errors: tuple[dict[str, float], ...]  # per sweep, per imputed column


def _mode(values: np.ndarray) -> float:
    counts = np.bincount(values.astype(np.int64))
    return float(np.argmax(counts))  # lowest code wins ties


def impute(table: DataTable, config: ForestConfig) -> ImputationResult:
    """Impute all missing cells; deterministic for fixed (table, config)."""
    for spec in table.schema:
        if spec.role in ("treatment", "id") and table.missing[spec.name].any():
            raise ConfigError(f"column {spec.name!r} ({spec.role}) must be fully observed")

    targets = [
        spec
        for spec in table.schema
        if spec.role not in ("treatment", "id") and table.missing[spec.name].any()
    ]
    if not targets:
        return ImputationResult(table, 0, (), ())
    for spec in targets:
        if table.missing[spec.name].all():
            raise AllMissingColumn(f"column {spec.name!r} has no observed values")

    # Ascending missing count, stable in schema order.
    targets.sort(key=lambda s: int(table.missing[s.name].sum()))

    predictors = [spec for spec in table.schema if spec.role != "id"]
    col_index = {spec.name: j for j, spec in enumerate(predictors)}
    work = np.column_stack([table.values[s.name] for s in predictors])

    # Initialization: mean for numerics, mode for binaries/categoricals.
    for spec in predictors:
        j = col_index[spec.name]
        miss = table.missing[spec.name]
        if not miss.any():
            continue
        obs = work[~miss, j]
        fill = float(np.mean(obs)) if spec.kind == "numeric" else _mode(obs)
        work[miss, j] = fill

    numeric_targets = [s for s in targets if s.kind == "numeric"]
    cat_targets = [s for s in targets if s.kind != "numeric"]

    def snapshot() -> dict[str, np.ndarray]:
        return {s.name: work[table.missing[s.name], col_index[s.name]].copy() for s in targets}

    def deltas(new: dict[str, np.ndarray], old: dict[str, np.ndarray]) -> tuple[float, float]:
        d_num = 0.0
        if numeric_targets:
            diff_sq = sum(float(np.sum((new[s.name] - old[s.name]) ** 2)) for s in numeric_targets)
            norm = sum(float(np.sum(new[s.name] ** 2)) for s in numeric_targets)
            d_num = diff_sq / norm if norm > 0 else 0.0
        d_cat = 0.0
        if cat_targets:
            disagree = sum(int(np.sum(new[s.name] != old[s.name])) for s in cat_targets)
            total = sum(new[s.name].size for s in cat_targets)
            d_cat = disagree / total if total else 0.0
        return d_num, d_cat

    previous = snapshot()
    kept = previous
    trace: list[tuple[float, float]] = []
    oob_trace: list[dict[str, float]] = []
    prev_deltas: tuple[float, float] | None = None
    iterations = 0

    for sweep in range(config.max_iterations):
        iterations += 1
        sweep_oob: dict[str, float] = {}
        for spec in targets:
            j = col_index[spec.name]
            miss = table.missing[spec.name]
            obs_rows = np.flatnonzero(~miss)
            mis_rows = np.flatnonzero(miss)
            other = [k for k in range(work.shape[1]) if k != j]
            X_obs = work[np.ix_(obs_rows, other)]
            y_obs = work[obs_rows, j]
            classification = spec.kind != "numeric"
            n_classes = len(spec.levels) if spec.kind == "categorical" else 2
            forest = fit_random_forest(
                X_obs,
                y_obs,
                ForestConfig(
                    n_trees=config.n_trees,
                    mtry=config.mtry,
                    min_leaf=config.min_leaf,
                    seed=derive_seed(config.seed, "sweep", sweep, "column", spec.name),
                    max_iterations=config.max_iterations,
                ),
                classification=classification,
                n_classes=n_classes if classification else 0,
            )
            work[mis_rows, j] = forest.predict(work[np.ix_(mis_rows, other)])
            sweep_oob[spec.name] = forest.oob_error
        oob_trace.append(sweep_oob)
        current = snapshot()
        d = deltas(current, previous)
        trace.append(d)
        if prev_deltas is not None and (d[0] > prev_deltas[0] or d[1] > prev_deltas[1]):
            kept = previous  # difference increased: keep the previous sweep
            break
        kept = current
        previous = current
        prev_deltas = d

    completed = table
    for spec in targets:
        vals = table.values[spec.name].copy()
        vals[table.missing[spec.name]] = kept[spec.name]
        completed = completed.with_column(spec.name, vals, np.zeros(table.n, dtype=bool))
    return ImputationResult(
        completed=completed,
        iterations_run=iterations,
        convergence_trace=tuple(trace),
        oob_errors=tuple(oob_trace),
    )
