"""Iterative forest imputation: contracts and accuracy versus mean fill."""

import numpy as np
import pytest

from mobtrial.errors import AllMissingColumn, ConfigError
from mobtrial.forest import ForestConfig
from mobtrial.impute import impute
from mobtrial.synthetic import mask_mcar
from mobtrial.tables import ColumnSpec, DataTable, from_columns

SCHEMA = (
    ColumnSpec("id", "numeric", "id"),
    ColumnSpec("treatment", "binary", "treatment"),
    ColumnSpec("x1", "numeric", "moderator"),
    ColumnSpec("x2", "numeric", "moderator"),
    ColumnSpec("x3", "numeric", "moderator"),
    ColumnSpec("flag", "binary", "moderator"),
)


def correlated_table(n=150, seed=0) -> DataTable:
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=n)
    x2 = x1 + 0.3 * rng.normal(size=n)
    x3 = -x1 + 0.3 * rng.normal(size=n)
    flag = ((x1 > 0) ^ (rng.random(n) < 0.1)).astype(float)
    return from_columns(
        SCHEMA,
        {
            "id": np.arange(1, n + 1, dtype=float),
            "treatment": (rng.random(n) < 0.5).astype(float),
            "x1": x1,
            "x2": x2,
            "x3": x3,
            "flag": flag,
        },
    )


def test_complete_table_is_identity():
    table = correlated_table()
    result = impute(table, ForestConfig(n_trees=10, seed=1))
    assert result.iterations_run == 0
    assert result.convergence_trace == ()
    for spec in table.schema:
        assert np.array_equal(result.completed.values[spec.name], table.values[spec.name])


def test_missing_treatment_or_id_rejected():
    table = correlated_table()
    broken = table.with_column("treatment", table.values["treatment"], np.eye(1, table.n, 0, dtype=bool)[0])
    with pytest.raises(ConfigError):
        impute(broken, ForestConfig(n_trees=5))


def test_all_missing_column_rejected():
    table = correlated_table()
    broken = table.with_column("x2", np.full(table.n, np.nan), np.ones(table.n, dtype=bool))
    with pytest.raises(AllMissingColumn):
        impute(broken, ForestConfig(n_trees=5))


def test_observed_cells_never_change():
    truth = correlated_table(seed=3)
    masked = mask_mcar(truth, 0.1, seed=99)
    result = impute(masked, ForestConfig(n_trees=25, seed=7))
    for spec in truth.schema:
        observed = ~masked.missing[spec.name]
        assert np.array_equal(
            result.completed.values[spec.name][observed], truth.values[spec.name][observed]
        )
        assert not result.completed.missing[spec.name].any()


def test_binary_imputations_are_codes():
    truth = correlated_table(seed=4)
    masked = mask_mcar(truth, 0.15, seed=5)
    result = impute(masked, ForestConfig(n_trees=15, seed=2))
    holes = masked.missing["flag"]
    filled = result.completed.values["flag"][holes]
    assert set(np.unique(filled)).issubset({0.0, 1.0})


def test_constant_predictors_fall_back_to_mean():
    n = 120
    rng = np.random.default_rng(8)
    y = rng.normal(50, 4, size=n)
    miss = rng.random(n) < 0.2
    yv = y.copy()
    yv[miss] = np.nan
    schema = (
        ColumnSpec("id", "numeric", "id"),
        ColumnSpec("treatment", "binary", "treatment"),
        ColumnSpec("c1", "numeric", "moderator"),
        ColumnSpec("target", "numeric", "outcome_component_post"),
    )
    table = from_columns(
        schema,
        {
            "id": np.arange(n, dtype=float),
            "treatment": np.zeros(n),
            "c1": np.full(n, 2.0),
            "target": yv,
        },
    )
    result = impute(table, ForestConfig(n_trees=40, seed=11))
    obs_mean = float(y[~miss].mean())
    obs_sd = float(y[~miss].std(ddof=1))
    filled = result.completed.values["target"][miss]
    tol = 4.0 * obs_sd / np.sqrt((~miss).sum())
    assert np.all(np.abs(filled - obs_mean) < tol + 1e-9)


def test_beats_mean_imputation_on_correlated_data():
    truth = correlated_table(n=200, seed=12)
    masked = mask_mcar(truth, 0.1, seed=13)
    result = impute(masked, ForestConfig(n_trees=40, seed=14))
    se_forest, se_mean, denom = 0.0, 0.0, 0.0
    for name in ("x1", "x2", "x3"):
        holes = masked.missing[name]
        if not holes.any():
            continue
        true_vals = truth.values[name][holes]
        obs_mean = float(truth.values[name][~holes].mean())
        se_forest += float(np.sum((result.completed.values[name][holes] - true_vals) ** 2))
        se_mean += float(np.sum((obs_mean - true_vals) ** 2))
        denom += holes.sum()
    assert denom > 0
    assert se_forest < se_mean


def test_trace_and_determinism():
    truth = correlated_table(n=120, seed=20)
    masked = mask_mcar(truth, 0.12, seed=21)
    cfg = ForestConfig(n_trees=20, seed=22)
    a = impute(masked, cfg)
    assert 1 <= a.iterations_run <= cfg.max_iterations
    assert len(a.convergence_trace) == a.iterations_run
    assert len(a.oob_errors) == a.iterations_run
    for d_num, d_cat in a.convergence_trace:
        assert d_num >= 0.0 and 0.0 <= d_cat <= 1.0
    b = impute(masked, cfg)
    for name in ("x1", "x2", "x3", "flag"):
        assert np.array_equal(a.completed.values[name], b.completed.values[name])
