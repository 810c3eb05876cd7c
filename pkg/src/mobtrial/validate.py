"""Performance metrics, per-leaf effect sizes, and bootstrap optimism correction.

The optimism procedure treats the entire tree-building pipeline as a
function of (row indices, seed): each replicate refits on a resample,
scores itself on the resample (train) and on the original rows (test),
and the mean train-test gap is subtracted from the apparent performance
(added, for RMSE). Replicates whose refit fails are recorded and skipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .errors import (
    ConfigError,
    EmptySelection,
    NoFeasibleSplit,
    RankDeficient,
    SingleArmLeaf,
    ZeroVariance,
)
from .rng import derive_seed, generator

Z_975 = 1.959964


@dataclass(frozen=True)
class EffectSize:
    d: float
    ci_low: float
    ci_high: float
    n_treat: int
    n_control: int
    se_d: float

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_treat": self.n_treat,
            "n_control": self.n_control,
            "se_d": self.se_d,
        }


def cohens_d(treat_scores: np.ndarray, control_scores: np.ndarray) -> EffectSize:
    """Standardized mean difference with the pooled SD and a normal 95% CI.

    se_d = sqrt((n1+n2)/(n1*n2) + d^2/(2*(n1+n2))). Raises SingleArmLeaf
    unless both arms have >= 2 observations.
    """
    t = np.asarray(treat_scores, dtype=np.float64)
    c = np.asarray(control_scores, dtype=np.float64)
    n1, n2 = t.size, c.size
    if n1 < 2 or n2 < 2:
        raise SingleArmLeaf(f"need >= 2 per arm, got treat={n1}, control={n2}")
    s_pooled = np.sqrt(((n1 - 1) * np.var(t, ddof=1) + (n2 - 1) * np.var(c, ddof=1)) / (n1 + n2 - 2))
    if s_pooled == 0.0:
        d = 0.0 if np.mean(t) == np.mean(c) else np.inf * np.sign(np.mean(t) - np.mean(c))
    else:
        d = float((np.mean(t) - np.mean(c)) / s_pooled)
    if not np.isfinite(d):
        # Zero pooled SD with distinct means: the standardized scale is
        # unbounded, so the interval carries no information.
        return EffectSize(
            d=float(d), ci_low=-np.inf, ci_high=np.inf, n_treat=n1, n_control=n2, se_d=np.inf
        )
    se = float(np.sqrt((n1 + n2) / (n1 * n2) + d * d / (2.0 * (n1 + n2))))
    return EffectSize(
        d=float(d),
        ci_low=float(d - Z_975 * se),
        ci_high=float(d + Z_975 * se),
        n_treat=n1,
        n_control=n2,
        se_d=se,
    )


@dataclass(frozen=True)
class Metrics:
    r2: float
    adj_r2: float
    rmse: float

    def to_json(self) -> dict:
        return {"r2": self.r2, "adj_r2": self.adj_r2, "rmse": self.rmse}


def r2_rmse(predictions: np.ndarray, observed: np.ndarray, n_params: int) -> Metrics:
    """R^2 = 1 - SSE/SST about the observed mean; adjusted R^2 with the
    given parameter count; RMSE = sqrt(SSE/n)."""
    pred = np.asarray(predictions, dtype=np.float64)
    obs = np.asarray(observed, dtype=np.float64)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise ConfigError("predictions and observed must be equal-length vectors")
    n = obs.size
    if n < 2:
        raise ConfigError(f"need >= 2 observations, got {n}")
    if n <= n_params + 1:
        raise ConfigError(f"n={n} too small for adjusted R^2 with {n_params} parameters")
    sst = float(np.sum((obs - obs.mean()) ** 2))
    if sst == 0.0:
        raise ZeroVariance("observed vector is constant")
    sse = float(np.sum((obs - pred) ** 2))
    r2 = 1.0 - sse / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - n_params - 1)
    return Metrics(r2=r2, adj_r2=adj, rmse=float(np.sqrt(sse / n)))


class PredictiveModel(Protocol):
    """What a fitted pipeline must expose to the validator."""

    n_params: int

    def predict(self, rows: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ReplicateRecord:
    train: Metrics
    test: Metrics

    def to_json(self) -> dict:
        return {"train": self.train.to_json(), "test": self.test.to_json()}


@dataclass(frozen=True)
class ValidationReport:
    apparent: Metrics
    optimism: Metrics
    corrected: Metrics
    n_bootstrap: int
    n_skipped: int
    replicates: tuple[ReplicateRecord, ...]

    def to_json(self) -> dict:
        return {
            "apparent": self.apparent.to_json(),
            "optimism": self.optimism.to_json(),
            "corrected": self.corrected.to_json(),
            "n_bootstrap": self.n_bootstrap,
            "n_skipped": self.n_skipped,
            "replicates": [r.to_json() for r in self.replicates],
        }


def bootstrap_bias_correct(
    y: np.ndarray,
    fit: Callable[[np.ndarray, int], PredictiveModel],
    n_bootstrap: int = 200,
    seed: int = 0,
) -> ValidationReport:
    """Optimism-corrected metrics for a refittable procedure.

    fit(rows, seed) must train the full procedure on the given original-row
    indices (duplicates encode the resample) and return a model that
    predicts for any index vector. The apparent model is fit(0..n-1, seed).
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    all_rows = np.arange(n)
    apparent_model = fit(all_rows, derive_seed(seed, "apparent"))
    apparent = r2_rmse(apparent_model.predict(all_rows), y, apparent_model.n_params)

    records: list[ReplicateRecord] = []
    skipped = 0
    for rep in range(n_bootstrap):
        rows = generator(seed, "replicate", rep).integers(0, n, size=n)
        try:
            model = fit(rows, derive_seed(seed, "replicate", rep, "fit"))
            train = r2_rmse(model.predict(rows), y[rows], model.n_params)
            test = r2_rmse(model.predict(all_rows), y, model.n_params)
        except (RankDeficient, ZeroVariance, EmptySelection, NoFeasibleSplit, SingleArmLeaf, ConfigError):
            skipped += 1  # DegenerateReplicate: recorded, not fatal
            continue
        records.append(ReplicateRecord(train=train, test=test))
    if not records:
        raise ZeroVariance("all bootstrap replicates degenerate")

    opt_r2 = float(np.mean([r.train.r2 - r.test.r2 for r in records]))
    opt_adj = float(np.mean([r.train.adj_r2 - r.test.adj_r2 for r in records]))
    opt_rmse = float(np.mean([r.test.rmse - r.train.rmse for r in records]))
    optimism = Metrics(r2=opt_r2, adj_r2=opt_adj, rmse=opt_rmse)
    corrected = Metrics(
        r2=apparent.r2 - opt_r2,
        adj_r2=apparent.adj_r2 - opt_adj,
        rmse=apparent.rmse + opt_rmse,
    )
    return ValidationReport(
        apparent=apparent,
        optimism=optimism,
        corrected=corrected,
        n_bootstrap=n_bootstrap,
        n_skipped=skipped,
        replicates=tuple(records),
    )
