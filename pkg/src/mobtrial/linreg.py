"""Node-level ordinary least squares with coefficient inference.

The node model regresses the post-treatment composite on an intercept,
the baseline composite, and the treatment indicator (k = 3). Coefficients
come from a least-squares solve (no explicit inverse); standard errors
from sigma2_hat * (X'X)^-1; two-sided p-values from Student t on n-3
degrees of freedom. Per-observation score contributions psi_i = x_i * r_i
feed the parameter-stability tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import RankDeficient

K_PARAMS = 3
DESIGN_COLUMNS = ("intercept", "baseline", "treatment")


@dataclass(frozen=True)
class NodeModel:
    coefficients: np.ndarray  # (3,)
    standard_errors: np.ndarray
    t_statistics: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray = field(repr=False)
    sigma2_hat: float
    rss: float
    n: int
    design_info: tuple[str, ...] = DESIGN_COLUMNS

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coefficients

    def table(self) -> list[dict]:
        """Estimate/SE/t/p rows in report layout."""
        return [
            {
                "term": term,
                "estimate": float(self.coefficients[j]),
                "se": float(self.standard_errors[j]),
                "t": float(self.t_statistics[j]),
                "p": float(self.p_values[j]),
            }
            for j, term in enumerate(self.design_info)
        ]


def fit_ols(y: np.ndarray, X: np.ndarray) -> NodeModel:
    """Fit the 3-parameter node model.

    Raises RankDeficient when the design has column rank < 3 (e.g. a
    single-arm node, where the treatment column is constant and collinear
    with the intercept) or when n < 4 leaves no residual degrees of freedom.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != K_PARAMS:
        raise ValueError(f"design must be n x {K_PARAMS}, got {X.shape}")
    n = X.shape[0]
    if y.shape != (n,):
        raise ValueError("y length must match design rows")
    if n < K_PARAMS + 1:
        raise RankDeficient(f"need n >= {K_PARAMS + 1} for residual df, got {n}")
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < K_PARAMS:
        raise RankDeficient(f"design rank {rank} < {K_PARAMS}")
    residuals = y - X @ coef
    rss = float(residuals @ residuals)
    df = n - K_PARAMS
    sigma2 = rss / df
    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef / se, np.where(coef != 0, np.sign(coef) * np.inf, 0.0))
    p = 2.0 * stats.t.sf(np.abs(t), df)
    return NodeModel(
        coefficients=coef,
        standard_errors=se,
        t_statistics=t,
        p_values=p,
        residuals=residuals,
        sigma2_hat=sigma2,
        rss=rss,
        n=n,
    )


def score_contributions(model: NodeModel, X: np.ndarray) -> np.ndarray:
    """Estimating-function contributions psi_i = x_i * r_i, one row per
    observation; columns sum to ~0 by the OLS first-order condition."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (model.n, K_PARAMS):
        raise ValueError(f"design shape {X.shape} does not match fitted n={model.n}")
    return X * model.residuals[:, None]
