"""Node OLS against an exact rational-arithmetic oracle."""

from fractions import Fraction

import numpy as np
import pytest

from mobtrial.errors import RankDeficient
from mobtrial.linreg import fit_ols, score_contributions


def _exact_ols(y, X):
    """Solve the normal equations in exact rational arithmetic."""
    n, k = X.shape
    Xf = [[Fraction(repr(v)) for v in row] for row in X.tolist()]
    yf = [Fraction(repr(v)) for v in y.tolist()]
    A = [[sum(Xf[i][r] * Xf[i][c] for i in range(n)) for c in range(k)] for r in range(k)]
    b = [sum(Xf[i][r] * yf[i] for i in range(n)) for r in range(k)]
    # Gauss-Jordan with partial pivoting (exact, so pivoting is for zeros only)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(k):
        pivot = next(r for r in range(col, k) if M[r][col] != 0)
        M[col], M[pivot] = M[pivot], M[col]
        inv = Fraction(1, 1) / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(k):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [a - factor * b2 for a, b2 in zip(M[r], M[col])]
    return np.array([float(M[r][k]) for r in range(k)])


def _random_instance(rng, n):
    baseline = np.round(rng.normal(30, 8, size=n), 3)
    treatment = (rng.random(n) < 0.5).astype(float)
    if treatment.sum() in (0, n):
        treatment[0] = 1.0 - treatment[0]
    X = np.column_stack([np.ones(n), baseline, treatment])
    beta = rng.normal(size=3)
    y = np.round(X @ beta + rng.normal(scale=2.0, size=n), 3)
    return y, X


def test_coefficients_match_exact_solver():
    rng = np.random.default_rng(12)
    for _ in range(25):
        y, X = _random_instance(rng, int(rng.integers(8, 60)))
        model = fit_ols(y, X)
        oracle = _exact_ols(y, X)
        assert np.allclose(model.coefficients, oracle, atol=1e-8, rtol=0)


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(13)
    for _ in range(10):
        y, X = _random_instance(rng, 40)
        model = fit_ols(y, X)
        gram = X.T @ model.residuals
        assert np.max(np.abs(gram)) < 1e-6 * len(y)


def test_exact_fit_has_zero_residuals():
    rng = np.random.default_rng(14)
    X = np.column_stack([np.ones(20), rng.normal(size=20), (rng.random(20) < 0.5).astype(float)])
    beta = np.array([2.0, -1.5, 4.0])
    model = fit_ols(X @ beta, X)
    assert np.allclose(model.coefficients, beta, atol=1e-10)
    assert np.max(np.abs(model.residuals)) < 1e-10


def test_shift_and_scale_equivariance():
    rng = np.random.default_rng(15)
    y, X = _random_instance(rng, 50)
    base = fit_ols(y, X)
    shifted = fit_ols(y + 100.0, X)
    assert shifted.coefficients[0] == pytest.approx(base.coefficients[0] + 100.0, abs=1e-8)
    assert np.allclose(shifted.coefficients[1:], base.coefficients[1:], atol=1e-8)
    scaled = fit_ols(3.0 * y, X)
    assert np.allclose(scaled.coefficients, 3.0 * base.coefficients, atol=1e-8)


def test_standard_errors_match_textbook_formula():
    rng = np.random.default_rng(16)
    y, X = _random_instance(rng, 35)
    model = fit_ols(y, X)
    resid = y - X @ model.coefficients
    sigma2 = float(resid @ resid) / (len(y) - 3)
    cov = sigma2 * np.linalg.inv(X.T @ X)
    assert np.allclose(model.standard_errors, np.sqrt(np.diag(cov)), atol=1e-9)


def test_rank_deficient_raises():
    rng = np.random.default_rng(17)
    n = 20
    baseline = rng.normal(size=n)
    X = np.column_stack([np.ones(n), baseline, np.ones(n)])  # treatment constant
    with pytest.raises(RankDeficient):
        fit_ols(rng.normal(size=n), X)
    with pytest.raises(RankDeficient):
        y, X3 = _random_instance(rng, 3)
        fit_ols(y, X3)


def test_score_contributions_are_x_times_residual():
    rng = np.random.default_rng(18)
    y, X = _random_instance(rng, 30)
    model = fit_ols(y, X)
    psi = score_contributions(model, X)
    assert psi.shape == (30, 3)
    assert np.allclose(psi, X * model.residuals[:, None], atol=0)
    assert np.max(np.abs(psi.sum(axis=0))) < 1e-6 * 30
