"""Effect sizes, fit metrics, and bootstrap optimism correction."""

import math

import numpy as np
import pytest

from mobtrial.errors import ConfigError, EmptySelection, RankDeficient, SingleArmLeaf, ZeroVariance
from mobtrial.rng import derive_seed, generator
from mobtrial.validate import ValidationReport, bootstrap_bias_correct, cohens_d, r2_rmse


def exact_sample(n, mean, sd, seed):
    """Vector with exactly the requested sample mean and ddof=1 SD."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n)
    v = (v - v.mean()) / v.std(ddof=1)
    return mean + sd * v


# ---------------------------------------------------------------------------
# Cohen's d


def test_cohens_d_reference_cis():
    # Hand-checked normal-approximation CIs for two arm-size patterns.
    es = cohens_d(exact_sample(83, 1.0, 1.0, 0), exact_sample(84, 0.0, 1.0, 1))
    assert es.d == pytest.approx(1.00, abs=1e-9)
    assert round(es.ci_low, 2) == 0.68
    assert round(es.ci_high, 2) == 1.32
    assert es.n_treat == 83 and es.n_control == 84

    es2 = cohens_d(exact_sample(17, 0.12, 1.0, 2), exact_sample(16, 0.0, 1.0, 3))
    assert es2.d == pytest.approx(0.12, abs=1e-9)
    assert abs(es2.ci_low - (-0.57)) <= 0.02
    assert abs(es2.ci_high - 0.80) <= 0.02


def test_cohens_d_se_formula():
    t = exact_sample(20, 0.8, 1.3, 4)
    c = exact_sample(25, 0.1, 0.9, 5)
    es = cohens_d(t, c)
    n1, n2 = 20, 25
    expected_se = math.sqrt((n1 + n2) / (n1 * n2) + es.d**2 / (2 * (n1 + n2)))
    assert es.se_d == pytest.approx(expected_se, abs=1e-12)
    assert es.ci_low == pytest.approx(es.d - 1.959964 * es.se_d, abs=1e-12)


def test_cohens_d_invariances():
    rng = np.random.default_rng(6)
    t, c = rng.normal(1.0, 1.0, 30), rng.normal(0.0, 1.2, 28)
    es = cohens_d(t, c)
    flipped = cohens_d(c, t)
    assert flipped.d == pytest.approx(-es.d, abs=1e-12)
    assert flipped.ci_low == pytest.approx(-es.ci_high, abs=1e-12)
    shifted = cohens_d(t + 100.0, c + 100.0)
    assert shifted.d == pytest.approx(es.d, abs=1e-9)
    scaled = cohens_d(3.0 * t, 3.0 * c)
    assert scaled.d == pytest.approx(es.d, abs=1e-9)


def test_cohens_d_degenerate_arms():
    with pytest.raises(SingleArmLeaf):
        cohens_d(np.array([1.0]), np.array([0.0, 1.0, 2.0]))
    same = cohens_d(np.full(5, 2.0), np.full(4, 2.0))
    assert same.d == 0.0
    apart = cohens_d(np.full(5, 3.0), np.full(4, 2.0))
    assert apart.d == np.inf
    assert apart.ci_low == -np.inf and apart.ci_high == np.inf


# ---------------------------------------------------------------------------
# Metrics


def test_r2_rmse_brute_force():
    rng = np.random.default_rng(7)
    obs = rng.normal(size=50)
    pred = obs + 0.5 * rng.normal(size=50)
    m = r2_rmse(pred, obs, n_params=3)
    sse = float(np.sum((obs - pred) ** 2))
    sst = float(np.sum((obs - obs.mean()) ** 2))
    assert m.r2 == pytest.approx(1.0 - sse / sst, abs=1e-12)
    assert m.adj_r2 == pytest.approx(1.0 - (1.0 - m.r2) * 49 / (50 - 4), abs=1e-12)
    assert m.rmse == pytest.approx(math.sqrt(sse / 50), abs=1e-12)


def test_r2_rmse_validation():
    with pytest.raises(ZeroVariance):
        r2_rmse(np.zeros(10), np.full(10, 1.0), 1)
    with pytest.raises(ConfigError):
        r2_rmse(np.zeros(3), np.zeros(4), 1)
    with pytest.raises(ConfigError):
        r2_rmse(np.zeros(4), np.arange(4.0), 3)


# ---------------------------------------------------------------------------
# Bootstrap optimism


class FrozenModel:
    """Predicts a fixed stored vector; zero fitting flexibility."""

    n_params = 1

    def __init__(self, values):
        self._values = values

    def predict(self, rows):
        return self._values[rows]


def test_zero_flexibility_model_has_tiny_optimism():
    rng = np.random.default_rng(8)
    n = 150
    signal = rng.normal(size=n)
    y = signal + 0.8 * rng.normal(size=n)
    report = bootstrap_bias_correct(y, lambda rows, seed: FrozenModel(signal), n_bootstrap=100, seed=9)
    assert abs(report.optimism.r2) < 0.02
    assert abs(report.optimism.rmse) < 0.05
    assert report.n_skipped == 0


def test_overfit_model_has_large_optimism():
    rng = np.random.default_rng(10)
    n, p = 60, 25
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    y = rng.normal(size=n)  # pure noise: every fitted pattern is optimism

    class OlsModel:
        n_params = p + 1

        def __init__(self, beta):
            self._beta = beta

        def predict(self, rows):
            return X[rows] @ self._beta

    def fit(rows, seed):
        beta, *_ = np.linalg.lstsq(X[rows], y[rows], rcond=None)
        return OlsModel(beta)

    report = bootstrap_bias_correct(y, fit, n_bootstrap=100, seed=11)
    assert report.optimism.r2 > 0.05
    assert report.corrected.r2 < report.apparent.r2
    assert report.corrected.rmse > report.apparent.rmse


def test_bootstrap_seed_and_row_contract():
    n = 40
    rng = np.random.default_rng(12)
    y = rng.normal(size=n)
    pred = y + 0.1 * rng.normal(size=n)
    seen: list[tuple[np.ndarray, int]] = []

    def fit(rows, seed):
        seen.append((rows.copy(), seed))
        return FrozenModel(pred)

    master = 13
    bootstrap_bias_correct(y, fit, n_bootstrap=5, seed=master)
    rows0, seed0 = seen[0]
    assert np.array_equal(rows0, np.arange(n))
    assert seed0 == derive_seed(master, "apparent")
    for rep in range(5):
        rows, seed = seen[1 + rep]
        assert np.array_equal(rows, generator(master, "replicate", rep).integers(0, n, size=n))
        assert seed == derive_seed(master, "replicate", rep, "fit")


def test_degenerate_replicates_skipped_and_counted():
    n = 20
    rng = np.random.default_rng(14)
    y = rng.normal(size=n)
    pred = y + 0.2 * rng.normal(size=n)
    master, n_boot = 15, 30

    def fit(rows, seed):
        if int(rows.sum()) % 3 == 0:
            raise RankDeficient("forced degenerate resample")
        return FrozenModel(pred)

    assert (n * (n - 1) // 2) % 3 != 0  # apparent fit must survive
    expected_skips = sum(
        int(generator(master, "replicate", rep).integers(0, n, size=n).sum()) % 3 == 0
        for rep in range(n_boot)
    )
    assert expected_skips >= 1
    report = bootstrap_bias_correct(y, fit, n_bootstrap=n_boot, seed=master)
    assert report.n_skipped == expected_skips
    assert len(report.replicates) == n_boot - expected_skips
    assert report.n_bootstrap == n_boot


def test_all_degenerate_raises():
    y = np.arange(10.0)

    def fit(rows, seed):
        if rows.size == y.size and np.array_equal(rows, np.arange(10)):
            return FrozenModel(y)
        raise EmptySelection("nothing survives")

    with pytest.raises(ZeroVariance):
        bootstrap_bias_correct(y, fit, n_bootstrap=4, seed=16)


def test_report_determinism_and_json():
    rng = np.random.default_rng(17)
    n = 50
    y = rng.normal(size=n)
    pred = y + 0.3 * rng.normal(size=n)
    fit = lambda rows, seed: FrozenModel(pred)
    a = bootstrap_bias_correct(y, fit, n_bootstrap=20, seed=18)
    b = bootstrap_bias_correct(y, fit, n_bootstrap=20, seed=18)
    assert a.to_json() == b.to_json()
    doc = a.to_json()
    assert set(doc) == {"apparent", "optimism", "corrected", "n_bootstrap", "n_skipped", "replicates"}
    assert doc["corrected"]["r2"] == pytest.approx(doc["apparent"]["r2"] - doc["optimism"]["r2"], abs=1e-12)
    assert doc["corrected"]["rmse"] == pytest.approx(doc["apparent"]["rmse"] + doc["optimism"]["rmse"], abs=1e-12)
