"""Skew-normal machinery and composite construction.

scipy.stats.skewnorm and scipy.special.owens_t serve as oracles only;
the library code must not depend on them for the fitting/binning path.
"""

import numpy as np
import pytest
from scipy import special, stats

from mobtrial.composite import (
    MAX_SKEWNESS,
    N_BINS,
    ScaleSpec,
    SkewNormalParams,
    assign_bin,
    assign_bins,
    assign_dichotomous,
    build_composites,
    build_quantile_map,
    composite_score,
    fit_skew_normal,
    leave_one_out_composites,
    owens_t,
    sn_cdf,
    sn_ppf,
)
from mobtrial.errors import ConfigError, DegenerateScale
from mobtrial.synthetic import TrialGenConfig, default_scales, generate

CONT = ScaleSpec("pain", "continuous", "higher_is_worse", "pain_pre", "pain_post")
CONT_GOOD = ScaleSpec("satisfaction", "continuous", "higher_is_better", "sat_pre", "sat_post")
DICH = ScaleSpec("penetration", "dichotomous", "higher_is_better", "pen_pre", "pen_post")
DICH_WORSE = ScaleSpec("avoidance", "dichotomous", "higher_is_worse", "av_pre", "av_post")


def test_owens_t_matches_scipy():
    grid_h = [-3.0, -1.2, -0.3, 0.0, 0.4, 1.0, 2.5, 6.0]
    grid_a = [-5.0, -1.0, -0.7, 0.0, 0.2, 0.9, 1.0, 1.8, 25.0]
    for h in grid_h:
        for a in grid_a:
            assert owens_t(h, a) == pytest.approx(float(special.owens_t(h, a)), abs=1e-12)


def test_sn_cdf_matches_scipy():
    params = SkewNormalParams(xi=1.3, omega=2.1, alpha=-3.7)
    for x in np.linspace(-8, 10, 23):
        oracle = stats.skewnorm.cdf(x, params.alpha, loc=params.xi, scale=params.omega)
        assert sn_cdf(float(x), params) == pytest.approx(float(oracle), abs=1e-12)


def test_sn_ppf_matches_scipy():
    params = SkewNormalParams(xi=-0.5, omega=0.8, alpha=2.0)
    for p in (0.01, 1 / 11, 0.25, 0.5, 9 / 11, 0.99):
        oracle = stats.skewnorm.ppf(p, params.alpha, loc=params.xi, scale=params.omega)
        assert sn_ppf(p, params) == pytest.approx(float(oracle), abs=1e-7)


def test_sn_ppf_rejects_bad_p():
    params = SkewNormalParams(xi=0.0, omega=1.0, alpha=0.0)
    with pytest.raises(ValueError):
        sn_ppf(0.0, params)
    with pytest.raises(ValueError):
        sn_ppf(1.0, params)


def test_fit_matches_sample_moments():
    # the fitted distribution must reproduce the sample mean, SD, and
    # (population-formula) skewness; verify against skewnorm's own moments
    rng = np.random.default_rng(5)
    values = rng.gamma(shape=4.0, scale=2.0, size=4000)
    params = fit_skew_normal(values)
    mean, var, skew = stats.skewnorm.stats(params.alpha, loc=params.xi, scale=params.omega, moments="mvs")
    assert float(mean) == pytest.approx(float(values.mean()), rel=1e-9)
    assert float(np.sqrt(var)) == pytest.approx(float(values.std(ddof=1)), rel=1e-9)
    centered = values - values.mean()
    sample_skew = float(np.mean(centered**3) / np.mean(centered**2) ** 1.5)
    assert float(skew) == pytest.approx(sample_skew, rel=1e-7)


def test_fit_recovers_known_parameters():
    oracle = stats.skewnorm(3.0, loc=2.0, scale=1.5)
    values = oracle.rvs(size=200000, random_state=11)
    params = fit_skew_normal(values)
    assert params.alpha == pytest.approx(3.0, abs=0.35)
    assert params.xi == pytest.approx(2.0, abs=0.1)
    assert params.omega == pytest.approx(1.5, abs=0.1)
    assert not params.clamped


def test_fit_clamps_excess_skewness():
    # exponential-ish data has skewness ~2, beyond the representable ~0.995
    rng = np.random.default_rng(2)
    values = rng.exponential(size=3000)
    params = fit_skew_normal(values)
    assert params.clamped
    assert params.alpha > 0
    centered = values - values.mean()
    assert float(np.mean(centered**3)) > 0
    mirrored = fit_skew_normal(-values)
    assert mirrored.clamped and mirrored.alpha < 0


def test_max_skewness_constant():
    # ((4-pi)/2) (2/pi)^1.5 / (1-2/pi)^1.5
    b = np.sqrt(2 / np.pi)
    expected = (4 - np.pi) / 2 * b**3 / (1 - b**2) ** 1.5
    assert MAX_SKEWNESS == pytest.approx(float(expected), rel=1e-12)
    assert MAX_SKEWNESS == pytest.approx(0.9952717, abs=1e-7)


def test_fit_degenerate_inputs():
    with pytest.raises(DegenerateScale):
        fit_skew_normal(np.arange(9, dtype=float))
    with pytest.raises(DegenerateScale):
        fit_skew_normal(np.full(50, 3.3))


def test_boundaries_sit_at_equiprobable_quantiles():
    rng = np.random.default_rng(7)
    values = rng.normal(10, 3, size=500)
    qmap = build_quantile_map(values, CONT_GOOD)
    assert len(qmap.boundaries) == N_BINS - 1
    for k, b in enumerate(qmap.boundaries, start=1):
        assert sn_cdf(b, qmap.params) == pytest.approx(k / N_BINS, abs=1e-8)
    assert list(qmap.boundaries) == sorted(qmap.boundaries)


def test_assign_bin_counts_boundaries_strictly_below():
    params = SkewNormalParams(xi=0.0, omega=1.0, alpha=0.0)
    qmap = build_quantile_map(np.random.default_rng(0).normal(size=100), CONT_GOOD)
    for value in (-99.0, qmap.boundaries[0], qmap.boundaries[5], 99.0):
        brute = sum(1 for b in qmap.boundaries if b < value)
        assert assign_bin(float(value), qmap) == brute
    del params


def test_assign_bins_matches_scalar_path():
    rng = np.random.default_rng(3)
    values = rng.normal(5, 2, size=300)
    qmap = build_quantile_map(values, CONT_GOOD)
    vec = assign_bins(values, qmap)
    scalars = np.array([assign_bin(float(v), qmap) for v in values])
    assert np.array_equal(vec, scalars)
    assert vec.min() >= 0 and vec.max() <= 10


def test_higher_is_worse_reverses_orientation():
    rng = np.random.default_rng(9)
    values = rng.normal(20, 4, size=400)
    qmap = build_quantile_map(values, CONT)
    assert qmap.negated
    low_raw = assign_bin(float(np.quantile(values, 0.02)), qmap)
    high_raw = assign_bin(float(np.quantile(values, 0.98)), qmap)
    assert low_raw > high_raw  # low severity -> high score


def test_dichotomous_mapping_exact():
    assert assign_dichotomous(np.array([0.0, 1.0]), DICH).tolist() == [0, 10]
    assert assign_dichotomous(np.array([0.0, 1.0]), DICH_WORSE).tolist() == [10, 0]
    with pytest.raises(ConfigError):
        assign_dichotomous(np.array([0.5]), DICH)


def test_composite_score_sums_rows():
    bins = np.array([[1, 2, 3], [10, 10, 10]])
    assert composite_score(bins).tolist() == [6, 30]


def _complete_trial(n=160, seed=4):
    return generate(TrialGenConfig(n=n, seed=seed, missing_rate=0.0))


def test_build_composites_range_and_diagnostics():
    table = _complete_trial()
    scales = default_scales()
    result = build_composites(table, scales, "post")
    assert result.scores.min() >= 0
    assert result.scores.max() <= 10 * len(scales)
    assert result.bins.shape == (table.n, len(scales))
    assert len(result.diagnostics) == len(scales)
    for diag in result.diagnostics:
        doc = diag.to_json()
        assert doc["occasion"] == "post"
        assert sum(doc["bin_counts"]) == table.n
        if diag.kind == "continuous":
            assert len(doc["boundaries"]) == N_BINS - 1


def test_build_composites_requires_complete_columns():
    table = generate(TrialGenConfig(n=160, seed=4, missing_rate=0.1))
    with pytest.raises(ValueError):
        build_composites(table, default_scales(), "post")


def test_occasions_are_fitted_separately():
    table = _complete_trial()
    scales = default_scales()
    pre = build_composites(table, scales, "baseline")
    post = build_composites(table, scales, "post")
    pre_b = [d.boundaries for d in pre.diagnostics if d.boundaries is not None]
    post_b = [d.boundaries for d in post.diagnostics if d.boundaries is not None]
    assert pre_b != post_b


def test_leave_one_out_drops_one_scale():
    table = _complete_trial()
    scales = default_scales()
    result = build_composites(table, scales, "post")
    variants = leave_one_out_composites(result, scales)
    assert set(variants) == {s.name for s in scales}
    for j, spec in enumerate(scales):
        assert np.array_equal(variants[spec.name], result.scores - result.bins[:, j])
        assert variants[spec.name].max() <= 60
