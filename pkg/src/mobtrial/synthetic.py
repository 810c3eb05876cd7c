"""Seeded generator of two-arm trial datasets with a planted threshold moderator.

The generator draws moderators from configured marginals, builds baseline
severity components around a shared latent, composites them, and then
plants a piecewise-linear outcome structure on the composite scale:

    post = intercept(side) + slope(side) * baseline + effect(side) * treatment + noise

where side is determined by one moderator against a cutpoint. Post-test
components are decomposed from the standardized linear predictor so that
the pipeline's own composite construction approximately recovers the
planted structure. MCAR masking is applied last.

Everything is deterministic for a fixed seed: each column and stage draws
from its own derived RNG stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .composite import ScaleSpec, build_composites
from .errors import ConfigError
from .rng import derive_seed, generator
from .tables import ColumnSpec, DataTable, from_columns


@dataclass(frozen=True)
class ModeratorSpec:
    """Marginal distribution of one moderator column.

    dist: "normal" | "lognormal" | "bernoulli" | "categorical".
    Normal/lognormal take mean/sd (lognormal is moment-matched, keeping
    skewed positive quantities positive). decimals rounds to the
    instrument's natural grid; None leaves values unrounded.
    """

    name: str
    dist: str
    mean: float = 0.0
    sd: float = 1.0
    p: float = 0.5
    levels: tuple[str, ...] = ()
    probs: tuple[float, ...] = ()
    decimals: int | None = None

    def __post_init__(self) -> None:
        if self.dist not in ("normal", "lognormal", "bernoulli", "categorical"):
            raise ConfigError(f"moderator {self.name!r}: unknown dist {self.dist!r}")
        if self.dist in ("normal", "lognormal") and self.sd <= 0:
            raise ConfigError(f"moderator {self.name!r}: sd must be > 0")
        if self.dist == "lognormal" and self.mean <= 0:
            raise ConfigError(f"moderator {self.name!r}: lognormal mean must be > 0")
        if self.dist == "bernoulli" and not 0 < self.p < 1:
            raise ConfigError(f"moderator {self.name!r}: p must be in (0, 1)")
        if self.dist == "categorical":
            if len(self.levels) < 2 or len(self.levels) != len(self.probs):
                raise ConfigError(f"moderator {self.name!r}: levels/probs mismatch")
            if abs(sum(self.probs) - 1.0) > 1e-9:
                raise ConfigError(f"moderator {self.name!r}: probs must sum to 1")

    @property
    def kind(self) -> str:
        return {"bernoulli": "binary", "categorical": "categorical"}.get(self.dist, "numeric")


def default_moderators() -> tuple[ModeratorSpec, ...]:
    """Marginals of the 32 baseline moderator candidates."""
    return (
        ModeratorSpec("age", "normal", mean=28.75, sd=8.89, decimals=0),
        ModeratorSpec("german_native", "bernoulli", p=0.91),
        ModeratorSpec(
            "education",
            "categorical",
            levels=("low", "medium", "high"),
            probs=(0.02, 0.445, 0.535),
        ),
        ModeratorSpec("married", "bernoulli", p=0.255),
        ModeratorSpec("has_children", "bernoulli", p=0.08),
        ModeratorSpec("previous_treatment", "bernoulli", p=0.32),
        ModeratorSpec("psychotherapy_experience", "bernoulli", p=0.36),
        ModeratorSpec("online_training_experience", "bernoulli", p=0.07),
        ModeratorSpec("symptom_duration_years", "lognormal", mean=8.02, sd=7.06, decimals=1),
        ModeratorSpec("lifelong_onset", "bernoulli", p=0.38),
        ModeratorSpec("intercourse_attempt_rate", "lognormal", mean=6.95, sd=16.74, decimals=0),
        ModeratorSpec("sexual_abuse_history", "bernoulli", p=0.1011),
        ModeratorSpec("pain_control_cognitions", "normal", mean=2.73, sd=1.45, decimals=1),
        ModeratorSpec("catastrophizing_cognitions", "normal", mean=4.12, sd=1.24, decimals=1),
        ModeratorSpec("self_image_cognitions", "normal", mean=3.38, sd=1.37, decimals=1),
        ModeratorSpec("incompatibility_cognitions", "normal", mean=3.16, sd=1.77, decimals=1),
        ModeratorSpec("positive_cognitions", "normal", mean=2.25, sd=1.16, decimals=1),
        ModeratorSpec("sexual_desire", "normal", mean=3.31, sd=1.11, decimals=1),
        ModeratorSpec("sexual_arousal", "normal", mean=3.96, sd=1.52, decimals=1),
        ModeratorSpec("lubrication", "normal", mean=3.95, sd=1.68, decimals=1),
        ModeratorSpec("orgasm_function", "normal", mean=3.81, sd=1.82, decimals=1),
        ModeratorSpec("partner_insertion_frequency", "normal", mean=0.50, sd=0.64, decimals=1),
        ModeratorSpec("partnership_duration_years", "lognormal", mean=6.17, sd=5.98, decimals=1),
        ModeratorSpec("delegated_dyadic_coping", "normal", mean=7.07, sd=1.94, decimals=0),
        ModeratorSpec("joint_dyadic_coping", "normal", mean=17.13, sd=3.84, decimals=0),
        ModeratorSpec("evaluation_dyadic_coping", "normal", mean=7.47, sd=1.79, decimals=0),
        ModeratorSpec("relationship_quality", "normal", mean=21.03, sd=4.30, decimals=0),
        ModeratorSpec("relationship_happiness", "normal", mean=3.68, sd=1.07, decimals=0),
        ModeratorSpec("self_esteem", "normal", mean=20.77, sd=5.82, decimals=0),
        ModeratorSpec("generalized_anxiety", "normal", mean=7.30, sd=4.06, decimals=0),
        ModeratorSpec("trait_anxiety", "normal", mean=50.93, sd=13.87, decimals=0),
        ModeratorSpec("wellbeing_index", "normal", mean=50.28, sd=17.47, decimals=0),
    )


def default_scales() -> tuple[ScaleSpec, ...]:
    """The seven outcome scales, oriented so higher composite = less severe."""
    return (
        ScaleSpec("coital_penetration", "dichotomous", "higher_is_better",
                  "coital_penetration_pre", "coital_penetration_post"),
        ScaleSpec("noncoital_self_insertion", "continuous", "higher_is_better",
                  "noncoital_self_insertion_pre", "noncoital_self_insertion_post"),
        ScaleSpec("pain_function", "continuous", "higher_is_better",
                  "pain_function_pre", "pain_function_post"),
        ScaleSpec("pain_interference", "continuous", "higher_is_worse",
                  "pain_interference_pre", "pain_interference_post"),
        ScaleSpec("coital_fear", "continuous", "higher_is_worse",
                  "coital_fear_pre", "coital_fear_post"),
        ScaleSpec("noncoital_fear", "continuous", "higher_is_worse",
                  "noncoital_fear_pre", "noncoital_fear_post"),
        ScaleSpec("sexual_satisfaction", "continuous", "higher_is_better",
                  "sexual_satisfaction_pre", "sexual_satisfaction_post"),
    )


# Per-scale generation marginals: (pre_mean, pre_sd, post_mean, post_sd, decimals).
# coital_penetration is dichotomous: constant 0 at baseline, pooled rate at post.
_COMPONENT_MARGINALS: dict[str, tuple[float, float, float, float, int]] = {
    "noncoital_self_insertion": (1.11, 0.925, 1.495, 0.88, 1),
    "pain_function": (1.625, 1.03, 2.33, 1.31, 1),
    "pain_interference": (4.63, 0.505, 4.045, 0.85, 1),
    "coital_fear": (11.075, 3.115, 9.215, 3.315, 0),
    "noncoital_fear": (11.59, 4.24, 10.895, 4.03, 0),
    "sexual_satisfaction": (3.50, 1.35, 3.73, 1.24, 1),
}
_PENETRATION_POST_RATE = 0.22


@dataclass(frozen=True)
class PlantedEffect:
    """Threshold moderator and the per-side treatment effects (composite scale)."""

    moderator: str = "joint_dyadic_coping"
    cutpoint: float = 13.0
    effect_below: float = 4.084
    effect_above: float = 13.243


@dataclass(frozen=True)
class TrialGenConfig:
    n: int = 200
    seed: int = 1
    arm_ratio: float = 0.5
    moderator_specs: tuple[ModeratorSpec, ...] = field(default_factory=default_moderators)
    planted_effect: PlantedEffect = field(default_factory=PlantedEffect)
    baseline_post_slope_below: float = 0.877
    baseline_post_slope_above: float = 0.428
    intercept_below: float = 3.435
    intercept_above: float = 18.694
    noise_sd: float = 11.0  # calibrated so a recovered split leaves apparent R^2 near 0.39
    missing_rate: float = 0.0
    latent_loading: float = 0.9
    baseline_loading: float = 0.6
    correlations: tuple[tuple[str, str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.n < 30:
            raise ConfigError(f"n must be >= 30 (scale fitting needs data), got {self.n}")
        if not 0 < self.arm_ratio < 1:
            raise ConfigError(f"arm_ratio must be in (0, 1), got {self.arm_ratio}")
        if self.noise_sd <= 0:
            raise ConfigError(f"noise_sd must be > 0, got {self.noise_sd}")
        if not 0 <= self.missing_rate < 0.5:
            raise ConfigError(f"missing_rate must be in [0, 0.5), got {self.missing_rate}")
        if not 0 < self.latent_loading < 1 or not 0 < self.baseline_loading < 1:
            raise ConfigError("loadings must be in (0, 1)")
        names = {m.name for m in self.moderator_specs}
        if self.planted_effect.moderator not in names:
            raise ConfigError(
                f"planted_effect.moderator {self.planted_effect.moderator!r} is not a declared moderator"
            )
        for a, b, rho in self.correlations:
            if a not in names or b not in names:
                raise ConfigError(f"correlation names unknown: ({a!r}, {b!r})")
            if not -1 < rho < 1:
                raise ConfigError(f"correlation rho must be in (-1, 1), got {rho}")


def trial_schema(config: TrialGenConfig) -> tuple[ColumnSpec, ...]:
    """Column schema of a generated trial table."""
    cols: list[ColumnSpec] = [
        ColumnSpec("participant_id", "numeric", "id"),
        ColumnSpec("treatment", "binary", "treatment"),
    ]
    for m in config.moderator_specs:
        cols.append(ColumnSpec(m.name, m.kind, "moderator", levels=m.levels))
    for scale in default_scales():
        pre_kind = "binary" if scale.kind == "dichotomous" else "numeric"
        cols.append(ColumnSpec(scale.baseline_column, pre_kind, "outcome_component_baseline"))
        cols.append(ColumnSpec(scale.post_column, pre_kind, "outcome_component_post"))
    return tuple(cols)


def _draw_moderators(config: TrialGenConfig) -> dict[str, np.ndarray]:
    n = config.n
    # Raw standard normals first so correlation blending acts on the
    # underlying Gaussian scale, before marginal transforms and rounding.
    raw: dict[str, np.ndarray] = {}
    for m in config.moderator_specs:
        if m.dist in ("normal", "lognormal"):
            raw[m.name] = generator(config.seed, "moderator", m.name).standard_normal(n)
    for a, b, rho in config.correlations:
        if a in raw and b in raw:
            raw[b] = rho * raw[a] + math.sqrt(1.0 - rho * rho) * raw[b]
    out: dict[str, np.ndarray] = {}
    for m in config.moderator_specs:
        if m.dist == "normal":
            vals = m.mean + m.sd * raw[m.name]
        elif m.dist == "lognormal":
            sigma2 = math.log(1.0 + (m.sd / m.mean) ** 2)
            mu = math.log(m.mean) - sigma2 / 2.0
            vals = np.exp(mu + math.sqrt(sigma2) * raw[m.name])
        elif m.dist == "bernoulli":
            vals = (generator(config.seed, "moderator", m.name).random(n) < m.p).astype(np.float64)
        else:
            rng = generator(config.seed, "moderator", m.name)
            vals = rng.choice(len(m.levels), size=n, p=np.asarray(m.probs)).astype(np.float64)
        if m.decimals is not None and m.dist not in ("bernoulli", "categorical"):
            vals = np.round(vals, m.decimals)
        out[m.name] = vals
    return out


def generate(config: TrialGenConfig) -> DataTable:
    """Generate one trial dataset; bitwise-reproducible for a fixed seed."""
    n = config.n
    schema = trial_schema(config)
    scales = default_scales()

    n_treat = int(round(n * config.arm_ratio))
    if not 1 <= n_treat <= n - 1:
        raise ConfigError("arm_ratio leaves an empty arm")
    order = generator(config.seed, "treatment").permutation(n)
    treatment = np.zeros(n, dtype=np.float64)
    treatment[order[:n_treat]] = 1.0

    columns: dict[str, np.ndarray] = {
        "participant_id": np.arange(1, n + 1, dtype=np.float64),
        "treatment": treatment,
    }
    columns.update(_draw_moderators(config))

    # Baseline components share a wellness latent so they intercorrelate
    # the way subscales of one condition do.
    wellness = generator(config.seed, "latent_baseline").standard_normal(n)
    bl = config.baseline_loading
    for scale in scales:
        if scale.kind == "dichotomous":
            columns[scale.baseline_column] = np.zeros(n, dtype=np.float64)
            continue
        mean_pre, sd_pre, _, _, dec = _COMPONENT_MARGINALS[scale.name]
        sign = 1.0 if scale.direction == "higher_is_better" else -1.0
        eps = generator(config.seed, "component", scale.name, "pre").standard_normal(n)
        z = bl * sign * wellness + math.sqrt(1.0 - bl * bl) * eps
        columns[scale.baseline_column] = np.round(mean_pre + sd_pre * z, dec)

    baseline_table = from_columns(schema, {**columns, **{s.post_column: np.zeros(n) for s in scales}})
    baseline_composite = build_composites(baseline_table, scales, "baseline").scores.astype(np.float64)

    planted = config.planted_effect
    below = columns[planted.moderator] <= planted.cutpoint
    noise = generator(config.seed, "noise").standard_normal(n) * config.noise_sd
    linear = np.where(
        below,
        config.intercept_below
        + config.baseline_post_slope_below * baseline_composite
        + planted.effect_below * treatment,
        config.intercept_above
        + config.baseline_post_slope_above * baseline_composite
        + planted.effect_above * treatment,
    ) + noise
    eta = (linear - linear.mean()) / linear.std()

    lam = config.latent_loading
    resid = math.sqrt(1.0 - lam * lam)
    for scale in scales:
        eps = generator(config.seed, "component", scale.name, "post").standard_normal(n)
        if scale.kind == "dichotomous":
            threshold = float(stats.norm.ppf(1.0 - _PENETRATION_POST_RATE))
            success = lam * eta + resid * eps > threshold
            columns[scale.post_column] = success.astype(np.float64)
            continue
        _, _, mean_post, sd_post, dec = _COMPONENT_MARGINALS[scale.name]
        sign = 1.0 if scale.direction == "higher_is_better" else -1.0
        z = lam * sign * eta + resid * eps
        columns[scale.post_column] = np.round(mean_post + sd_post * z, dec)

    table = from_columns(schema, columns)
    if config.missing_rate > 0:
        table = mask_mcar(table, config.missing_rate, derive_seed(config.seed, "mcar"))
    return table


def mask_mcar(table: DataTable, rate: float, seed: int) -> DataTable:
    """Mask each non-treatment, non-id cell independently with probability rate."""
    if not 0 <= rate < 1:
        raise ConfigError(f"rate must be in [0, 1), got {rate}")
    if rate == 0:
        return table
    rng = generator(seed, "mcar")
    values = dict(table.values)
    missing = dict(table.missing)
    for spec in table.schema:
        drop = rng.random(table.n) < rate
        if spec.role in ("treatment", "id"):
            continue
        vals = table.values[spec.name].copy()
        vals[drop] = np.nan
        values[spec.name] = vals
        missing[spec.name] = table.missing[spec.name] | drop
    return DataTable(schema=table.schema, values=values, missing=missing)
