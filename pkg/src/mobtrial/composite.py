"""Composite outcome construction from severity scales.

Each continuous scale is mapped to an equiprobable 0..10 bin score through
a skew-normal model fitted to the observed values by moment matching; a
dichotomous scale contributes 0 or 10 directly. The composite is the sum
over the scales (0..70 for seven scales), oriented so that higher always
means better. Scales where higher raw values mean more severity are
negated before fitting, which preserves the orientation.

The skew-normal machinery (CDF via Owen's T, quantiles via bisection) is
implemented here in closed form; nothing is delegated to a distribution
library, so the mapping is reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateScale

# Largest skewness a skew-normal can represent (shape -> infinity).
MAX_SKEWNESS = ((4.0 - math.pi) / 2.0) * (2.0 / math.pi) ** 1.5 / (1.0 - 2.0 / math.pi) ** 1.5
SKEW_CLAMP = 0.99 * MAX_SKEWNESS

N_BINS = 11
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


@dataclass(frozen=True)
class ScaleSpec:
    """One severity scale: where it lives and which way it points."""

    name: str
    kind: str  # "continuous" | "dichotomous"
    direction: str  # "higher_is_better" | "higher_is_worse"
    baseline_column: str
    post_column: str

    def __post_init__(self) -> None:
        if self.kind not in ("continuous", "dichotomous"):
            raise ConfigError(f"scale {self.name!r}: unknown kind {self.kind!r}")
        if self.direction not in ("higher_is_better", "higher_is_worse"):
            raise ConfigError(f"scale {self.name!r}: unknown direction {self.direction!r}")


@dataclass(frozen=True)
class SkewNormalParams:
    """Location/scale/shape of a fitted skew-normal; clamped marks a
    sample skewness outside the representable range."""

    xi: float
    omega: float
    alpha: float
    clamped: bool = False


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _owens_t_core(h: float, a: float) -> float:
    # T(h, a) = (1/2pi) * integral_0^a exp(-h^2 (1+t^2)/2) / (1+t^2) dt, 0 <= a <= 1
    t = 0.5 * a * (_GL_NODES + 1.0)
    w = 0.5 * a * _GL_WEIGHTS
    integrand = np.exp(-0.5 * h * h * (1.0 + t * t)) / (1.0 + t * t)
    return float(np.dot(w, integrand)) / (2.0 * math.pi)


def owens_t(h: float, a: float) -> float:
    """Owen's T function for scalar arguments.

    Symmetries reduce to h >= 0, 0 <= a <= 1; |a| > 1 uses the standard
    complementary identity so the quadrature interval never exceeds [0, 1].
    """
    h = abs(h)  # T is even in h
    sign = 1.0
    if a < 0.0:  # T is odd in a
        sign, a = -1.0, -a
    if a == 0.0:
        return 0.0
    if a <= 1.0:
        return sign * _owens_t_core(h, a)
    ph, pah = _phi(h), _phi(a * h)
    value = 0.5 * (ph + pah) - ph * pah - _owens_t_core(a * h, 1.0 / a)
    return sign * value


def sn_cdf(x: float, params: SkewNormalParams) -> float:
    """Skew-normal CDF: Phi(z) - 2*T(z, alpha), z = (x - xi)/omega."""
    z = (x - params.xi) / params.omega
    return _phi(z) - 2.0 * owens_t(z, params.alpha)


def sn_ppf(p: float, params: SkewNormalParams) -> float:
    """Quantile by bisection on xi +/- 12*omega, to absolute 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    lo = params.xi - 12.0 * params.omega
    hi = params.xi + 12.0 * params.omega
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if sn_cdf(mid, params) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fit_skew_normal(values: np.ndarray) -> SkewNormalParams:
    """Moment-matching fit: mean, SD, and (clamped) skewness map to
    xi/omega/alpha in closed form.

    Requires >= 10 values with nonzero SD; raises DegenerateScale otherwise.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 10:
        raise DegenerateScale(f"need >= 10 values to fit, got {values.size}")
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    # tolerance catches constant columns whose float summation leaves ~1e-16 residue
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, abs(mean)):
        raise DegenerateScale("zero or non-finite standard deviation")
    centered = values - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    skew = m3 / m2**1.5
    clamped = abs(skew) > SKEW_CLAMP
    g = float(np.clip(skew, -SKEW_CLAMP, SKEW_CLAMP))
    # u = delta * sqrt(2/pi) solves skew = ((4-pi)/2) u^3 / (1-u^2)^(3/2)
    v = (2.0 * abs(g) / (4.0 - math.pi)) ** (2.0 / 3.0)
    u = math.copysign(math.sqrt(v / (1.0 + v)), g)
    delta = u / math.sqrt(2.0 / math.pi)
    alpha = delta / math.sqrt(1.0 - delta * delta)
    omega = sd / math.sqrt(1.0 - 2.0 * delta * delta / math.pi)
    xi = mean - omega * delta * math.sqrt(2.0 / math.pi)
    return SkewNormalParams(xi=xi, omega=omega, alpha=alpha, clamped=clamped)


@dataclass(frozen=True)
class QuantileMap:
    """Ten bin boundaries at p = k/11 of the fitted distribution.

    For higher_is_worse scales the fit ran on negated values and `negated`
    is True; assign_bin negates incoming values the same way, so bin 10
    always denotes least severity.
    """

    scale: str
    params: SkewNormalParams
    boundaries: tuple[float, ...]
    negated: bool

    def __post_init__(self) -> None:
        if len(self.boundaries) != N_BINS - 1:
            raise ConfigError(f"expected {N_BINS - 1} boundaries, got {len(self.boundaries)}")


def build_quantile_map(values: np.ndarray, spec: ScaleSpec) -> QuantileMap:
    """Fit the scale's skew-normal and place boundaries at k/11, k = 1..10."""
    if spec.kind != "continuous":
        raise ConfigError(f"scale {spec.name!r} is dichotomous; no quantile map")
    negated = spec.direction == "higher_is_worse"
    fit_values = -np.asarray(values, dtype=np.float64) if negated else np.asarray(values, dtype=np.float64)
    params = fit_skew_normal(fit_values)
    bounds = tuple(sn_ppf(k / N_BINS, params) for k in range(1, N_BINS))
    return QuantileMap(scale=spec.name, params=params, boundaries=bounds, negated=negated)


def assign_bin(value: float, qmap: QuantileMap) -> int:
    """Bin = number of boundaries strictly below the (oriented) value."""
    v = -value if qmap.negated else value
    return int(np.searchsorted(np.asarray(qmap.boundaries), v, side="left"))


def assign_bins(values: np.ndarray, qmap: QuantileMap) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if qmap.negated:
        v = -v
    return np.searchsorted(np.asarray(qmap.boundaries), v, side="left").astype(np.int64)


def assign_dichotomous(value: float | np.ndarray, spec: ScaleSpec) -> np.ndarray:
    """0 -> 0 and 1 -> 10 on the oriented scale (flipped if higher is worse)."""
    v = np.asarray(value, dtype=np.float64)
    if np.any((v != 0.0) & (v != 1.0)):
        raise ConfigError(f"scale {spec.name!r}: dichotomous values must be 0 or 1")
    if spec.direction == "higher_is_worse":
        v = 1.0 - v
    return (10 * v).astype(np.int64)


def composite_score(bins: np.ndarray) -> np.ndarray:
    """Sum bin scores across scales; one value per row."""
    return np.asarray(bins, dtype=np.int64).sum(axis=-1)


@dataclass(frozen=True)
class ScaleDiagnostics:
    scale: str
    occasion: str
    column: str
    kind: str
    direction: str
    params: SkewNormalParams | None
    boundaries: tuple[float, ...] | None
    bin_counts: tuple[int, ...]

    def to_json(self) -> dict:
        out: dict = {
            "scale": self.scale,
            "occasion": self.occasion,
            "column": self.column,
            "kind": self.kind,
            "direction": self.direction,
            "bin_counts": list(self.bin_counts),
        }
        if self.params is not None:
            out["skew_normal"] = {
                "xi": self.params.xi,
                "omega": self.params.omega,
                "alpha": self.params.alpha,
                "clamped": self.params.clamped,
            }
            out["boundaries"] = list(self.boundaries or ())
        return out


@dataclass(frozen=True)
class OccasionComposites:
    """Composite scores for one occasion plus everything needed to audit them."""

    occasion: str
    scores: np.ndarray
    bins: np.ndarray  # (n, n_scales) int
    maps: tuple[QuantileMap | None, ...]
    diagnostics: tuple[ScaleDiagnostics, ...]


def build_composites(table, scales: list[ScaleSpec] | tuple[ScaleSpec, ...], occasion: str) -> OccasionComposites:
    """Score every row of a complete table on one occasion.

    Each scale is fitted on its own occasion's column (baseline and post are
    fitted separately, so both occasions share the 0..70 interpretation but
    not the boundaries).
    """
    if occasion not in ("baseline", "post"):
        raise ConfigError(f"unknown occasion {occasion!r}")
    n = table.n
    bins = np.zeros((n, len(scales)), dtype=np.int64)
    maps: list[QuantileMap | None] = []
    diags: list[ScaleDiagnostics] = []
    for j, spec in enumerate(scales):
        column = spec.baseline_column if occasion == "baseline" else spec.post_column
        values, mask = table.column(column)
        if mask.any():
            raise ValueError(
                f"column {column!r} has {int(mask.sum())} missing cells; impute before scoring"
            )
        if spec.kind == "dichotomous":
            bins[:, j] = assign_dichotomous(values, spec)
            maps.append(None)
            qmap = None
        else:
            qmap = build_quantile_map(values, spec)
            bins[:, j] = assign_bins(values, qmap)
            maps.append(qmap)
        counts = np.bincount(bins[:, j], minlength=N_BINS)
        diags.append(
            ScaleDiagnostics(
                scale=spec.name,
                occasion=occasion,
                column=column,
                kind=spec.kind,
                direction=spec.direction,
                params=None if qmap is None else qmap.params,
                boundaries=None if qmap is None else qmap.boundaries,
                bin_counts=tuple(int(c) for c in counts),
            )
        )
    return OccasionComposites(
        occasion=occasion,
        scores=composite_score(bins),
        bins=bins,
        maps=tuple(maps),
        diagnostics=tuple(diags),
    )


def leave_one_out_composites(result: OccasionComposites, scales: list[ScaleSpec] | tuple[ScaleSpec, ...]) -> dict[str, np.ndarray]:
    """Composite variants with one scale removed each (sensitivity check)."""
    totals = result.scores
    return {spec.name: totals - result.bins[:, j] for j, spec in enumerate(scales)}
