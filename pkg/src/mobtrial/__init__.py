"""Treatment-moderator discovery for randomized trials.

Model-based recursive partitioning on a quantile-harmonized composite
outcome, with forest-based moderator preselection, missForest-style
imputation, and bootstrap optimism correction. The service and CLI layers
are imported lazily from mobtrial.service / mobtrial.cli.
"""

__version__ = "0.1.0"

from .composite import (
    MAX_SKEWNESS,
    OccasionComposites,
    QuantileMap,
    ScaleSpec,
    SkewNormalParams,
    build_composites,
    build_quantile_map,
    composite_score,
    fit_skew_normal,
    leave_one_out_composites,
    owens_t,
    sn_cdf,
    sn_ppf,
)
from .errors import (
    AllMissingColumn,
    ConfigError,
    DegenerateScale,
    EmptySelection,
    EmptyTable,
    EmptyTrainingSet,
    MissingSplitValue,
    MobtrialError,
    NoFeasibleSplit,
    ParseError,
    RankDeficient,
    SingleArmLeaf,
    StageError,
    UnknownColumn,
    ZeroVariance,
)
from .forest import ForestConfig, RandomForest, fit_random_forest
from .impute import ImputationResult, impute
from .linreg import NodeModel, fit_ols, score_contributions
from .mob import (
    MobConfig,
    MobNode,
    MobTree,
    Moderator,
    StabilityTestRecord,
    grow,
    grow_table,
    moderators_from_table,
    predict,
    prune,
    stability_test,
    tree_json_text,
    tree_to_json,
)
from .mobforest import (
    ImportanceTable,
    MobForest,
    MobForestConfig,
    fit_forest,
    permutation_importance,
    preselect,
)
from .pipeline import (
    ArtifactRecord,
    CsvInput,
    PipelineConfig,
    RunResult,
    config_from_dict,
    run,
)
from .rng import derive_seed, generator
from .synthetic import (
    ModeratorSpec,
    PlantedEffect,
    TrialGenConfig,
    default_moderators,
    default_scales,
    generate,
    mask_mcar,
    trial_schema,
)
from .tables import ColumnSpec, DataTable, from_columns, read_csv, summarize, write_csv
from .validate import (
    EffectSize,
    Metrics,
    ValidationReport,
    bootstrap_bias_correct,
    cohens_d,
    r2_rmse,
)

__all__ = [name for name in dir() if not name.startswith("_")]
