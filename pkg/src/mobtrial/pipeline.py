"""Stage orchestration: config parsing, fixed-order execution, artifacts.

Stage order is fixed: acquire (generate or ingest) -> impute -> composite
-> preselect -> mob -> validate. Every emitted file is recorded in
manifest.json as {path, sha256, stage}. All stage seeds derive from the
master seed unless a stage section pins its own.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .composite import OccasionComposites, ScaleSpec, build_composites, leave_one_out_composites
from .errors import ConfigError, EmptySelection, MobtrialError, StageError
from .forest import ForestConfig
from .impute import ImputationResult, impute
from .mob import MobConfig, MobTree, Moderator, grow, grow_table, moderators_from_table, predict, prune, tree_json_text
from .mobforest import ImportanceTable, MobForestConfig, fit_forest, permutation_importance, preselect
from .plots import (
    render_density_panels,
    render_density_svg,
    render_forest_plot_svg,
    render_importance_svg,
    render_tree_svg,
)
from .rng import derive_seed
from .synthetic import PlantedEffect, TrialGenConfig, default_scales, generate, trial_schema
from .tables import ColumnSpec, DataTable, format_float, read_csv, write_csv
from .validate import bootstrap_bias_correct

logger = logging.getLogger("mobtrial.pipeline")

VERBS = ("generate", "run", "impute", "tree", "validate")


@dataclass(frozen=True)
class CsvInput:
    """An existing trial table: file path plus its schema.

    schema is either "trial" (the synthetic generator's column set) or the
    path of a JSON file with {"columns": [{name, kind, role, levels?}]}.
    """

    path: str
    schema: str = "trial"


@dataclass(frozen=True)
class PipelineConfig:
    """Full-run configuration.

    Per-stage seeds (*_seed) of None derive from master_seed; the seed
    fields inside the stage configs themselves are overwritten at run time,
    so the master seed alone pins the whole run.
    """

    master_seed: int = 1
    output_dir: str = "out"
    synthetic: TrialGenConfig | None = field(default_factory=TrialGenConfig)
    csv: CsvInput | None = None
    scales: tuple[ScaleSpec, ...] = field(default_factory=default_scales)
    impute: ForestConfig = field(default_factory=ForestConfig)
    preselect_enabled: bool = True
    preselect: MobForestConfig = field(default_factory=MobForestConfig)
    mob: MobConfig = field(default_factory=MobConfig)
    validate_enabled: bool = True
    n_bootstrap: int = 200
    fast_validation: bool = False
    generate_seed: int | None = None
    impute_seed: int | None = None
    preselect_seed: int | None = None
    mob_seed: int | None = None
    validate_seed: int | None = None

    def __post_init__(self) -> None:
        if (self.synthetic is None) == (self.csv is None):
            raise ConfigError("exactly one of synthetic/csv input must be set")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if self.n_bootstrap < 1:
            raise ConfigError(f"n_bootstrap must be >= 1, got {self.n_bootstrap}")
        if not self.scales:
            raise ConfigError("at least one scale is required")
        names = [s.name for s in self.scales]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate scale names")
        if self.synthetic is not None and tuple(self.scales) != default_scales():
            raise ConfigError("custom scales require csv input (the generator emits the default scale columns)")

    def stage_seed(self, stage: str) -> int:
        override = {
            "generate": self.generate_seed,
            "impute": self.impute_seed,
            "preselect": self.preselect_seed,
            "mob": self.mob_seed,
            "validate": self.validate_seed,
        }[stage]
        return override if override is not None else derive_seed(self.master_seed, stage)


# ---------------------------------------------------------------------------
# Config parsing (TOML-shaped nested dicts)

_UNSET = object()


class _Section:
    """Typed key extraction with unknown-key rejection."""

    def __init__(self, name: str, data: Any):
        if not isinstance(data, dict):
            raise ConfigError(f"[{name}] must be a table")
        self.name = name
        self.data = dict(data)

    def take(self, key: str, kind: type, default: Any = _UNSET) -> Any:
        if key not in self.data:
            if default is _UNSET:
                raise ConfigError(f"[{self.name}] missing required key {key!r}")
            return default
        value = self.data.pop(key)
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is bool and not isinstance(value, bool):
            raise ConfigError(f"[{self.name}] {key} must be a boolean")
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"[{self.name}] {key} must be an integer")
        if not isinstance(value, kind):
            raise ConfigError(f"[{self.name}] {key} must be {kind.__name__}")
        return value

    def done(self) -> None:
        if self.data:
            raise ConfigError(f"[{self.name}] unknown keys: {', '.join(sorted(self.data))}")


def _parse_scales(entries: Any) -> tuple[ScaleSpec, ...]:
    if not isinstance(entries, list):
        raise ConfigError("[composite] scales must be an array of tables")
    out = []
    for i, entry in enumerate(entries):
        sec = _Section(f"composite.scales[{i}]", entry)
        out.append(
            ScaleSpec(
                name=sec.take("name", str),
                kind=sec.take("kind", str),
                direction=sec.take("direction", str),
                baseline_column=sec.take("baseline_column", str),
                post_column=sec.take("post_column", str),
            )
        )
        sec.done()
    return tuple(out)


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a PipelineConfig from a parsed TOML document.

    Unknown sections or keys are errors: a typo must not silently fall back
    to a default.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    known = {"pipeline", "input", "synthetic", "composite", "impute", "preselect", "mob", "validate"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")

    pipe = _Section("pipeline", raw.get("pipeline", {}))
    master_seed = pipe.take("master_seed", int, 1)
    output_dir = pipe.take("output_dir", str, "out")
    pipe.done()

    inp = _Section("input", raw.get("input", {}))
    kind = inp.take("kind", str, "synthetic")
    if kind not in ("synthetic", "csv"):
        raise ConfigError(f"[input] kind must be 'synthetic' or 'csv', got {kind!r}")
    csv_input: CsvInput | None = None
    if kind == "csv":
        csv_input = CsvInput(path=inp.take("path", str), schema=inp.take("schema", str, "trial"))
    inp.done()

    synthetic: TrialGenConfig | None = None
    generate_seed: int | None = None
    if kind == "synthetic":
        syn = _Section("synthetic", raw.get("synthetic", {}))
        generate_seed = syn.take("seed", int, None)
        planted = PlantedEffect(
            moderator=syn.take("planted_moderator", str, PlantedEffect.moderator),
            cutpoint=syn.take("planted_cutpoint", float, PlantedEffect.cutpoint),
            effect_below=syn.take("effect_below", float, PlantedEffect.effect_below),
            effect_above=syn.take("effect_above", float, PlantedEffect.effect_above),
        )
        synthetic = TrialGenConfig(
            n=syn.take("n", int, TrialGenConfig.n),
            arm_ratio=syn.take("arm_ratio", float, TrialGenConfig.arm_ratio),
            planted_effect=planted,
            baseline_post_slope_below=syn.take("slope_below", float, TrialGenConfig.baseline_post_slope_below),
            baseline_post_slope_above=syn.take("slope_above", float, TrialGenConfig.baseline_post_slope_above),
            intercept_below=syn.take("intercept_below", float, TrialGenConfig.intercept_below),
            intercept_above=syn.take("intercept_above", float, TrialGenConfig.intercept_above),
            noise_sd=syn.take("noise_sd", float, TrialGenConfig.noise_sd),
            missing_rate=syn.take("missing_rate", float, TrialGenConfig.missing_rate),
            latent_loading=syn.take("latent_loading", float, TrialGenConfig.latent_loading),
            baseline_loading=syn.take("baseline_loading", float, TrialGenConfig.baseline_loading),
        )
        syn.done()
    elif "synthetic" in raw:
        raise ConfigError("[synthetic] section requires input.kind = 'synthetic'")

    comp = _Section("composite", raw.get("composite", {}))
    scale_entries = comp.take("scales", list, None)
    scales = _parse_scales(scale_entries) if scale_entries is not None else default_scales()
    comp.done()

    imp = _Section("impute", raw.get("impute", {}))
    impute_seed = imp.take("seed", int, None)
    impute_cfg = ForestConfig(
        n_trees=imp.take("n_trees", int, ForestConfig.n_trees),
        mtry=imp.take("mtry", int, None),
        min_leaf=imp.take("min_leaf", int, None),
        max_iterations=imp.take("max_iterations", int, ForestConfig.max_iterations),
    )
    imp.done()

    pre = _Section("preselect", raw.get("preselect", {}))
    preselect_enabled = pre.take("enabled", bool, True)
    preselect_seed = pre.take("seed", int, None)
    tree_cfg = MobConfig(
        alpha=pre.take("alpha", float, 0.2),
        mc_replicates=pre.take("mc_replicates", int, 999),
        min_node_size=pre.take("min_node_size", int, MobConfig.min_node_size),
    )
    preselect_cfg = MobForestConfig(
        n_trees=pre.take("n_trees", int, MobForestConfig.n_trees),
        moderators_per_tree=pre.take("moderators_per_tree", int, None),
        sampling=pre.take("sampling", str, MobForestConfig.sampling),
        tree_config=tree_cfg,
        family_correction=pre.take("family_correction", bool, MobForestConfig.family_correction),
    )
    pre.done()

    mob_sec = _Section("mob", raw.get("mob", {}))
    mob_seed = mob_sec.take("seed", int, None)
    mob_cfg = MobConfig(
        alpha=mob_sec.take("alpha", float, MobConfig.alpha),
        bonferroni=mob_sec.take("bonferroni", bool, MobConfig.bonferroni),
        min_node_size=mob_sec.take("min_node_size", int, MobConfig.min_node_size),
        max_depth=mob_sec.take("max_depth", int, None),
        trim=mob_sec.take("trim", float, MobConfig.trim),
        mc_replicates=mob_sec.take("mc_replicates", int, MobConfig.mc_replicates),
        test_scope=mob_sec.take("test_scope", str, MobConfig.test_scope),
    )
    mob_sec.done()

    val = _Section("validate", raw.get("validate", {}))
    validate_enabled = val.take("enabled", bool, True)
    n_bootstrap = val.take("n_bootstrap", int, 200)
    validate_seed = val.take("seed", int, None)
    fast_validation = val.take("fast", bool, False)
    val.done()

    return PipelineConfig(
        master_seed=master_seed,
        output_dir=output_dir,
        synthetic=synthetic,
        csv=csv_input,
        scales=scales,
        impute=impute_cfg,
        preselect_enabled=preselect_enabled,
        preselect=preselect_cfg,
        mob=mob_cfg,
        validate_enabled=validate_enabled,
        n_bootstrap=n_bootstrap,
        fast_validation=fast_validation,
        generate_seed=generate_seed,
        impute_seed=impute_seed,
        preselect_seed=preselect_seed,
        mob_seed=mob_seed,
        validate_seed=validate_seed,
    )


def _load_schema_file(path: str) -> tuple[ColumnSpec, ...]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("columns"), list):
        raise ConfigError(f"schema file {path!r} must contain a 'columns' array")
    cols = []
    for i, entry in enumerate(doc["columns"]):
        sec = _Section(f"columns[{i}]", entry)
        cols.append(
            ColumnSpec(
                name=sec.take("name", str),
                kind=sec.take("kind", str),
                role=sec.take("role", str),
                levels=tuple(sec.take("levels", list, ())),
            )
        )
        sec.done()
    return tuple(cols)


# ---------------------------------------------------------------------------
# Execution

@dataclass(frozen=True)
class ArtifactRecord:
    path: str
    sha256: str
    stage: str

    def to_json(self) -> dict:
        return {"path": self.path, "sha256": self.sha256, "stage": self.stage}


@dataclass(frozen=True)
class RunResult:
    output_dir: str
    stage: str
    artifacts: tuple[ArtifactRecord, ...]


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


class _Run:
    def __init__(self, config: PipelineConfig, verb: str):
        self.config = config
        self.verb = verb
        self.artifacts: list[ArtifactRecord] = []
        self.table: DataTable | None = None
        self.completed: DataTable | None = None
        self.baseline: OccasionComposites | None = None
        self.post: OccasionComposites | None = None
        self.selected: list[str] | None = None
        self.tree: MobTree | None = None

    def emit_text(self, relpath: str, stage: str, text: str) -> None:
        full = os.path.join(self.config.output_dir, relpath)
        data = text.encode("utf-8")
        with open(full, "wb") as fh:
            fh.write(data)
        self.artifacts.append(ArtifactRecord(relpath, hashlib.sha256(data).hexdigest(), stage))

    def emit_file(self, relpath: str, stage: str) -> None:
        full = os.path.join(self.config.output_dir, relpath)
        with open(full, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.artifacts.append(ArtifactRecord(relpath, digest, stage))

    # -- stages -------------------------------------------------------------

    def acquire(self) -> None:
        cfg = self.config
        if cfg.synthetic is not None:
            gen_cfg = replace(cfg.synthetic, seed=cfg.stage_seed("generate"))
            self.table = generate(gen_cfg)
            stage = "generate"
        else:
            assert cfg.csv is not None
            if cfg.csv.schema == "trial":
                schema = trial_schema(TrialGenConfig())
            else:
                schema = _load_schema_file(cfg.csv.schema)
            self.table = read_csv(cfg.csv.path, schema)
            stage = "ingest"
        write_csv(self.table, os.path.join(cfg.output_dir, "data.csv"))
        self.emit_file("data.csv", stage)
        logger.info("%s: %d rows, %d columns", stage, self.table.n, len(self.table.schema))

    def impute_stage(self) -> None:
        assert self.table is not None
        cfg = replace(self.config.impute, seed=self.config.stage_seed("impute"))
        result: ImputationResult = impute(self.table, cfg)
        self.completed = result.completed
        write_csv(result.completed, os.path.join(self.config.output_dir, "data_imputed.csv"))
        self.emit_file("data_imputed.csv", "impute")
        rows = []
        for sweep, ((d_num, d_cat), oob) in enumerate(zip(result.convergence_trace, result.oob_errors), start=1):
            for column, err in oob.items():
                rows.append([str(sweep), column, format_float(err), format_float(d_num), format_float(d_cat)])
        self.emit_text(
            "impute_convergence.csv",
            "impute",
            _csv_text(["sweep", "column", "oob_error", "delta_numeric", "delta_categorical"], rows),
        )
        logger.info("impute: %d sweeps accepted", result.iterations_run)

    def composite_stage(self) -> None:
        assert self.completed is not None
        scales = self.config.scales
        self.baseline = build_composites(self.completed, scales, "baseline")
        self.post = build_composites(self.completed, scales, "post")
        for occ, result in (("baseline", self.baseline), ("post", self.post)):
            doc = {"occasion": occ, "scales": [d.to_json() for d in result.diagnostics]}
            self.emit_text(f"composite_{occ}.json", "composite", json.dumps(doc, indent=2) + "\n")
        self.emit_text("density.svg", "composite", render_density_svg(self.post.scores))
        loo = leave_one_out_composites(self.post, scales)
        panels = [(f"without {name}", scores) for name, scores in loo.items()]
        self.emit_text("density_loo.svg", "composite", render_density_panels(panels))

    def _moderator_names(self) -> list[str]:
        assert self.completed is not None
        return [c.name for c in self.completed.by_role("moderator")]

    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        assert self.completed is not None and self.baseline is not None and self.post is not None
        treatment_cols = self.completed.by_role("treatment")
        if len(treatment_cols) != 1:
            raise ConfigError("table must declare exactly one treatment column")
        treatment, _ = self.completed.column(treatment_cols[0].name)
        return self.post.scores.astype(np.float64), self.baseline.scores.astype(np.float64), treatment

    def preselect_stage(self) -> None:
        y, base, treatment = self._arrays()
        names = self._moderator_names()
        mods = moderators_from_table(self.completed, names)
        cfg = replace(self.config.preselect, seed=self.config.stage_seed("preselect"))
        forest = fit_forest(y, base, treatment, mods, cfg)
        importance: ImportanceTable = permutation_importance(forest)
        rows = [
            [r["name"], format_float(r["importance"]), str(r["rank"]), str(int(r["selected"]))]
            for r in importance.rows()
        ]
        self.emit_text("importance.csv", "preselect", _csv_text(["name", "importance", "rank", "selected"], rows))
        self.emit_text("importance.svg", "preselect", render_importance_svg(importance))
        try:
            self.selected = preselect(importance)
        except EmptySelection:
            logger.warning("preselection kept no moderator; falling back to the full set")
            self.selected = names
        logger.info("preselect: %d of %d moderators kept (%d/%d trees failed)",
                    len(self.selected), len(names), forest.n_failed, cfg.n_trees)

    def mob_stage(self) -> None:
        y, base, _ = self._arrays()
        names = self.selected if self.selected is not None else self._moderator_names()
        cfg = replace(self.config.mob, seed=self.config.stage_seed("mob"))
        self.tree = prune(grow_table(self.completed, y, base, names, cfg))
        self.emit_text("tree.json", "mob", tree_json_text(self.tree))
        self.emit_text("tree.svg", "mob", render_tree_svg(self.tree))
        logger.info("mob: %d leaves, depth %d", self.tree.n_leaves, self.tree.depth)

    def validate_stage(self) -> None:
        assert self.tree is not None
        y, base, treatment = self._arrays()
        cfg = self.config
        all_names = self._moderator_names()
        all_mods = moderators_from_table(self.completed, all_names)
        values = {mod.name: mod.values for mod in all_mods}
        frozen = list(self.selected) if self.selected is not None else all_names
        refit_preselect = cfg.preselect_enabled and not cfg.fast_validation

        def fit(rows: np.ndarray, seed: int) -> "_TreeModel":
            sliced = [Moderator(name=m.name, kind=m.kind, values=m.values[rows]) for m in all_mods]
            if refit_preselect:
                f_cfg = replace(cfg.preselect, seed=derive_seed(seed, "preselect"))
                forest = fit_forest(y[rows], base[rows], treatment[rows], sliced, f_cfg)
                try:
                    names = preselect(permutation_importance(forest))
                except EmptySelection:
                    names = all_names
            else:
                names = frozen
            keep = set(names)
            mods = [m for m in sliced if m.name in keep]
            t_cfg = replace(cfg.mob, seed=derive_seed(seed, "mob"))
            tree = prune(grow(y[rows], base[rows], treatment[rows], mods, t_cfg))
            return _TreeModel(tree=tree, baseline=base, treatment=treatment, values=values)

        report = bootstrap_bias_correct(y, fit, n_bootstrap=cfg.n_bootstrap, seed=cfg.stage_seed("validate"))
        doc = report.to_json()
        doc["fast_preselection"] = not refit_preselect
        self.emit_text("validation.json", "validate", json.dumps(doc, indent=2) + "\n")
        effects = [(f"node {nd.id} (n={nd.n})", nd.effect) for nd in self.tree.leaves() if nd.effect is not None]
        self.emit_text("forest_plot.svg", "validate", render_forest_plot_svg(effects))
        logger.info("validate: corrected R^2 %.3f (apparent %.3f), %d replicates skipped",
                    report.corrected.r2, report.apparent.r2, report.n_skipped)


@dataclass(frozen=True)
class _TreeModel:
    """Adapter giving a pruned tree the validator's model protocol."""

    tree: MobTree
    baseline: np.ndarray
    treatment: np.ndarray
    values: dict[str, np.ndarray]

    @property
    def n_params(self) -> int:
        return 3 * self.tree.n_leaves

    def predict(self, rows: np.ndarray) -> np.ndarray:
        sub = {k: v[rows] for k, v in self.values.items()}
        pred, _ = predict(self.tree, self.baseline[rows], self.treatment[rows], sub)
        return pred


def run(config: PipelineConfig, stage: str = "run") -> RunResult:
    """Execute the pipeline up to (and including) the requested stage verb."""
    if stage not in VERBS:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {', '.join(VERBS)}")
    if stage == "generate" and config.synthetic is None:
        raise ConfigError("stage 'generate' requires synthetic input")
    os.makedirs(config.output_dir, exist_ok=True)
    state = _Run(config, stage)

    def guarded(name: str, fn) -> None:
        try:
            fn()
        except StageError:
            raise
        except MobtrialError as err:
            raise StageError(name, err) from err
        except (ValueError, OSError, json.JSONDecodeError) as err:
            raise StageError(name, err) from err

    guarded("generate" if config.synthetic is not None else "ingest", state.acquire)
    if stage != "generate":
        guarded("impute", state.impute_stage)
        if stage != "impute":
            guarded("composite", state.composite_stage)
            if config.preselect_enabled:
                guarded("preselect", state.preselect_stage)
            guarded("mob", state.mob_stage)
            if stage == "validate" or (stage == "run" and config.validate_enabled):
                guarded("validate", state.validate_stage)

    manifest = [a.to_json() for a in state.artifacts]
    state.emit_text("manifest.json", "manifest", json.dumps(manifest, indent=2) + "\n")
    return RunResult(output_dir=config.output_dir, stage=stage, artifacts=tuple(state.artifacts))
