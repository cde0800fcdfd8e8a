"""Config-driven end-to-end pipeline.

Stages run in a fixed order — ingest, fit, match, balance, estimate,
sensitivity, summary — each consuming the previous stage's in-memory
state and writing its report files into the output directory. A failure
wraps the cause in :class:`~matchdid.errors.StageError` naming the stage;
when at least one stage finished, ``manifest.json`` records per-stage
status so partial output is clearly marked.

All artifacts are deterministic functions of the config and input files:
no timestamps, hostnames, or absolute paths appear in any output, so two
runs of the same config are byte-identical.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import stats as _scipy_stats

from .effects import (
    AttEstimate,
    DidEstimate,
    aipw,
    att_matched,
    did_of_att,
    ipw,
    regression_adjustment,
)
from .errors import ConfigError, StageError
from .frames import (
    COLUMNS,
    DERIVED_COLUMNS,
    AnalysisFrame,
    Wave,
    filter_subgroup,
    load_frame,
    save_frame,
)
from .glm import (
    DEFAULT_COVARIATES,
    LINKS,
    DesignSpec,
    coefficient_table,
    fit_propensity,
    predict_propensity,
    save_model,
)
from .matching import (
    SupportRegion,
    balance_report,
    common_support,
    density_profile,
    nn_match,
)
from .reports import format_tsv, stars, summary_block
from .sensitivity import GammaGrid, mh_bounds
from .synthetic import naive_difference
from .zones import ZONE_ORDER

log = logging.getLogger("matchdid")

#: Environment variable consulted for the default output directory.
ENV_OUTPUT_DIR = "MATCHDID_OUTPUT_DIR"

STAGES = ("ingest", "fit", "match", "balance", "estimate", "sensitivity", "summary")

_PIPELINE_ESTIMATORS = ("psm_did", "ipw", "aipw", "regression", "naive")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run depends on.

    Loadable from a JSON file whose keys are exactly these field names;
    every key can also be overridden from the command line. When
    ``output_dir`` is empty the ``MATCHDID_OUTPUT_DIR`` environment
    variable applies, then ``./matchdid_out``.
    """

    pre_csv: str = ""
    post_csv: str = ""
    output_dir: str = ""
    outcome: str = "lpg_access"
    covariates: tuple[str, ...] = DEFAULT_COVARIATES
    expand_categoricals: bool = False
    link: str = "logit"
    caliper: float | None = None
    estimand: str = "atet"
    estimators: tuple[str, ...] = ("psm_did", "ipw", "aipw")
    trim: tuple[float, float] = (0.01, 0.99)
    gamma_start: float = 1.0
    gamma_stop: float = 2.0
    gamma_step: float = 0.1
    stratify_pairs: bool = False
    subgroup: tuple[tuple, ...] = ()
    group_field: str = "zone"
    min_group_size: int = 500
    density_bins: int = 20
    delimiter: str = ","
    seed: int = 0

    def __post_init__(self) -> None:
        if self.link not in LINKS:
            raise ConfigError(f"link must be one of {LINKS}, got {self.link!r}")
        if self.estimand not in ("ate", "atet"):
            raise ConfigError(f"estimand must be 'ate' or 'atet', got {self.estimand!r}")
        bad = [e for e in self.estimators if e not in _PIPELINE_ESTIMATORS]
        if bad:
            raise ConfigError(
                f"unknown estimators {bad}; choose from {list(_PIPELINE_ESTIMATORS)}"
            )
        valid_fields = set(COLUMNS) | set(DERIVED_COLUMNS)
        if self.outcome not in valid_fields:
            raise ConfigError(f"outcome {self.outcome!r} is not a schema column")
        for triple in self.subgroup:
            if len(triple) != 3:
                raise ConfigError(
                    f"subgroup predicates are (field, op, value) triples, got {triple!r}"
                )
        if self.min_group_size < 1:
            raise ConfigError("min_group_size must be positive")
        if self.density_bins < 2:
            raise ConfigError("density_bins must be at least 2")

    def resolved_output_dir(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        env = os.environ.get(ENV_OUTPUT_DIR, "")
        return Path(env) if env else Path("matchdid_out")

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: Mapping) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}; valid: {sorted(known)}")
        coerced = dict(raw)
        for key in ("covariates", "estimators"):
            if key in coerced and coerced[key] is not None:
                coerced[key] = tuple(coerced[key])
        if "trim" in coerced and coerced["trim"] is not None:
            coerced["trim"] = tuple(coerced["trim"])
        if "subgroup" in coerced and coerced["subgroup"] is not None:
            coerced["subgroup"] = tuple(tuple(t) for t in coerced["subgroup"])
        return cls(**coerced)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """A copy with the non-None overrides applied."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        if not clean:
            return self
        merged = asdict(self)
        merged.update(clean)
        return type(self).from_mapping(merged)


@dataclass
class _RunState:
    frames: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    supports: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    atts: dict = field(default_factory=dict)
    did: DidEstimate | None = None
    balance: dict = field(default_factory=dict)
    estimate_rows: list = field(default_factory=list)
    sensitivity: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)


@dataclass(frozen=True)
class PipelineResult:
    """What a run produced: per-stage status, artifact names, and the
    headline estimates for programmatic use."""

    output_dir: Path
    stages: tuple[tuple[str, str], ...]
    artifacts: tuple[str, ...]
    atts: Mapping[str, AttEstimate]
    did: DidEstimate | None
    estimate_rows: tuple[tuple, ...]


def _write_text(out: Path | None, state: _RunState, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")
    state.artifacts.append(name)


def _waves() -> tuple[str, str]:
    return (Wave.PRE.value, Wave.POST.value)


def _subframe(frame: AnalysisFrame, positions: np.ndarray) -> AnalysisFrame:
    df = frame.to_dataframe().iloc[positions]
    return AnalysisFrame.from_dataframe(df, frame.wave, validate=False)


def _stage_ingest(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    sources = {Wave.PRE.value: cfg.pre_csv, Wave.POST.value: cfg.post_csv}
    summary_rows = []
    for wave, path in sources.items():
        frame = load_frame(path, wave, delimiter=cfg.delimiter)
        prov = frame.provenance
        if cfg.subgroup:
            frame = filter_subgroup(frame, cfg.subgroup)
        st.frames[wave] = frame
        _write_text(
            out,
            st,
            f"rejects_{wave}.tsv",
            format_tsv(
                ["row", "field", "reason"],
                [(r.row, r.field, r.reason) for r in prov.rejections],
            ),
        )
        summary_rows.append(
            (wave, prov.n_read, prov.n_accepted, prov.n_rejected, len(frame))
        )
    _write_text(
        out,
        st,
        "ingest_summary.tsv",
        format_tsv(
            ["wave", "n_read", "n_accepted", "n_rejected", "n_after_subgroup"],
            summary_rows,
        ),
    )


def _stage_fit(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    spec = DesignSpec(
        covariates=tuple(cfg.covariates),
        expand_categoricals=cfg.expand_categoricals,
    )
    for wave in _waves():
        frame = st.frames[wave]
        model = fit_propensity(frame, spec, link=cfg.link)
        st.models[wave] = model
        st.scores[wave] = predict_propensity(model, frame)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            save_model(model, out / f"model_{wave}.json")
            st.artifacts.append(f"model_{wave}.json")
        _write_text(
            out,
            st,
            f"coefficients_{wave}.tsv",
            format_tsv(
                ["variable", "coefficient", "se", "p_value"],
                [
                    (r.name, r.estimate, r.std_error, r.p_value)
                    for r in coefficient_table(model)
                ],
            ),
        )


def _stage_match(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    support_rows = []
    for wave in _waves():
        frame = st.frames[wave]
        scores = st.scores[wave]
        tr = frame.treated()
        ids = frame.ids()
        sup = common_support(scores[tr], scores[~tr], ids[tr], ids[~tr])
        st.supports[wave] = sup
        sample = nn_match(
            ids[tr][sup.treated_mask],
            scores[tr][sup.treated_mask],
            ids[~tr][sup.control_mask],
            scores[~tr][sup.control_mask],
            caliper=cfg.caliper,
        )
        st.samples[wave] = sample
        support_rows.append(
            (
                wave,
                sup.lower,
                sup.upper,
                sup.n_treated_on,
                sup.n_treated_off,
                sup.n_control_on,
                sup.n_control_off,
            )
        )
        _write_text(
            out,
            st,
            f"pairs_{wave}.tsv",
            format_tsv(
                ["treated_id", "control_id", "distance"],
                zip(sample.treated_ids, sample.control_ids, sample.distances),
            ),
        )
    _write_text(
        out,
        st,
        "support.tsv",
        format_tsv(
            [
                "wave",
                "lower",
                "upper",
                "n_treated_on",
                "n_treated_off",
                "n_control_on",
                "n_control_off",
            ],
            support_rows,
        ),
    )


def _stage_balance(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    detail_rows = []
    summary_rows = []
    density_rows = []
    for wave in _waves():
        frame = st.frames[wave]
        model = st.models[wave]
        scores = st.scores[wave]
        sample = st.samples[wave]
        tr = frame.treated()
        all_pos = np.arange(len(frame))
        groups = {
            "before": (all_pos[tr], all_pos[~tr]),
            "after": (
                frame.positions_of(sample.treated_ids),
                frame.positions_of(sample.control_ids),
            ),
        }
        for phase, (tpos, cpos) in groups.items():
            rep = balance_report(
                _subframe(frame, tpos), _subframe(frame, cpos), model
            )
            st.balance[(wave, phase)] = rep
            for row in rep.rows:
                detail_rows.append(
                    (
                        wave,
                        phase,
                        row.covariate,
                        row.mean_treated,
                        row.mean_control,
                        row.pct_bias,
                        row.var_ratio,
                    )
                )
            summary_rows.append(
                (
                    wave,
                    phase,
                    rep.mean_abs_bias,
                    rep.max_abs_bias,
                    rep.rubin_b,
                    rep.rubin_r,
                    rep.rubin_b_ok,
                    rep.rubin_r_ok,
                )
            )
            span = (float(scores.min()), float(scores.max()))
            for label, pos in (("treated", tpos), ("control", cpos)):
                prof = density_profile(scores[pos], cfg.density_bins, span)
                for center, dens in zip(prof.bin_centers, prof.densities):
                    density_rows.append(
                        (wave, f"{label}_{phase}", float(center), float(dens))
                    )
    _write_text(
        out,
        st,
        "balance.tsv",
        format_tsv(
            [
                "wave",
                "phase",
                "variable",
                "treated_mean",
                "control_mean",
                "pct_bias",
                "var_ratio",
            ],
            detail_rows,
        ),
    )
    _write_text(
        out,
        st,
        "balance_summary.tsv",
        format_tsv(
            [
                "wave",
                "phase",
                "mean_abs_bias",
                "max_abs_bias",
                "rubin_b",
                "rubin_r",
                "rubin_b_ok",
                "rubin_r_ok",
            ],
            summary_rows,
        ),
    )
    _write_text(
        out,
        st,
        "density.tsv",
        format_tsv(["wave", "quadrant", "bin_center", "density"], density_rows),
    )


def _stage_estimate(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    rows = []
    for wave in _waves():
        est = att_matched(st.samples[wave], st.frames[wave], cfg.outcome)
        st.atts[wave] = est
        rows.append(
            (
                "psm",
                "atet",
                wave,
                est.att,
                est.se,
                est.t_stat,
                est.p_value,
                est.n_treated,
            )
        )
    did = did_of_att(st.atts[Wave.PRE.value], st.atts[Wave.POST.value])
    st.did = did
    if "psm_did" in cfg.estimators:
        rows.append(
            (
                "psm_did",
                "atet",
                "did",
                did.effect,
                did.se,
                did.t_stat,
                did.p_value,
                did.pre.n_treated + did.post.n_treated,
            )
        )
    for wave in _waves():
        frame = st.frames[wave]
        model = st.models[wave]
        if "ipw" in cfg.estimators:
            est = ipw(frame, model, cfg.outcome, estimand=cfg.estimand, trim=cfg.trim)
            rows.append(
                (
                    "ipw",
                    est.estimand,
                    wave,
                    est.value,
                    est.se,
                    est.t_stat,
                    est.p_value,
                    est.n_used,
                )
            )
        if "aipw" in cfg.estimators:
            est = aipw(
                frame, model, cfg.outcome, estimand=cfg.estimand, trim=cfg.trim
            )
            rows.append(
                (
                    "aipw",
                    est.estimand,
                    wave,
                    est.value,
                    est.se,
                    est.t_stat,
                    est.p_value,
                    est.n_used,
                )
            )
        if "regression" in cfg.estimators:
            est = regression_adjustment(frame, cfg.outcome, estimand=cfg.estimand)
            rows.append(
                (
                    "regression",
                    est.estimand,
                    wave,
                    est.value,
                    est.se,
                    est.t_stat,
                    est.p_value,
                    est.n_used,
                )
            )
        if "naive" in cfg.estimators:
            value, se = naive_difference(frame, cfg.outcome)
            t = value / se if se > 0 else float("nan")
            p = float(2 * _scipy_stats.norm.sf(abs(t))) if se > 0 else float("nan")
            rows.append(("naive", "raw_diff", wave, value, se, t, p, len(frame)))
    st.estimate_rows = rows
    _write_text(
        out,
        st,
        "estimates.tsv",
        format_tsv(
            ["estimator", "estimand", "wave", "value", "se", "t_stat", "p_value", "n"],
            rows,
        ),
    )


def _stage_sensitivity(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    grid = GammaGrid(cfg.gamma_start, cfg.gamma_stop, cfg.gamma_step)
    for wave in _waves():
        frame = st.frames[wave]
        sample = st.samples[wave]
        y = np.asarray(frame.column(cfg.outcome))
        y_t = y[frame.positions_of(sample.treated_ids)]
        y_c = y[frame.positions_of(sample.control_ids)]
        st.sensitivity[wave] = mh_bounds(
            y_t, y_c, grid, stratify_pairs=cfg.stratify_pairs
        )
    pre_rows = st.sensitivity[Wave.PRE.value]
    post_rows = st.sensitivity[Wave.POST.value]
    merged = [
        (
            a.gamma,
            a.q_plus,
            a.q_minus,
            a.p_plus,
            a.p_minus,
            b.q_plus,
            b.q_minus,
            b.p_plus,
            b.p_minus,
            a.degenerate,
            b.degenerate,
        )
        for a, b in zip(pre_rows, post_rows)
    ]
    _write_text(
        out,
        st,
        "sensitivity.tsv",
        format_tsv(
            [
                "gamma",
                "pre_q_plus",
                "pre_q_minus",
                "pre_p_plus",
                "pre_p_minus",
                "post_q_plus",
                "post_q_minus",
                "post_p_plus",
                "post_p_minus",
                "pre_degenerate",
                "post_degenerate",
            ],
            merged,
        ),
    )


def _wave_summary(st: _RunState, wave: str) -> dict:
    est = st.atts[wave]
    sup: SupportRegion = st.supports[wave]
    rep = st.balance[(wave, "after")]
    return {
        "treated_mean": est.mean_treated,
        "control_mean": est.mean_control,
        "att": est.att,
        "se": est.se,
        "on_support_treated": sup.n_treated_on,
        "on_support_untreated": sup.n_control_on,
        "mean_bias": rep.mean_abs_bias,
        "rubin_b": rep.rubin_b,
        "rubin_r": rep.rubin_r,
    }


def _stage_summary(cfg: PipelineConfig, st: _RunState, out: Path | None) -> None:
    text = summary_block(
        cfg.outcome,
        _wave_summary(st, Wave.PRE.value),
        _wave_summary(st, Wave.POST.value),
        st.did,
    )
    _write_text(out, st, "summary.txt", text)


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "fit": _stage_fit,
    "match": _stage_match,
    "balance": _stage_balance,
    "estimate": _stage_estimate,
    "sensitivity": _stage_sensitivity,
    "summary": _stage_summary,
}


def _write_manifest(out: Path | None, statuses: dict, st: _RunState) -> None:
    if out is None:
        return
    payload = {
        "stages": [{"name": s, "status": statuses[s]} for s in STAGES if s in statuses],
        "artifacts": sorted(st.artifacts),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_pipeline(
    config: PipelineConfig,
    through: str = "summary",
    write: bool = True,
) -> PipelineResult:
    """Run the pipeline up to and including stage ``through``.

    Artifact files land in the config's output directory (skipped entirely
    with ``write=False``). Raises :class:`StageError` on the first failing
    stage; ``manifest.json`` is written whenever at least one stage
    completed, marking completed/failed/pending stages.
    """
    if through not in STAGES:
        raise ConfigError(f"unknown stage {through!r}; stages are {list(STAGES)}")
    requested = STAGES[: STAGES.index(through) + 1]
    if "summary" in requested and "psm_did" not in config.estimators:
        raise ConfigError("the summary stage needs 'psm_did' among the estimators")
    out = config.resolved_output_dir() if write else None
    st = _RunState()
    statuses: dict[str, str] = {s: "pending" for s in requested}
    for stage in requested:
        try:
            log.info("stage %s", stage)
            _STAGE_FUNCS[stage](config, st, out)
            statuses[stage] = "completed"
        except Exception as exc:
            statuses[stage] = "failed"
            if any(v == "completed" for v in statuses.values()):
                _write_manifest(out, statuses, st)
            if isinstance(exc, StageError):
                raise
            raise StageError(stage, exc) from exc
    _write_manifest(out, statuses, st)
    if out is not None:
        st.artifacts.append("manifest.json")
    return PipelineResult(
        output_dir=out if out is not None else Path("."),
        stages=tuple((s, statuses[s]) for s in requested),
        artifacts=tuple(sorted(st.artifacts)),
        atts=dict(st.atts),
        did=st.did,
        estimate_rows=tuple(tuple(r) for r in st.estimate_rows),
    )


def write_clean_copies(config: PipelineConfig) -> tuple[str, str]:
    """Write validated (and subgroup-filtered) copies of both input files
    into the output directory; used by the ingest subcommand."""
    out = config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for wave, path in (
        (Wave.PRE.value, config.pre_csv),
        (Wave.POST.value, config.post_csv),
    ):
        frame = load_frame(path, wave, delimiter=config.delimiter)
        if config.subgroup:
            frame = filter_subgroup(frame, config.subgroup)
        name = f"clean_{wave}.csv"
        save_frame(frame, out / name)
        names.append(name)
    return tuple(names)


# -- subgroup sweep ------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    group: str
    att: float
    se: float
    diff_from_pooled: float | None
    diff_se: float | None
    p_value: float | None
    significance: str


@dataclass(frozen=True)
class SweepResult:
    field: str
    pooled: DidEstimate
    rows: tuple[SweepRow, ...]
    notices: tuple[str, ...]


def _nonconstant_covariates(
    covariates: tuple[str, ...], frames: Mapping[str, AnalysisFrame]
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Split covariates into (usable, constant-in-the-pooled-sample)."""
    kept, dropped = [], []
    for name in covariates:
        values = np.concatenate([f.column(name) for f in frames.values()])
        (dropped if (values == values[0]).all() else kept).append(name)
    return tuple(kept), tuple(dropped)


def _did_for_frames(
    cfg: PipelineConfig,
    frames: Mapping[str, AnalysisFrame],
    covariates: tuple[str, ...] | None = None,
) -> DidEstimate:
    spec = DesignSpec(
        covariates=tuple(covariates if covariates is not None else cfg.covariates),
        expand_categoricals=cfg.expand_categoricals,
    )
    atts: dict[str, AttEstimate] = {}
    for wave in _waves():
        frame = frames[wave]
        model = fit_propensity(frame, spec, link=cfg.link)
        scores = predict_propensity(model, frame)
        tr = frame.treated()
        ids = frame.ids()
        sup = common_support(scores[tr], scores[~tr], ids[tr], ids[~tr])
        sample = nn_match(
            ids[tr][sup.treated_mask],
            scores[tr][sup.treated_mask],
            ids[~tr][sup.control_mask],
            scores[~tr][sup.control_mask],
            caliper=cfg.caliper,
        )
        atts[wave] = att_matched(sample, frame, cfg.outcome)
    return did_of_att(atts[Wave.PRE.value], atts[Wave.POST.value])


def _group_values(frames: Mapping[str, AnalysisFrame], field_name: str):
    """Candidate group values plus notices about excluded codes."""
    notices = []
    if field_name == "zone":
        return [z.value for z in ZONE_ORDER], notices
    values = set()
    for frame in frames.values():
        values.update(np.unique(frame.column(field_name)).tolist())
    if field_name == "caste" and 8 in values:
        values.discard(8)
        notices.append(
            "caste code 8 (don't know) excluded from the caste sweep"
        )
    return sorted(values), notices


def subgroup_sweep(
    config: PipelineConfig,
    group_field: str | None = None,
    write: bool = True,
) -> SweepResult:
    """Per-group matched DiD effects with a difference-from-pooled test.

    Each group value of ``group_field`` gets its own full match-and-
    estimate run; the difference test compares the group effect against
    the pooled effect using sqrt(se_group^2 + se_pooled^2) (independent-
    variances form, conservative because the pooled sample contains the
    group). Groups with fewer than ``min_group_size`` rows in either wave
    are skipped with a notice; covariates that are constant within a group
    (for example the state code inside a single zone) are dropped from
    that group's model with a notice. Groups run on a thread pool; the
    output order is fixed regardless.
    """
    field_name = group_field or config.group_field
    valid_fields = set(COLUMNS) | set(DERIVED_COLUMNS)
    if field_name not in valid_fields:
        raise ConfigError(f"group field {field_name!r} is not a schema column")
    frames = {}
    for wave, path in (
        (Wave.PRE.value, config.pre_csv),
        (Wave.POST.value, config.post_csv),
    ):
        frame = load_frame(path, wave, delimiter=config.delimiter)
        if config.subgroup:
            frame = filter_subgroup(frame, config.subgroup)
        frames[wave] = frame
    pooled = _did_for_frames(config, frames)
    values, notices = _group_values(frames, field_name)
    rows = [
        SweepRow(
            group="(pooled)",
            att=pooled.effect,
            se=pooled.se,
            diff_from_pooled=None,
            diff_se=None,
            p_value=None,
            significance=stars(pooled.p_value),
        )
    ]
    def run_group(value) -> tuple[SweepRow | None, list[str]]:
        sub = {
            wave: filter_subgroup(frame, ((field_name, "==", value),))
            for wave, frame in frames.items()
        }
        sizes = {wave: len(f) for wave, f in sub.items()}
        if min(sizes.values()) < config.min_group_size:
            return None, [
                f"group {value!r} skipped: {sizes[Wave.PRE.value]} pre / "
                f"{sizes[Wave.POST.value]} post rows, below the minimum "
                f"group size {config.min_group_size}"
            ]
        group_notes = []
        kept, dropped = _nonconstant_covariates(tuple(config.covariates), sub)
        for name in dropped:
            group_notes.append(
                f"group {value!r}: covariate {name!r} is constant within "
                "the group and was dropped from its model"
            )
        did = _did_for_frames(config, sub, covariates=kept)
        diff = did.effect - pooled.effect
        diff_se = float(np.sqrt(did.se**2 + pooled.se**2))
        if diff_se > 0 and np.isfinite(diff_se):
            p = float(2 * _scipy_stats.norm.sf(abs(diff) / diff_se))
        else:
            p = float("nan")
        row = SweepRow(
            group=str(value),
            att=did.effect,
            se=did.se,
            diff_from_pooled=diff,
            diff_se=diff_se,
            p_value=p,
            significance=stars(p),
        )
        return row, group_notes

    with ThreadPoolExecutor(max_workers=min(8, max(1, len(values)))) as pool:
        outcomes = list(pool.map(run_group, values))
    for row, group_notes in outcomes:
        notices.extend(group_notes)
        if row is not None:
            rows.append(row)
    result = SweepResult(
        field=field_name, pooled=pooled, rows=tuple(rows), notices=tuple(notices)
    )
    if write:
        out = config.resolved_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.tsv").write_text(
            format_tsv(
                [
                    "group",
                    "att",
                    "se",
                    "diff_from_pooled",
                    "diff_se",
                    "p_value",
                    "significance",
                ],
                [
                    (
                        r.group,
                        r.att,
                        r.se,
                        r.diff_from_pooled,
                        r.diff_se,
                        r.p_value,
                        r.significance,
                    )
                    for r in rows
                ],
            ),
            encoding="utf-8",
        )
        (out / "sweep_notices.txt").write_text(
            "".join(f"{n}\n" for n in result.notices) or "none\n",
            encoding="utf-8",
        )
    for notice in result.notices:
        log.info("%s", notice)
    return result
