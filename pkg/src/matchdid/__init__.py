"""matchdid: propensity-score matching, difference-in-differences, and
doubly-robust estimation for two-wave binary-outcome survey data.

The pieces compose in pipeline order: load and validate microdata
(:mod:`~matchdid.frames`), fit the treatment equation
(:mod:`~matchdid.glm`), trim to common support and match
(:mod:`~matchdid.matching`), estimate effects (:mod:`~matchdid.effects`),
probe hidden bias (:mod:`~matchdid.sensitivity`), and score everything
against synthetic ground truth (:mod:`~matchdid.synthetic`). The
:mod:`~matchdid.pipeline` module wires the stages together behind a JSON
config, exposed by the ``matchdid`` command-line tool.
"""

from .effects import (
    AIPWEstimator,
    AttEstimate,
    DidEstimate,
    IPWEstimator,
    WeightedEstimate,
    aipw,
    att_matched,
    did_of_att,
    fit_outcome_models,
    ipw,
    paired_att,
    regression_adjustment,
)
from .errors import (
    ConfigError,
    DisjointSupportError,
    EmptyGroupError,
    EstimationError,
    IterationLimitError,
    MatchDidError,
    NotFittedError,
    RankDeficiencyError,
    ReplicationError,
    SchemaError,
    SchemaMismatchError,
    SeparationError,
    SpecValidationError,
    StageError,
    UnmappedStateError,
)
from .frames import (
    AnalysisFrame,
    ObservationRecord,
    Wave,
    filter_subgroup,
    load_frame,
    proportion_table,
    save_frame,
)
from .glm import (
    DesignSpec,
    PropensityModel,
    coefficient_table,
    fit_propensity,
    load_model,
    predict_propensity,
    save_model,
)
from .matching import (
    BalanceReport,
    MatchedSample,
    NearestNeighborMatcher,
    SupportRegion,
    balance_report,
    common_support,
    density_profile,
    nn_match,
    standardized_bias,
)
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    run_pipeline,
    subgroup_sweep,
)
from .sensitivity import (
    GammaGrid,
    MhBoundRow,
    extended_hypergeometric_moments,
    mh_bounds,
    mh_bounds_from_counts,
)
from .synthetic import (
    CovariateSpec,
    MonteCarloReport,
    SyntheticSpec,
    benchmark,
    generate,
    monte_carlo,
)
from .zones import Zone, ZoneMap, default_zone_map, zone_of

__version__ = "0.1.0"

__all__ = [
    "AIPWEstimator",
    "AnalysisFrame",
    "AttEstimate",
    "BalanceReport",
    "ConfigError",
    "CovariateSpec",
    "DesignSpec",
    "DidEstimate",
    "DisjointSupportError",
    "EmptyGroupError",
    "EstimationError",
    "GammaGrid",
    "IPWEstimator",
    "IterationLimitError",
    "MatchDidError",
    "MatchedSample",
    "MhBoundRow",
    "MonteCarloReport",
    "NearestNeighborMatcher",
    "NotFittedError",
    "ObservationRecord",
    "PipelineConfig",
    "PipelineResult",
    "PropensityModel",
    "RankDeficiencyError",
    "ReplicationError",
    "SchemaError",
    "SchemaMismatchError",
    "SeparationError",
    "SpecValidationError",
    "StageError",
    "SupportRegion",
    "SyntheticSpec",
    "UnmappedStateError",
    "Wave",
    "Zone",
    "ZoneMap",
    "aipw",
    "att_matched",
    "balance_report",
    "benchmark",
    "coefficient_table",
    "common_support",
    "default_zone_map",
    "density_profile",
    "did_of_att",
    "filter_subgroup",
    "fit_outcome_models",
    "fit_propensity",
    "generate",
    "ipw",
    "load_frame",
    "load_model",
    "mh_bounds",
    "mh_bounds_from_counts",
    "monte_carlo",
    "nn_match",
    "paired_att",
    "predict_propensity",
    "proportion_table",
    "regression_adjustment",
    "run_pipeline",
    "save_frame",
    "save_model",
    "standardized_bias",
    "subgroup_sweep",
    "extended_hypergeometric_moments",
    "zone_of",
    "__version__",
]
