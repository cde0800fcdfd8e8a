"""Exception hierarchy shared across the package."""


class MatchDidError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(MatchDidError):
    """Input table does not provide the documented columns."""


class SchemaMismatchError(SchemaError):
    """More than half of the rows failed validation; the file is presumed
    to not follow the documented schema."""


class UnmappedStateError(MatchDidError):
    """A state code has no zone assignment in the active zone table."""


class RankDeficiencyError(MatchDidError):
    """Design matrix is rank deficient."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(
            f"design matrix is rank deficient: column {column!r} is a linear "
            "combination of the columns before it"
        )


class SeparationError(MatchDidError):
    """The likelihood is monotone (perfect or quasi-perfect separation);
    maximum-likelihood coefficients do not exist."""


class IterationLimitError(MatchDidError):
    """The optimizer hit its iteration cap before converging."""


class NotFittedError(MatchDidError):
    """A model was used before ``fit`` was called."""


class DisjointSupportError(MatchDidError):
    """Treated and control score ranges do not overlap."""


class EmptyGroupError(MatchDidError):
    """An operation that needs both treated and control observations was
    given an empty group."""


class EstimationError(MatchDidError):
    """A treatment-effect estimator could not be evaluated."""


class SpecValidationError(MatchDidError):
    """A synthetic-data specification failed validation."""


class ReplicationError(MatchDidError):
    """A Monte Carlo replication failed."""

    def __init__(self, replication: int, seed: int, cause: Exception):
        self.replication = replication
        self.seed = seed
        self.cause = cause
        super().__init__(
            f"replication {replication} (seed {seed}) failed: {cause}"
        )


class ConfigError(MatchDidError):
    """A pipeline configuration file or override is invalid."""


class StageError(MatchDidError):
    """A pipeline stage failed; carries the stage name for reporting."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
