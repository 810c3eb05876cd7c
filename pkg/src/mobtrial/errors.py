"""Exception types shared across the package.

Every error raised on a contract violation derives from MobtrialError so
callers (service layer, CLI) can map them to exit codes in one place.
"""

from __future__ import annotations


class MobtrialError(Exception):
    """Base class for all package errors."""


class ConfigError(MobtrialError):
    """A configuration value violates its documented invariant."""


class UnknownColumn(MobtrialError):
    """A referenced column is absent from the schema or the file."""


class ParseError(MobtrialError):
    """A cell could not be parsed under its declared column kind."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyTable(MobtrialError):
    """A table with zero data rows where at least one is required."""


class DegenerateScale(MobtrialError):
    """A continuous scale cannot be fitted (zero variance or too few values)."""


class AllMissingColumn(MobtrialError):
    """A column scheduled for imputation has no observed values at all."""


class EmptyTrainingSet(MobtrialError):
    """A forest was asked to fit on zero rows."""


class RankDeficient(MobtrialError):
    """The regression design has rank < 3 or no residual degrees of freedom."""


class NoFeasibleSplit(MobtrialError):
    """No cutpoint satisfies the minimum child size on the selected variable."""


class MissingSplitValue(MobtrialError):
    """A row routed through the tree is missing a value needed by a split."""


class SingleArmLeaf(MobtrialError):
    """An effect size was requested where one arm has fewer than 2 rows."""


class ZeroVariance(MobtrialError):
    """Observed outcomes are constant; R^2 is undefined."""


class EmptySelection(MobtrialError):
    """Moderator preselection retained nothing."""


class StageError(MobtrialError):
    """A pipeline stage failed; wraps the underlying cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
