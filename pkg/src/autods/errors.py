"""Exception hierarchy shared across the pipeline stages."""


class AutodsError(Exception):
    """Base class for all package errors."""


class ConfigError(AutodsError):
    """Invalid pipeline or stage configuration."""


class DataError(AutodsError):
    """Malformed input data (CSV parse errors, schema violations)."""


class StatsError(AutodsError):
    """A statistical routine was called outside its contract."""


class InsufficientDataError(StatsError):
    """Too few usable observations for the requested test."""


class DegenerateTableError(StatsError):
    """Contingency table with a zero marginal row or column."""


class DomainError(StatsError):
    """Argument outside the mathematical domain of a routine."""


class DslError(AutodsError):
    """Hypothesis document failed validation.

    Carries every violation found, not just the first, so a proposer can
    repair the document in one round.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class TransportError(AutodsError):
    """LLM endpoint unreachable or returned a malformed payload."""


class BudgetExceededError(AutodsError):
    """An LLM budget limit would be exceeded by the next call."""


class StageError(AutodsError):
    """A pipeline stage failed; carries the stage name for the ledger."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}' failed: {message}")
