from typing import Optional


# --- Custom Exceptions ---
class CsscError(Exception):
    """Base exception class for configurator and harness errors."""
    pass


class SpaceError(CsscError):
    """Base class for parameter-space problems."""
    pass


class PcsSyntaxError(SpaceError):
    """Raised for malformed PCS text; carries the offending line number."""
    def __init__(self, message: str, line: Optional[int] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line


class SpaceValidationError(SpaceError):
    """Raised when a space violates its structural invariants."""
    pass


class SpaceTooConstrainedError(SpaceError):
    """Raised when rejection sampling cannot find a non-forbidden configuration."""
    pass


class SpaceTooLargeError(SpaceError):
    """Raised when a space is too large to enumerate exhaustively."""
    pass


class UnsupportedSpaceError(SpaceError):
    """Raised when a configurator cannot handle a space's conditional structure."""
    pass


class ScenarioError(CsscError):
    """Raised for missing keys, unreadable files or inconsistent instance sets."""
    pass


class RunnerError(CsscError):
    """Raised for framework-side execution failures (e.g. wrapper binary missing)."""
    pass


class BudgetExhausted(CsscError):
    """Raised inside configurator loops when the configuration budget is used up."""
    pass


class InsufficientRunsError(CsscError):
    """Raised when a cost estimate asks for more runs than the ledger holds."""
    pass


class InsufficientDataError(CsscError):
    """Raised when a performance model cannot be fit on the available data."""
    pass


class ScoringError(CsscError):
    """Raised for empty aggregates or rankings over mismatched instance sets."""
    pass


class AnalysisError(CsscError):
    """Raised when a post-hoc statistic is undefined for its input."""
    pass


class UndefinedSpeedupError(AnalysisError):
    """Raised when neither configuration solved any instance."""
    pass


class CampaignError(CsscError):
    """Raised for invalid campaign plans or report merges."""
    pass
