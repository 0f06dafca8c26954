from typing import Any, Optional


class DeePCError(Exception):
    """Base class for all toolkit errors"""


class DimensionError(DeePCError, ValueError):
    """Vector or matrix dimensions do not agree"""


class UnobservableSystemError(DeePCError):
    """No lag <= n makes the observability matrix full rank"""


class RankDeficiencyError(DeePCError):
    """A linear system that must be nonsingular is not"""

    def __init__(self, message: str, block: str = ""):
        super().__init__(message)
        self.block = block


class IntegrationDivergedError(DeePCError):
    """Plant state became non-finite"""


class NotWarmedUpError(DeePCError):
    """A controller was stepped before its history was filled"""


class SolverFailure(DeePCError):
    """The QP solver did not return a solved status"""

    def __init__(self, message: str, status: str = ""):
        super().__init__(message)
        self.status = status


class ExcitationError(DeePCError):
    """Collected input data is not persistently exciting"""


class ScenarioFileError(DeePCError, ValueError):
    """Scenario file could not be parsed or validated"""


class ScenarioAbortedError(DeePCError):
    """A scenario run stopped early; the partial record is attached"""

    def __init__(self, message: str, record: Optional[Any] = None, context: Optional[dict] = None):
        super().__init__(message)
        self.record = record
        self.context = context or {}
