"""Exception types raised by the orchestration pipeline."""


class OrchestrationError(Exception):
    """Base class for all package errors."""


class UnknownModeError(OrchestrationError, KeyError):
    """An application id or mode level does not exist in the instance."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown mode"


class InvalidRequestError(OrchestrationError, ValueError):
    """A solve request references unknown apps or an out-of-range capacity."""


class SearchSpaceError(OrchestrationError):
    """The exhaustive oracle refused an instance larger than its guard."""


class GenerationError(OrchestrationError):
    """Random generation could not reach its target within the retry budget."""


class ScenarioMismatchError(OrchestrationError, ValueError):
    """Scenario, instance or metric logs do not belong together."""
