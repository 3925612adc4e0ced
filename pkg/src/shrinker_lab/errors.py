"""Exception hierarchy shared by all modules.

Every error carries a short machine name so the CLI can report which module
failed without parsing messages.
"""


class ShrinkerLabError(Exception):
    """Base class; ``name`` is the stable identifier printed by the CLI."""

    name = "module-error"


class InvalidGridError(ShrinkerLabError):
    name = "invalid-grid"


class InvalidArgumentError(ShrinkerLabError, ValueError):
    name = "invalid-argument"


class GraphOutOfReachError(ShrinkerLabError):
    name = "graph-out-of-reach"

    def __init__(self, message, last_valid=None):
        super().__init__(message)
        self.last_valid = last_valid


class NotConicalError(ShrinkerLabError):
    name = "not-conical"


class NoRootError(ShrinkerLabError):
    name = "no-root"


class IntegrationFailureError(ShrinkerLabError):
    name = "integration-failure"


class OrderUnavailableError(ShrinkerLabError):
    name = "order-unavailable"


class InsufficientDomainError(ShrinkerLabError):
    name = "insufficient-domain"


class AmbiguousKernelError(ShrinkerLabError):
    name = "ambiguous-kernel"


class SolvabilityError(ShrinkerLabError):
    name = "solvability-violation"


class InsufficientSignalError(ShrinkerLabError):
    name = "insufficient-signal"


class HypothesisViolationError(ShrinkerLabError):
    name = "hypothesis-violation"

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = tuple(failed)


class FilteringFailureError(ShrinkerLabError):
    name = "filtering-failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SchemaError(ShrinkerLabError):
    name = "schema-error"


class UsageError(ShrinkerLabError):
    name = "usage-error"
