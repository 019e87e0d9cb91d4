"""Exception types shared across the simulator."""


class FogniteError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigurationError(FogniteError, ValueError):
    """A config value (or combination of values) is invalid.

    Carries a list of human-readable messages so callers can report every
    problem in one pass instead of failing on the first.
    """

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = problems
        super().__init__("; ".join(problems))


class InvalidInputError(FogniteError, ValueError):
    """An operation received data that violates its preconditions."""


class ShapeError(FogniteError, ValueError):
    """Tensor shapes do not line up."""


class ProtocolError(FogniteError, RuntimeError):
    """The federated exchange received an incompatible or malformed payload."""


class UsageError(FogniteError, RuntimeError):
    """An API was called out of order (e.g. backward without a forward cache)."""
