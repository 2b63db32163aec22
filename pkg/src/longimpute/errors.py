"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers that only care
about "bad input" can catch that. Numerical failures derive from
:class:`NumericalError`; the CLI maps the two families to different exit codes.
"""


class LongImputeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LongImputeError, ValueError):
    """Input rejected before any computation."""


class DimensionError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class DataError(ValidationError):
    pass


class ConfigurationError(ValidationError):
    pass


class ContractError(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class NumericalError(LongImputeError, ArithmeticError):
    """The computation itself broke down (rank loss, singular systems)."""


class DegeneracyError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass
