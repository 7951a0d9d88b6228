"""Exception types shared across the package."""


class FlexError(Exception):
    """Base class for all flexdse errors."""


class ParseError(FlexError, ValueError):
    """A model/accelerator/experiment file could not be parsed."""


class ValidationError(FlexError, ValueError):
    """Input parsed but violates a schema or domain invariant."""


class ConsistencyError(ValidationError):
    """Flexibility class bits disagree with the declared constraints or baseline."""


class SpaceTooLarge(FlexError, RuntimeError):
    pass


class InfeasibleSpace(FlexError, RuntimeError):
    pass


class GuardExceeded(FlexError, RuntimeError):
    pass
