"""Exception types shared by the lab modules."""


class FptLabError(Exception):
    """Base class for every error raised by fptlab."""


class InputError(FptLabError, ValueError):
    """Invalid argument: wrong dimension, out-of-range parameter, empty input."""


class MappingError(FptLabError, RuntimeError):
    """A mapping produced a point outside its body."""


class PreconditionError(FptLabError):
    """An operation's attested precondition is missing or does not match."""
