"""Exception hierarchy. CLI exit codes key off these classes."""


class OrBloomError(Exception):
    """Base class for all package errors."""


class ParameterError(OrBloomError, ValueError):
    """A parameter is outside its admissible domain."""


class DomainError(ParameterError):
    """A real-valued argument is outside the domain of a formula."""


class DimensionError(OrBloomError, ValueError):
    """Arrays of different lengths were combined."""


class ResourceError(OrBloomError, RuntimeError):
    """A computation would exceed its size guard."""


class PersistenceError(OrBloomError, OSError):
    """Reading or writing result files failed."""
