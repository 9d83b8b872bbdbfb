"""Exception types shared across the laboratory."""


class BmolabError(Exception):
    """Base class for all package-specific failures."""


class NonFiniteError(BmolabError):
    """A matrix power or norm hit a non-finite or non-positive eigenvalue."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class ResolutionExceededError(BmolabError):
    """Rectangle subdivision descended below the cell level."""


class TooLargeError(BmolabError):
    """Rectangle side exceeds the limit for a 6x covering to fit on the torus."""


class EmptyRegionError(BmolabError):
    """An averaging region contains no cells."""


class WrongExponentError(BmolabError):
    """An operation restricted to a specific Lebesgue exponent got another one."""


class NoConvergenceError(BmolabError):
    """An iterative solver exhausted its iteration budget."""


class ModeError(BmolabError):
    """A reducing-operator mode is unavailable for the requested parameters."""


class FormatError(BmolabError):
    """A serialized field file is malformed; carries the failing byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ConfigError(BmolabError):
    """An experiment configuration failed schema validation."""

    def __init__(self, message, path=""):
        super().__init__(f"{message}" + (f" (at {path})" if path else ""))
        self.path = path
