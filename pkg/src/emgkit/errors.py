"""Exception hierarchy shared by every pipeline stage."""


class EmgkitError(Exception):
    """Base class for all errors raised by emgkit."""


class FormatError(EmgkitError, ValueError):
    """A file does not follow the expected layout."""


class ParseError(FormatError):
    """A cell could not be parsed as a number."""


class InvariantError(EmgkitError, ValueError):
    """A value violates a data-model invariant."""


class ParameterError(EmgkitError, ValueError):
    """A function argument is outside its admissible range."""


class LengthError(EmgkitError, ValueError):
    """A signal is too short for the requested operation."""


class ConfigError(EmgkitError, ValueError):
    """Configuration is invalid. ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConvergenceError(EmgkitError, RuntimeError):
    """An iterative solver hit its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(EmgkitError, RuntimeError):
    """Training produced a non-finite loss."""
