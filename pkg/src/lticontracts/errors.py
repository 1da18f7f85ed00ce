"""Exception hierarchy shared by all modules."""


class InputError(ValueError):
    """Malformed or dimensionally inconsistent user input."""


class PreconditionError(ValueError):
    """An operation was called outside its domain of validity."""


class EngineError(RuntimeError):
    """A numerical back end failed to produce a trustworthy answer."""


class ProjectionLimitError(EngineError):
    """Fourier-Motzkin elimination exceeded its row budget."""
