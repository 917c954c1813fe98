"""Exception hierarchy shared by the library and the CLI."""


class NlcorrError(Exception):
    """Base class for all library errors."""


class ValidationError(NlcorrError, ValueError):
    """Bad input: wrong shape, non-Hermitian operator, invalid config field."""


class NumericalError(NlcorrError, ArithmeticError):
    """A numerical assertion failed (norm drift, imaginary residue, probability out of range)."""


class UndefinedConditionalError(NlcorrError, ZeroDivisionError):
    """Conditioning on an outcome whose probability vanishes."""
