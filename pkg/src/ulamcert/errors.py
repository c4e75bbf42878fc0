"""Exception hierarchy shared by every stage of the pipeline."""


class UlamCertError(Exception):
    """Base class for all errors raised by ulamcert."""


class DomainError(UlamCertError, ValueError):
    """An operation was applied outside the domain where it is defined."""


class NonSmoothError(UlamCertError):
    """A derivative was requested across a kink (abs) or a fractional power at 0."""


class ParseError(UlamCertError, ValueError):
    """Malformed expression text.  ``position`` is 1-based."""

    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class ConfigError(UlamCertError, ValueError):
    pass


class NotExpandingError(UlamCertError):
    pass


class ExpansionTooWeak(UlamCertError):
    pass


class PrecisionError(UlamCertError):
    """Enclosures became too wide to separate quantities that must be separated."""


class EmptyPreimage(UlamCertError):
    """The target misses the image of the branch; not a failure."""


class AssemblyError(UlamCertError):
    """Internal consistency check failed while assembling the Ulam matrix."""


class NoContraction(UlamCertError):
    def __init__(self, message, best_n, best_lambda2, trace=()):
        self.best_n = best_n
        self.best_lambda2 = best_lambda2
        self.trace = tuple(trace)
        super().__init__(f"{message} (best n={best_n}, lambda2<={best_lambda2:.6g})")
