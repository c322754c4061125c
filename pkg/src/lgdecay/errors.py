"""Exception hierarchy shared by all lgdecay modules."""

from __future__ import annotations


class LGDecayError(Exception):
    """Base class for every error raised by lgdecay."""


class DomainError(LGDecayError, ValueError):
    """An argument lies outside the domain of the operation (negative time, unordered times, ...)."""


class ConfigurationError(LGDecayError, ValueError):
    """Invalid parameter set for a model or a run.

    ``key`` names the offending parameter when one can be identified.
    """

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class ConfigParseError(ConfigurationError):
    """Malformed configuration document."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class InvalidOntologyError(LGDecayError, ValueError):
    """The requested ontology cannot be applied to the model at the given times."""


class FitError(LGDecayError, ArithmeticError):
    """Log-linear fitting impossible (p <= 0 inside the window, degenerate data)."""


class NumericalFailure(LGDecayError, ArithmeticError):
    """An adaptive numerical scheme did not converge.

    ``error_estimate`` holds the best error estimate reached before giving up.
    """

    def __init__(self, message: str, error_estimate: float = float("nan")):
        self.error_estimate = error_estimate
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3g})")


class HorizonError(LGDecayError, ArithmeticError):
    """Inverse sampling target lies below the survival reachable on the search horizon."""

    def __init__(self, message: str, t_max: float):
        self.t_max = t_max
        super().__init__(f"{message} (search horizon t_max={t_max!r})")
