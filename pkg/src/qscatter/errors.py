"""Exception types shared across the package."""


class QScatterError(Exception):
    """Base class for all package errors."""


class InfeasibleSourceError(QScatterError, ValueError):
    """A requested source (Fano factor, photon number) cannot be realized."""


class UndefinedCorrelationError(QScatterError, ZeroDivisionError):
    """A normalized correlation has a vanishing denominator."""


class TruncationError(QScatterError, RuntimeError):
    """Fock-space truncation leaks too much probability; increase the cutoff."""


class ConfigError(QScatterError, ValueError):
    """A scenario configuration could not be parsed or validated."""
