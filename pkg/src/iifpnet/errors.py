"""Exception hierarchy shared by every module."""


class IIFPError(Exception):
    """Base class for all package errors."""


class ContractError(IIFPError, ValueError):
    """An operation was called with arguments violating its preconditions."""


class ConfigError(IIFPError, ValueError):
    """A configuration value lies outside its admissible domain."""


class ParseError(IIFPError, ValueError):
    """A model file, CSV or report could not be parsed.

    ``location`` names the offending field, row or column when known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class CertificateUnavailable(IIFPError):
    """No passivity certificate exists for the given weights.

    Raised when an extracted index is non-positive; ``layers`` lists the
    offending 1-based layer indices.
    """

    def __init__(self, message, layers=()):
        self.layers = list(layers)
        super().__init__(message)


class UnsupportedDepth(ContractError):
    """The cascade has too few layers for the stability argument (needs N > 2)."""


class InvalidBoundParameters(IIFPError, ValueError):
    """Design parameters make the bound denominator non-positive."""
