"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage 2, resource 3, failed certificate 1.
"""


class IsocompError(Exception):
    exit_code = 1


class UsageError(IsocompError, ValueError):
    """Bad arguments: wrong group family, p < 1, malformed descriptor..."""

    exit_code = 2


class ResourceError(IsocompError, RuntimeError):
    """An enumeration budget or a ball radius is too small for the request."""

    exit_code = 3


class PrecisionError(ResourceError):
    """Evaluation would need function values outside the enumerated ball."""


class CertificateError(IsocompError, AssertionError):
    """An internal invariant of a certificate failed to hold."""

    exit_code = 1

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(msg)
