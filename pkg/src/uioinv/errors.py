"""Exception hierarchy shared by the whole package."""


class UioInvError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"


class DimensionError(UioInvError, ValueError):
    kind = "dimension"


class UnsupportedSystemError(UioInvError):
    """Non-square systems, MIMO input to SISO-only routines, and similar."""

    kind = "unsupported-system"


class NonMinimalError(UioInvError):
    kind = "non-minimal"


class NormUndefinedError(UioInvError):
    """A pole sits on the unit circle, so the H-infinity norm is infinite."""

    kind = "norm-undefined"


class UnitCircleZeroError(UioInvError):
    """The core pipeline was handed a system with zeros on the unit circle."""

    kind = "unit-circle-zero"


class AllNmpError(UioInvError):
    """No stable target eigenvalue is left to build observer rows from."""

    kind = "all-nmp"


class DegenerateZerosError(UioInvError):
    """Observer rank n - beta could not be reached (e.g. repeated MP zeros)."""

    kind = "degenerate-zeros"


class RankLossError(UioInvError):
    kind = "rank-loss"


class NotReconstructibleError(UioInvError):
    """Both B1 and D are column-rank deficient."""

    kind = "not-reconstructible"


class SingularZeroDynamicsError(UioInvError):
    kind = "singular-zero-dynamics"


class InsufficientDataError(UioInvError):
    kind = "insufficient-data"


class AlignmentError(UioInvError):
    kind = "alignment"


class PreviewExhaustedError(UioInvError):
    kind = "preview-exhausted"


class InvalidControllerError(UioInvError):
    kind = "invalid-controller"


class ImproperFilterError(UioInvError):
    kind = "improper-filter"


class NotMinimumPhaseFactorError(UioInvError):
    kind = "not-mp-factor"


class ConfigError(UioInvError):
    kind = "config"
