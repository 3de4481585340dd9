"""Exception hierarchy shared by all pipeline stages."""


class SzpredError(Exception):
    """Base class for package errors."""

    #: process exit code used by the command line driver
    exit_code = 2


class ValidationError(SzpredError, ValueError):
    """Input violates a documented precondition."""


class ShapeError(ValidationError):
    """Array dimensions disagree with the configured geometry."""


class NumericalError(SzpredError, ArithmeticError):
    """Optimisation diverged or produced non-finite values."""

    exit_code = 3


class ContainerError(SzpredError):
    """Malformed EEG container or tensor cache file."""

    code = "container"


class FormatError(ContainerError):
    code = "bad_magic"


class VersionError(ContainerError):
    code = "bad_version"


class TruncationError(ContainerError):
    code = "truncated"


class ChannelCountError(ContainerError):
    code = "channel_count"


class CheckpointError(SzpredError):
    code = "checkpoint"


class CheckpointIntegrityError(CheckpointError):
    code = "integrity"


class CheckpointVersionError(CheckpointError):
    code = "version"


class ArchitectureMismatchError(CheckpointError):
    code = "architecture"


class LeakageError(SzpredError):
    """Held-out data reached training or its standardisation statistics."""
