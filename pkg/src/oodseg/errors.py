"""Exception types shared across the package."""


class OodsegError(Exception):
    """Base class for all errors raised by this package."""


# --- tensor / mask I/O ---

class MissingFile(OodsegError):
    pass


class MalformedHeader(OodsegError):
    """Container is not the supported NPY subset (bad magic, version, rank, order, truncation)."""


class UnsupportedDtype(OodsegError):
    """Anything but little-endian float32 payloads."""


class NonFiniteValue(OodsegError):
    """NaN or Inf encountered where finite values are required."""


class IoFailure(OodsegError):
    pass


class MalformedPgm(OodsegError):
    pass


class IllegalLabelValue(OodsegError):
    """Mask byte outside {0, 1, 255}."""


# --- clustering ---

class TooFewPoints(OodsegError):
    """Requested more clusters than there are points."""


class DimensionMismatch(OodsegError):
    pass


# --- upsampling ---

class BadTarget(OodsegError):
    """Upsample target smaller than the source grid."""


# --- evaluation ---

class NoPositives(OodsegError):
    pass


class NoNegatives(OodsegError):
    pass


class EmptyDataset(OodsegError):
    pass


class IncompleteSample(OodsegError):
    """A sample directory entry is missing one of its companion files."""
