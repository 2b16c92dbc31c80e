"""Exception types raised across the package.

Each error carries an ``exit_code`` so the command line front-end can map
failures to its documented exit statuses without a lookup table.
"""


class FVMDError(Exception):
    exit_code = 2


class NoFrames(FVMDError, ValueError):
    pass


class InconsistentFrames(FVMDError, ValueError):
    pass


class DecodeError(FVMDError, ValueError):
    pass


class TooShort(FVMDError, ValueError):
    exit_code = 4


class BadGrid(FVMDError, ValueError):
    pass


class FormatError(FVMDError, ValueError):
    pass


class CorruptTrajectories(FVMDError, ValueError):
    pass


class WriteError(FVMDError, OSError):
    pass


class KindError(FVMDError, ValueError):
    pass


class BadVolumeSpec(FVMDError, ValueError):
    pass


class TooFewSamples(FVMDError, ValueError):
    exit_code = 4


class DimensionMismatch(FVMDError, ValueError):
    exit_code = 3


class NotSymmetric(FVMDError, ValueError):
    pass


class NotEnoughVideos(FVMDError, ValueError):
    exit_code = 4


class NumericalWarning(RuntimeWarning):
    """Emitted when a Frechet distance needed a suspiciously large clamp."""
