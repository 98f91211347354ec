"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented categories: 1 usage, 2 data, 3 numerical.
"""


class V3SError(Exception):
    exit_code = 2
    category = "data"


class UsageError(V3SError):
    exit_code = 1
    category = "usage"


class ConfigError(UsageError, ValueError):
    pass


class DataError(V3SError):
    pass


class NumericalError(V3SError):
    exit_code = 3
    category = "numerical"


# geometry
class SingularSystem(NumericalError):
    pass


class DegenerateQuad(SingularSystem, ValueError):
    pass


class DegenerateDenominator(NumericalError):
    pass


# warp / spec validation
class InvalidFactor(DataError, ValueError):
    pass


class InvalidCrop(DataError, ValueError):
    pass


# temporal / pretext
class ClipTooShort(DataError):
    def __init__(self, message, video_id=None):
        if video_id is not None:
            message = f"{message} (video {video_id})"
        super().__init__(message)
        self.video_id = video_id


class ExhaustedRetries(DataError):
    pass


# synthgen
class ObjectOutOfBounds(DataError, ValueError):
    pass


class NoObject(DataError):
    pass


class MultipleObjects(DataError):
    pass


# probe / evalkit
class DimensionMismatch(DataError, ValueError):
    pass


class CatalogMismatch(DataError):
    pass


class ZeroVector(NumericalError, ValueError):
    pass


class EmptyGallery(DataError, ValueError):
    pass


class GradientCheckFailed(NumericalError):
    pass


# file formats
class ClipFormatError(DataError):
    pass


class BadMagic(ClipFormatError):
    pass


class UnsupportedVersion(ClipFormatError):
    pass


class TruncatedFile(ClipFormatError):
    def __init__(self, expected, actual, path=None):
        where = f" in {path}" if path is not None else ""
        super().__init__(f"truncated payload{where}: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class OutOfRangeSample(ClipFormatError, ValueError):
    pass
