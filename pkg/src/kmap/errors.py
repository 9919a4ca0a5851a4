"""Exception types raised across the package."""


class KmapError(Exception):
    """Base class for every error raised by kmap."""


class EmptyInput(KmapError, ValueError):
    pass


class UnknownEstimator(KmapError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown estimator"


class InvalidLength(KmapError, ValueError):
    pass


class InvalidConfig(KmapError, ValueError):
    pass


class ModelMismatch(KmapError, ValueError):
    pass


class InsufficientSamples(KmapError, ValueError):
    pass


class DegenerateFeatures(KmapError, ValueError):
    pass


class UnknownType(KmapError, ValueError):
    pass


class InvalidSpec(KmapError, ValueError):
    pass


class InvalidSpan(KmapError, ValueError):
    pass


class Unsupported(KmapError, ValueError):
    pass


class CorruptStream(KmapError, ValueError):
    """A compressed stream could not be decoded."""
