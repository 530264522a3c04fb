"""Exception types shared across the pipeline."""


class R2RError(Exception):
    """Base class for all pipeline errors."""


class UnsupportedFormat(R2RError):
    pass


class CorruptImage(R2RError):
    pass


class MissingDirectory(R2RError):
    pass


class UnmatchedPair(R2RError):
    def __init__(self, filename):
        super().__init__(f"no counterpart for {filename!r}")
        self.filename = filename


class ShapeMismatch(R2RError):
    pass


class PatchTooLarge(R2RError):
    pass


class RangeError(R2RError):
    pass


class ShapeError(R2RError):
    pass


class ChannelMismatch(ShapeError):
    pass


class OddDims(ShapeError):
    pass


class NonDivisibleDims(ShapeError):
    pass


class NonConjugateSpectrum(R2RError):
    pass


class InputTooSmall(R2RError):
    pass


class MissingUpstream(R2RError):
    pass


class DivergedLoss(R2RError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step
        self.value = value


class NonFiniteGrad(R2RError):
    pass


class VersionMismatch(R2RError):
    pass


class ChecksumMismatch(R2RError):
    pass


class TooSmall(R2RError):
    pass
