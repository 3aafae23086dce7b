"""Exception hierarchy shared by every fetmosaic module."""


class FetMosaicError(Exception):
    """Base exception for fetmosaic errors."""
    pass


class UsageError(FetMosaicError):
    """The caller supplied invalid input; the CLI maps this to exit status 2."""
    pass


class InvalidArgument(UsageError, ValueError):
    """An argument is outside the range its operation accepts."""
    pass


class TooFewFrames(UsageError):
    """A sequence is shorter than the operation needs."""
    pass


class SizeTooSmall(UsageError):
    """A requested image size is below the supported minimum."""
    pass


# --- homogeneous algebra ---

class HomographyError(FetMosaicError):
    """Base exception for projective algebra failures."""
    pass


class PointAtInfinity(HomographyError):
    """A mapped point has a vanishing homogeneous coordinate."""
    pass


class SingularMatrix(HomographyError):
    """The matrix cannot be inverted."""
    pass


class ZeroMatrix(HomographyError):
    """The matrix has no finite nonzero scale."""
    pass


# --- shapes and indices ---

class IndexOutOfRange(FetMosaicError, IndexError):
    """A frame or homography index lies outside its sequence."""
    pass


class DimensionMismatch(FetMosaicError, ValueError):
    """Two grids that must agree in size do not."""
    pass


class LengthMismatch(FetMosaicError, ValueError):
    """Two sequences that must agree in length do not."""
    pass


class EmptyInput(FetMosaicError, ValueError):
    """An operation received nothing to work on."""
    pass


# --- registration ---

class RegistrationError(FetMosaicError):
    """Base exception for pairwise registration failures."""
    pass


class ImageTooSmall(RegistrationError):
    """The image cannot support the requested pyramid depth."""
    pass


class InsufficientOverlap(RegistrationError):
    """Too few masked pixels remain valid under the current warp."""
    pass


class DegenerateGradient(RegistrationError):
    """The normal equations are too ill-conditioned to solve."""
    pass


# --- evaluation ---

class CropTooSmall(FetMosaicError):
    """The overlap crop is smaller than the SSIM window."""
    pass


# --- dataset ---

class DatasetError(FetMosaicError):
    """Base exception for on-disk layout problems."""
    pass


class MissingDirectory(DatasetError):
    """A required directory of the sequence layout is absent."""
    pass


class ResolutionMismatch(DatasetError):
    """Frames disagree in size, are not square, or contradict the catalog."""
    pass


class IllegalLabelValue(DatasetError):
    """A label file holds a value outside the class scheme."""

    def __init__(self, path, value: int):
        self.path = path
        self.value = int(value)
        super().__init__(f"{path}: illegal label value {self.value} (allowed 0, 1, 2, 3)")


class FoldConfigError(DatasetError):
    """The fold configuration cannot be parsed."""
    pass


class IncompleteAssignment(FoldConfigError):
    """Some catalog videos are not assigned to a fold."""
    pass


class FoldSizeViolation(FoldConfigError):
    """A fold does not hold the expected number of videos."""
    pass
