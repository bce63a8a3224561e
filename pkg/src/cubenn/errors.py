"""Exception hierarchy shared by all cubenn modules."""


class CubennError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatchError(CubennError):
    """Tensor shapes are incompatible (reshape products, gradient shapes, ...)."""


class InvalidGeometryError(CubennError):
    """A convolution window does not fit the (padded) input axis."""


class InvalidArchitectureError(CubennError):
    """A network description produces an impossible shape trace."""


class DatasetError(CubennError):
    """Bad cube/ground-truth files, dimension mismatches, or split problems."""


class CheckpointError(CubennError):
    """Base class for checkpoint de/serialization failures."""


class CheckpointVersionError(CheckpointError):
    """Unknown magic or unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """Manifest tensor shapes disagree with the stored blob layout."""


class CheckpointTruncatedError(CheckpointError):
    """Weight blob is shorter than the manifest promises."""
