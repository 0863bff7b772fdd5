"""Exception types raised across the package.

Every error is a subclass of :class:`MeshtriError` so callers can catch the
package's failures with one except clause while tests pin the precise type.
"""


class MeshtriError(Exception):
    """Base class for all meshtri errors."""


class NonPositiveDepth(MeshtriError):
    """A point lies at or behind the camera plane (camera-frame z <= eps)."""


class InvalidDimension(MeshtriError):
    """A size parameter (grid side, resolution, ...) is out of range."""


class DegenerateInput(MeshtriError):
    """Numerically degenerate input, e.g. a zero vector where a direction is needed."""


class DimensionMismatch(MeshtriError):
    """Array dimensions do not agree with the model or operator."""


class ShapeMismatch(MeshtriError):
    """Two arrays that must share a shape do not."""


class LengthMismatch(MeshtriError):
    """Two sequences that must share a length do not."""


class EmptyViewList(MeshtriError):
    """An aggregation was asked to fuse zero views."""


class GateOutOfRange(MeshtriError):
    """A visibility gate value lies outside [0, 1]."""


class NotNormalized(MeshtriError):
    """A heatmap channel does not sum to 1 within tolerance."""


class InvalidSigma(MeshtriError):
    """A Gaussian width parameter is not positive."""


class IndexOutOfRange(MeshtriError):
    """A voxel or vertex index is outside its grid or array."""


class TargetTooSmall(MeshtriError):
    """Decimation cannot reach the requested vertex count without breaking the mesh."""


class InvalidRotation(MeshtriError):
    """A matrix fails the rotation invariants (orthonormal, det +1)."""


class NonFiniteCost(MeshtriError):
    """The fitting cost became NaN or infinite."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite cost at iteration {iteration}")


class InvalidConfig(MeshtriError):
    """A configuration value or file is invalid."""


class ParseError(MeshtriError):
    """A file could not be parsed; message carries line/field context."""


class InvariantViolation(MeshtriError):
    """Loaded data violates a structural invariant."""
