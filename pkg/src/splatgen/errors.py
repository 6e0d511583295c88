"""Exception vocabulary shared across the package.

Every contract violation raises one of these (or a builtin where Python
already has the right type: OSError for I/O, ValueError for generic
precondition breaches).
"""


class SplatError(Exception):
    """Base class for package-specific errors."""


class NonFiniteInput(SplatError, ValueError):
    """An input array contains NaN or Inf."""


class DegenerateQuaternion(SplatError, ValueError):
    """Quaternion norm is near zero or too far from 1 to normalize safely."""


class SingularCovariance(SplatError, ValueError):
    """Covariance is not invertible even after regularization."""


class ShapeMismatch(SplatError, ValueError):
    """Array shape disagrees with the contract."""


class MalformedHeader(SplatError, ValueError):
    """A PLY/container header is missing required elements or properties."""


class CountMismatch(SplatError, ValueError):
    """Declared element count disagrees with the payload."""


class GraphConsumed(SplatError, RuntimeError):
    """backward() was called on a graph whose recording was already released."""


class MissingGradient(SplatError, RuntimeError):
    """An optimizer step was requested but no parameter has a gradient."""


class IndivisibleWidth(SplatError, ValueError):
    """Feature width is not divisible by the expansion factor."""


class EmptySet(SplatError, ValueError):
    """An operation that needs at least one element received none."""


class InvalidRange(SplatError, ValueError):
    """A numeric range parameter is empty or out of bounds."""


class ConfigError(SplatError, ValueError):
    """Unknown key or malformed value in a config file or override."""


class CheckpointMismatch(SplatError, ValueError):
    """Checkpoint tensors do not match the model being restored."""
