"""Exception hierarchy.

Everything raised on purpose by this package derives from GridPdError so
callers (and the CLI) can distinguish data/usage problems from bugs.
"""


class GridPdError(Exception):
    """Base class for all gridpd errors."""


class InvalidConfigError(GridPdError, ValueError):
    """A configuration object violates its invariants."""


class MissingFileError(GridPdError, FileNotFoundError):
    """Input file does not exist."""


class HeaderMismatchError(GridPdError, ValueError):
    """File header disagrees with the payload (bad magic, wrong size, ...)."""


class LabelMissingError(GridPdError, ValueError):
    """A set declared labeled is missing one or more labels."""


class IoFailureError(GridPdError, OSError):
    """Read or write failed at the OS level."""


class InvalidCutoffError(GridPdError, ValueError):
    """High-pass cutoff outside (0, sample_rate/2)."""


class NotDivisibleError(GridPdError, ValueError):
    """Chunk count does not divide the signal length."""


class UnlabeledSetError(GridPdError, ValueError):
    """Operation requires labels but the set has none."""


class LengthMismatchError(GridPdError, ValueError):
    """Two sequences that must align have different lengths."""


class DimensionMismatchError(GridPdError, ValueError):
    """Feature vector dimension disagrees with a fitted model."""


class ShapeMismatchError(GridPdError, ValueError):
    """Tensor shape incompatible with a layer or parameter."""


class TooFewPointsError(GridPdError, ValueError):
    """Fewer points than clusters requested."""


class SingleClusterError(GridPdError, ValueError):
    """Silhouette needs at least two non-empty clusters."""


class DegenerateLabelsError(GridPdError, ValueError):
    """Training requires at least one sample of each class."""


class WeightNonPositiveError(GridPdError, ValueError):
    """Class weights must be strictly positive."""


class SingleClassError(GridPdError, ValueError):
    """AUC/MCC are undefined when only one class is present.

    Carries the metrics that are still well defined in ``partial``
    (a dict with keys ``f1``, ``accuracy``, ``threshold``).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}


class EmptySetError(GridPdError, ValueError):
    """Operation requires a non-empty signal set."""


class NotFittedError(GridPdError, RuntimeError):
    """Estimator used before fit()."""
