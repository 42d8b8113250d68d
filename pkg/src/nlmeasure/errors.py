"""Exception types raised across the library.

All inherit from ValueError so callers that only care about "bad input"
can catch a single base class.
"""


class NotPositiveSemiDefiniteError(ValueError):
    """A matrix required to be PSD is not, even after the jitter fallback."""


class InsufficientSamplesError(ValueError):
    """Fewer samples than the operation needs (covariances need n >= 2)."""


class NonFiniteSampleError(ValueError):
    """A model evaluation produced NaN or infinity.

    Attributes:
        index: global index of the first offending sample.
    """

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class DegenerateCovarianceError(ValueError):
    """A covariance matrix is rank deficient beyond the regularization policy."""


class DegenerateOutputError(ValueError):
    """An output component has (numerically) zero variance."""


class ModelFormError(ValueError):
    """A moment set or model of the wrong noise form was passed to an operation."""


class NoClosedFormError(ValueError):
    """The measure for general (non-additive, non-multiplicative) noise.

    No closed form exists for that case, so it is rejected rather than
    approximated.
    """
