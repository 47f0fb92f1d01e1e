"""Exception types shared across the package."""


class TrackGenerationError(RuntimeError):
    """Raised when no feasible track exists for the requested parameters."""


class FitError(ValueError):
    """Raised when a least-squares Bezier fit is rank deficient."""


class HorizonError(RuntimeError):
    """Raised when a path does not extend far enough ahead to embed.

    Carries ``steps_survived`` when the failure came from a rollout that
    left the track early.
    """

    def __init__(self, message, steps_survived=None):
        super().__init__(message)
        self.steps_survived = steps_survived


class StaleEmbeddingError(RuntimeError):
    """Raised when a controller is asked to track an outdated embedding."""


class ExportError(RuntimeError):
    """Raised when a dataset export produces no usable samples."""
