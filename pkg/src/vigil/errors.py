"""Exception hierarchy shared across the platform.

Every error carries a stable ``code`` used by the HTTP layer to build the
error envelope, so raising sites never need to know about HTTP.
"""


class VigilError(Exception):
    """Base class for all platform errors."""

    code = "internal"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class InvalidInput(VigilError):
    code = "invalid_input"


class InsufficientData(VigilError):
    code = "insufficient_data"


class FitFailure(VigilError):
    code = "fit_failure"


class ModelUnavailable(VigilError):
    code = "model_unavailable"


class NotFound(VigilError):
    code = "not_found"


class Conflict(VigilError):
    code = "conflict"


class InvalidQuery(VigilError):
    code = "invalid_query"


class InvalidState(VigilError):
    code = "invalid_state"


class DegenerateDistribution(VigilError):
    code = "degenerate_distribution"


class SourceUnavailable(VigilError):
    code = "source_unavailable"


class DeliveryFailed(VigilError):
    code = "delivery_failed"
