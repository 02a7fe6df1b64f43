"""Exception taxonomy shared across the package.

Data-shaped problems (bad files, bad schemas) are kept apart from backend
problems (unreachable model service, garbage responses) so the CLI can map
them to distinct exit codes.
"""


class AugtextError(Exception):
    """Base class for all package errors."""


class DataError(AugtextError):
    """Problems with input data files or their contents."""


class EmptyDatasetError(DataError):
    """A dataset source yielded zero valid examples."""


class SchemaError(DataError):
    """A record is missing a field or has one of the wrong type."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MissingColumnError(DataError):
    """A named CSV column is absent from the header."""

    def __init__(self, column: str):
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class SubsetTooLargeError(DataError):
    """Requested subset size exceeds the dataset size."""


class BackendError(AugtextError):
    """Problems with a model backend."""


class BackendUnavailable(BackendError):
    """The backend could not be reached or kept failing after retries."""


class MalformedResponse(BackendError):
    """The backend answered, but not in the agreed wire format."""


class UnsupportedLanguagePair(BackendError):
    """The translator does not serve the requested language pair."""


class AugmentationFailed(AugtextError):
    """Too many per-example failures while augmenting a dataset."""


class TrainingDiverged(AugtextError):
    """Training hit a non-finite loss."""
