"""Exception types raised across the package.

Every error is a ``ValueError`` or ``OSError`` subclass so callers that do not
care about the specific failure can catch the builtin.
"""


class AberrantError(Exception):
    """Base class for data errors reported by this package."""


class MalformedManifest(AberrantError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingAsset(AberrantError, ValueError):
    def __init__(self, record_id: str, path: str):
        self.record_id = record_id
        self.path = path
        super().__init__(f"record {record_id!r}: missing or unreadable asset {path}")


class DimensionMismatch(AberrantError, ValueError):
    pass


class IoFailure(AberrantError, OSError):
    pass


class EmptySaliency(AberrantError, ValueError):
    pass


class BoxOutOfBounds(AberrantError, ValueError):
    pass


class MalformedEmbeddings(AberrantError, ValueError):
    pass


class TooFewPoints(AberrantError, ValueError):
    pass


class DegenerateLabeling(AberrantError, ValueError):
    pass


class LengthMismatch(AberrantError, ValueError):
    pass


class EmptyModel(AberrantError, ValueError):
    pass


class EmptyInput(AberrantError, ValueError):
    pass


class InvalidConfig(AberrantError, ValueError):
    pass
