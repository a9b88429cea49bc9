"""
Exceptions raised by the diffSBT toolkit
"""


from typing import Optional


class DiffSbtError(Exception):
    """
    Base class for every error the toolkit raises on purpose
    """


class FormatError(DiffSbtError, ValueError):
    """
    A document, dump, diff or config file does not follow its format
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f'Line {line}: {message}'
        super().__init__(message)


class NoChange(DiffSbtError, ValueError):
    """
    The commit has nothing to encode
    """


class EmptySide(DiffSbtError, ValueError):
    """
    The buggy side of an encoding selected no nodes
    """


class AmbiguousChange(DiffSbtError, ValueError):
    """
    More than one file changed, so there is no single file to encode
    """


class EmptyInput(DiffSbtError, ValueError):
    """
    An operation that needs data received none
    """


class InfeasibleSplit(DiffSbtError, ValueError):
    """
    A repository is too large for any partition of a cross-project split
    """


class DimensionMismatch(DiffSbtError, ValueError):
    """
    Two embeddings do not have the same length
    """


class ProviderError(DiffSbtError):
    """
    The embedding provider failed or returned unusable output
    """


class IoError(DiffSbtError, OSError):
    """
    A dataset or report file could not be written or read
    """


class RepoError(DiffSbtError, OSError):
    """
    The path is not a readable git repository
    """


class ServiceError(DiffSbtError):
    """
    Base class for hosting-service failures
    """


class AuthError(ServiceError):
    """
    Missing or rejected API token
    """


class RateLimitError(ServiceError):
    """
    The hosting service asked us to slow down
    """

    def __init__(self, message: str, retry_after: Optional[int] = None):
        self.retry_after = retry_after
        super().__init__(message)


class NetworkError(ServiceError):
    """
    The request never produced a usable response
    """
