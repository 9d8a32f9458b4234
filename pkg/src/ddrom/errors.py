"""Exception types raised across the package."""


class DDROMError(Exception):
    """Base class for all package errors."""


class SingularMatrix(DDROMError):
    pass


class NotSymmetric(DDROMError):
    pass


class DimensionMismatch(DDROMError, ValueError):
    pass


class InvalidResolution(DDROMError, ValueError):
    pass


class DisconnectedInterface(DDROMError):
    pass


class TraceMismatch(DDROMError):
    pass


class SingularSystem(DDROMError):
    pass


class NewtonDiverged(DDROMError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class LineSearchFailed(DDROMError):
    """Raised when backtracking cannot find a decrease; ``result`` holds the last accepted iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MeshMismatch(DDROMError):
    pass


class InvalidRange(DDROMError, ValueError):
    pass


class SnapshotFailure(DDROMError):
    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = list(failed)


class RankDeficient(DDROMError):
    def __init__(self, message, achievable):
        super().__init__(message)
        self.achievable = achievable


class RankDeficientWarning(UserWarning):
    pass


class MissingArtifacts(DDROMError):
    pass
