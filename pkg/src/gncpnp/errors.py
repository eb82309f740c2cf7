"""Exception hierarchy shared by every module."""


class PoseError(Exception):
    """Base class for all errors raised by gncpnp."""


class InvalidIntrinsics(PoseError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidPose(PoseError, ValueError):
    pass


class InvalidConfig(PoseError, ValueError):
    pass


class DomainError(PoseError, ValueError):
    pass


class LengthMismatch(PoseError, ValueError):
    pass


class EmptyInput(PoseError, ValueError):
    pass


class EmptyModel(EmptyInput):
    pass


class BehindCamera(PoseError):
    pass


class NoFiniteResiduals(PoseError):
    pass


class TooFewCorrespondences(PoseError):
    pass


class InitializationFailed(PoseError):
    """RANSAC could not produce an initial pose."""


class NoConsensus(InitializationFailed):
    pass


class NumericalFailure(PoseError):
    pass


class ParseError(PoseError, ValueError):
    def __init__(self, message: str, *, path=None, line=None, field=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line
        self.field = field
