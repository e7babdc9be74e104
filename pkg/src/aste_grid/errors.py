"""Exception types shared across the package."""


class AsteError(Exception):
    """Base class for all package errors."""


class ParseError(AsteError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(AsteError):
    def __init__(self, violations, index=None, path=None):
        self.violations = list(violations)
        self.index = index
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if index is not None:
            where.append(f"record {index}")
        prefix = " ".join(where)
        body = "; ".join(self.violations)
        super().__init__(f"{prefix}: {body}" if prefix else body)


class ConflictError(AsteError):
    """Two triplets force different tags into one grid cell."""


class SizeError(AsteError):
    pass


class LengthMismatch(AsteError):
    pass


class DimensionError(AsteError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class EmptyNeighborhood(AsteError):
    pass


class ShapeMismatch(AsteError):
    pass


class EmptySplit(AsteError):
    pass


class CheckpointError(AsteError):
    """Checkpoint missing fields or written by an incompatible format version."""
