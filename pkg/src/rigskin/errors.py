"""Exception and warning types raised across the package."""


class RigSkinError(Exception):
    """Base class for all package errors."""


class DegenerateRotation(RigSkinError, ValueError):
    pass


class NotARotation(RigSkinError, ValueError):
    pass


class DegenerateFrame(RigSkinError, ValueError):
    pass


class InvalidSkeleton(RigSkinError, ValueError):
    pass


class SizeMismatch(RigSkinError, ValueError):
    pass


class ShapeMismatch(RigSkinError, ValueError):
    pass


class InvalidRotation(RigSkinError, ValueError):
    pass


class InvalidConfig(RigSkinError, ValueError):
    pass


class IndexOutOfRange(RigSkinError, IndexError):
    pass


class EmptyMesh(RigSkinError, ValueError):
    pass


class EmptySet(RigSkinError, ValueError):
    pass


class NotStochastic(RigSkinError, ValueError):
    pass


class NonPositiveDt(RigSkinError, ValueError):
    pass


class NonFinite(RigSkinError, ArithmeticError):
    """Optimization diverged; usually the step size is too large."""


class NoRoot(RigSkinError, ValueError):
    pass


class ParseError(RigSkinError, ValueError):
    """Malformed input text, with 1-based line/column position."""

    def __init__(self, message, line=None, column=None, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"col {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class UnsupportedChannel(ParseError):
    pass


class SchemaError(ParseError):
    pass


# Warnings: conditions with a documented fallback.


class NoToeJoint(UserWarning):
    """No toe-like joint name found; grounding used the lowest joint."""


class Unidentifiable(UserWarning):
    """Every training pose is the rest pose; weights stay at their prior."""
