"""Exception types shared across the package."""


class SilstructError(Exception):
    """Base class for all package-specific errors."""


class FormatError(SilstructError, ValueError):
    """A file does not conform to its declared format."""


class DimensionMismatchError(SilstructError, ValueError):
    """Operands describe incompatible shapes or sizes."""


class EmptyLibraryError(SilstructError, ValueError):
    """Template enumeration produced no templates."""


class UnknownTemplateIdError(SilstructError, KeyError):
    """A referenced template id is not present in the library."""


class DuplicateTemplateIdError(SilstructError, ValueError):
    """A template id occurs more than once where ids must be unique."""


class PointAtInfinityError(SilstructError, ArithmeticError):
    """A projected point lies on the camera's principal plane."""


class EmptyFeasibleSetError(SilstructError, ValueError):
    """No coefficient exceeds the feasibility threshold."""
