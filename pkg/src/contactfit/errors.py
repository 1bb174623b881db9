"""Exception types shared across the package."""


class ContactFitError(Exception):
    """Base class for all contactfit errors."""


class ParameterError(ContactFitError):
    """Inputs have inconsistent dimensions or invalid values."""


class GeometryError(ContactFitError):
    """Degenerate or invalid mesh geometry (zero-area faces, non-unit normals)."""


class ProjectionError(ContactFitError):
    """Point cannot be projected (non-positive depth after extrinsics)."""


class GranularityError(ContactFitError):
    """Region granularities of two inputs do not match."""


class CodecError(ContactFitError):
    """A file could not be parsed. Carries the offending file and field."""

    def __init__(self, message, path=None, field=None):
        self.path = path
        self.field = field
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class OptimizationError(ContactFitError):
    """The optimizer hit a non-finite loss or an invalid configuration."""
