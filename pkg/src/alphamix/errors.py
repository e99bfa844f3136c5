"""Exception types shared across the package."""


class AlphaMixError(Exception):
    """Base class for all package errors."""


class DimensionError(AlphaMixError, ValueError):
    """Templates or grids with incompatible shapes were combined."""


class ArityError(AlphaMixError, ValueError):
    """Too few inputs for a mixing operation."""


class TemplateFormatError(AlphaMixError, ValueError):
    """A template file or text matrix could not be parsed."""


class ManifestError(AlphaMixError, ValueError):
    """A population manifest is malformed or inconsistent."""


class SplitError(AlphaMixError, ValueError):
    """A split specification would produce an empty partition."""


class CalibrationError(AlphaMixError, ValueError):
    """Imposter distribution is empty or cannot be built."""


class SearchError(AlphaMixError, ValueError):
    """Attack enumeration or ranking received unusable input."""


class SpecError(AlphaMixError, ValueError):
    """Invalid synthetic generation parameters."""
