"""Exception hierarchy shared by the library and the CLI."""


class CardinalError(Exception):
    """Base class for every error raised by this package."""


class PoleError(CardinalError, ValueError):
    """Gamma evaluated at a nonpositive integer."""


class DomainError(CardinalError, ValueError):
    """Argument outside the domain of a special function or kernel routine."""


class ParameterRangeError(CardinalError, ValueError):
    """Kernel parameters outside the range an operation supports."""


class TruncationError(CardinalError, RuntimeError):
    """A lattice sum or quadrature tail failed to converge within its cap."""


class ResourceBudgetError(CardinalError, RuntimeError):
    """A transform grid or table would exceed the configured size budget."""


class TableRangeError(CardinalError, ValueError):
    """Evaluation requested beyond the radius a cardinal table covers."""


class StencilFaceError(CardinalError, ValueError):
    """A finite-difference stencil crosses a cell face of the multiplier."""


class FitError(CardinalError, ValueError):
    """Log-log fit cannot be formed from the given points."""


class UnsupportedFamilyError(CardinalError, ValueError):
    """Unknown test-function family or unsupported order."""


class ConfigError(CardinalError, ValueError):
    """Malformed configuration file or command-line arguments."""
