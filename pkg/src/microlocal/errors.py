"""Exception hierarchy shared by all modules."""


class MicrolocalError(Exception):
    """Base class for library errors."""


class InvalidDimensionError(MicrolocalError, ValueError):
    pass


class DimensionMismatchError(MicrolocalError, ValueError):
    pass


class GridMismatchError(MicrolocalError, ValueError):
    pass


class NormalizationError(MicrolocalError, ValueError):
    """A direction that should be a unit vector is not."""


class DomainError(MicrolocalError, ValueError):
    """Operation requested off its domain (e.g. a ray off the light cone)."""


class HypothesisError(MicrolocalError):
    """A theorem hypothesis failed its sampled check; the experiment refuses to run.

    ``diagnostic`` carries whatever evidence the check produced.
    """

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


class EllipticityError(MicrolocalError, ValueError):
    pass


class DecompositionError(MicrolocalError, ValueError):
    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ConstructionError(MicrolocalError, ValueError):
    pass


class AliasingError(MicrolocalError, ValueError):
    pass


class MarginError(MicrolocalError, ValueError):
    pass


class CalibrationError(MicrolocalError):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


class OrderPatternError(MicrolocalError, ValueError):
    """Declared orders do not follow ``b in S^k, e in S^k, g in S^{k-1}``."""
