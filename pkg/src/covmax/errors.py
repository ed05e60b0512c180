"""Exception hierarchy shared by all covmax modules."""


class CovmaxError(Exception):
    """Base class for covmax errors."""


class ParameterError(CovmaxError, ValueError):
    """An argument is outside its admissible range."""


class DimensionError(ParameterError):
    """Arrays or projection sets have incompatible dimensions."""


class AssumptionViolation(ParameterError):
    """Input violates a modelling assumption (e.g. a damping above the decay rate)."""


class DegenerateVarianceError(CovmaxError, ValueError):
    """A projection pair has nonpositive asymptotic variance."""


class CertificateError(CovmaxError):
    """No geometric decay certificate could be fitted."""


class ConvergenceError(CovmaxError, RuntimeError):
    """An iterative routine did not converge."""


class ResourceLimitExceeded(CovmaxError, RuntimeError):
    """A wall-clock guard was hit."""
