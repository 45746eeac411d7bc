"""Exception types raised across the package."""


class HymLabError(Exception):
    """Base class for all package errors."""


class DomainError(HymLabError, ValueError):
    pass


class DegenerateHessian(HymLabError, ValueError):
    pass


class StepTooLarge(HymLabError, ValueError):
    pass


class NonpositiveScale(HymLabError, ValueError):
    pass


class NonDistinctPoints(HymLabError, ValueError):
    pass


class DegenerateSpectralGap(NonDistinctPoints):
    """Some off-diagonal lift difference lies in the period lattice."""


class NonIntegerShift(HymLabError, ValueError):
    pass


class SectionNotDifferentiable(HymLabError, ValueError):
    pass


class IllConditioned(HymLabError, ValueError):
    pass


class NotFlat(HymLabError, ValueError):
    pass


class OutsideNeighborhood(HymLabError, RuntimeError):
    pass


class MaxStepsExceeded(HymLabError, RuntimeError):
    pass


class EnergyIncrease(HymLabError, RuntimeError):
    pass


class CurvatureTooLarge(HymLabError, ValueError):
    pass


class FlowFailed(HymLabError, RuntimeError):
    pass


class AlignmentFailed(HymLabError, RuntimeError):
    pass


class ConfigError(HymLabError, ValueError):
    pass
