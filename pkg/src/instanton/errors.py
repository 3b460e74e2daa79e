"""Exception types shared across the package."""


class InstantonError(Exception):
    pass


class ConvergenceFailure(InstantonError):
    pass


class NotAntisymmetric(InstantonError, ValueError):
    pass


class OddDimension(InstantonError, ValueError):
    pass


class NotInGroup(InstantonError, ValueError):
    pass


class NotRealizable(InstantonError, ValueError):
    """Complex-form data that is not unitarily conjugate to real-form data."""


class GaugeSingularity(InstantonError):
    pass


class QuadratureBudgetExceeded(InstantonError):
    pass


class DegenerateParametrization(InstantonError, ValueError):
    pass


class WidthTooLarge(InstantonError, ValueError):
    pass


class DimensionMismatch(InstantonError, ValueError):
    pass


class NotDisjoint(InstantonError, ValueError):
    pass


class DimensionBudgetViolated(InstantonError, ValueError):
    pass


class WrongForm(InstantonError, ValueError):
    pass


class CombinatorialBudgetExceeded(InstantonError):
    pass


class ConfigInvalid(InstantonError, ValueError):
    pass
