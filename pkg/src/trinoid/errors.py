"""Exception and warning types shared across the package."""


class TrinoidError(Exception):
    """Base class for all domain errors raised by this package."""


class NonSL2Input(TrinoidError):
    """A matrix expected to lie in SL(2, C) has determinant away from 1."""


class ExcludedAngleIsPi(TrinoidError):
    """A half-angle equals pi, which the catenoidal setup excludes."""


class DegenerateHanbetu(TrinoidError):
    """The umbilic discriminant vanishes, so the two umbilics coincide."""


class ZeroCoefficient(TrinoidError):
    """A Hopf coefficient c_j is zero, so the sign pattern is undefined."""


class BadEdge(TrinoidError):
    """An edge or vertex index passed to a surgery operation is invalid."""


class BigonRequiresAcute(TrinoidError):
    """Bigon attachment needs the modified half-angle to satisfy B < pi."""


class SingularPoint(TrinoidError):
    """Evaluation was requested at or too close to a singular point."""


class SingularPathPoint(TrinoidError):
    """An integration path passes within clearance of a singular point."""


class StepUnderflow(TrinoidError):
    """Adaptive step control shrank the step below the useful minimum."""


class NotUnitarizable(TrinoidError):
    """No positive definite invariant Hermitian form exists for the rep."""


class NotPositiveDefinite(TrinoidError):
    """A Hermitian matrix required to be positive definite is not."""


class NullStructureViolation(TrinoidError):
    """Recovered connection data is not rank one trace free within drift tolerance."""


class EmptyIntersection(TrinoidError):
    """A cutting plane does not meet the surface mesh."""


class EigenvalueMismatch(UserWarning):
    """Monodromy eigenvalues disagree with the predicted unit circle values."""
