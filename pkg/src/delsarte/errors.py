"""Exception types and default tolerances."""


class ContractError(ValueError):
    """A precondition of an operation was violated (wrong shapes, missing oracles)."""


class DomainError(ValueError):
    """A value fell outside the region where an operation is defined."""


class DecayError(DomainError):
    """A Volterra integrand does not decay at the left edge of the grid."""


class SingularKernelError(ArithmeticError):
    """A transmutation kernel is singular or too ill-conditioned to invert."""

    def __init__(self, message, labels=()):
        super().__init__(message)
        self.labels = tuple(labels)


class ConditioningError(ArithmeticError):
    """A linear system inside a numerical procedure is ill-conditioned."""


TAU_ALG = 1e-10
TAU_ZERO = 1e-12
TAU_DECAY = 1e-10
TAU_SING = 1e-12
TAU_KERNEL = 1e-6

DEFAULT_TOLERANCES = {
    "alg": TAU_ALG,
    "zero": TAU_ZERO,
    "decay": TAU_DECAY,
    "sing": TAU_SING,
    "kernel": TAU_KERNEL,
}
