"""Exception hierarchy. The CLI maps each class to a stable exit code."""


class PetFisherError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidArgumentError(PetFisherError, ValueError):
    """Bad dimensions, non-positive scale parameters, malformed inputs."""

    exit_code = 2


class DegenerateSupportError(PetFisherError):
    """Positive counts observed at a detector pair with zero model mass."""

    exit_code = 3

    def __init__(self, detector, message=None):
        self.detector = detector  # 1-based label
        super().__init__(
            message
            or f"detector pair {detector} has positive counts but zero expected mass"
        )


class NumericalError(PetFisherError):
    exit_code = 4


class SingularFisherError(NumericalError):
    """Information matrix is singular or too ill-conditioned to invert."""

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(
            message or f"Fisher information is singular (condition estimate {condition:.3e})"
        )


class StepTooLargeError(NumericalError, ValueError):
    """Finite-difference perturbation drove some expected count non-positive."""

    def __init__(self, pixel, epsilon):
        self.pixel = pixel  # 1-based label
        self.epsilon = epsilon
        super().__init__(
            f"perturbing pixel {pixel} by {epsilon:g} makes an expected count non-positive"
        )
