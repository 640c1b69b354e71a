"""EM reconstruction of Poisson emission profiles with observed Fisher information."""

__version__ = "0.1.0"

from petfisher.core import (  # noqa: E402
    SystemMatrix,
    build_gaussian_system_matrix,
    forward_project,
    validate_system_matrix,
)
from petfisher.em import EmConfig, EmState, em_step, incomplete_log_likelihood, run_em, score  # noqa: E402
from petfisher.errors import (  # noqa: E402
    DegenerateSupportError,
    InvalidArgumentError,
    SingularFisherError,
    StepTooLargeError,
)
from petfisher.fisher import (  # noqa: E402
    FisherMatrix,
    fisher_fd_oracle,
    fisher_information,
    mle_condition_residual,
)
from petfisher.uncertainty import (  # noqa: E402
    build_report,
    correlation_matrix,
    invert_fisher,
    minor_inversion_se,
    noise_to_signal,
)
