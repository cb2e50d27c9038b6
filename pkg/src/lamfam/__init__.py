"""Lambda-exponential families of Student distributions.

Closed-form log-partitions, escort laws and Renyi divergences for the
multivariate Student family, moment-matching variational inference with
exact or MALA-estimated escort moments, relaxed maximum likelihood (batch,
online and EM for mixtures), and a benchmark harness in :mod:`lamfam.bench`.
"""

from .divergences import DivergenceReport, renyi_divergence_closed, renyi_divergence_mc
from .inference import (
    MixtureModel,
    ProxSchedule,
    ReplicateAborted,
    em_run,
    mle_moment_match,
    mle_online,
    vi_exact_escort,
    vi_plain_mala,
    vi_scaled_mala,
)
from .numerics import SeededRng, SpdMatrix, cholesky
from .samplers import TargetOracle, mala_chain
from .student import (
    DomainError,
    IncompatibleError,
    NaturalParams,
    StudentParams,
    SufficientMoments,
    escort,
    escort_moments,
    log_density,
    natural_from_params,
    params_from_escort_moments,
    params_from_natural,
    sample,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceReport",
    "DomainError",
    "IncompatibleError",
    "MixtureModel",
    "NaturalParams",
    "ProxSchedule",
    "ReplicateAborted",
    "SeededRng",
    "SpdMatrix",
    "StudentParams",
    "SufficientMoments",
    "TargetOracle",
    "cholesky",
    "em_run",
    "escort",
    "escort_moments",
    "log_density",
    "mala_chain",
    "mle_moment_match",
    "mle_online",
    "natural_from_params",
    "params_from_escort_moments",
    "params_from_natural",
    "renyi_divergence_closed",
    "renyi_divergence_mc",
    "sample",
    "vi_exact_escort",
    "vi_plain_mala",
    "vi_scaled_mala",
]
