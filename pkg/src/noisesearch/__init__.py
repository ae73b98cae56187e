"""Verifier-guided search over the initial noise of a rectified-flow sampler."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    NoiseSearchError,
    NumericError,
    ShapeError,
    TimeDomainError,
    TransportError,
)
from .flow import FlowSchedule, GuidanceConfig, MixtureModel, NfeCounter
from .noise import (
    NoiseTensor,
    TensorShape,
    from_batched,
    gaussian_normalize,
    sample_standard_noise,
    to_batched,
)
from .search import SearchConfig, SearchTrace, run_search, select_best
from .singular import (
    SigmaCandidate,
    SingularSpace,
    decompose,
    reconstruct,
    reset_space,
    sample_candidates,
    should_reset,
    singular_vector_similarity,
)
from .verifiers import ScoreRequest, SyntheticLandscape, VerifierScore

__version__ = "0.1.0"
