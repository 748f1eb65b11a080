"""Online l0 elastic net subspace clustering with support-point dictionaries."""

from .admm import (DictionaryMatrix, GramFactorization, IterationTrace, default_sigma, factorize,
                   self_expressive_coefficients, solve_sample)
from .dictionary import DictionaryManager, estimate_delta, init_dictionary, min_distance_to_dictionary
from .errors import (ConfigError, DegenerateAffinityError, DimensionError, DivergenceError, DomainError,
                     FactorizationError, OenscError, ParseError, StaleFactorizationError)
from .harness import RunConfig, RunReport, grid_search, run_stream
from .metrics import accuracy, nmi, purity
from .model import PerSampleState, Sample, SolverConfig
from .spectral import CoefficientMatrix, block_diagonal_ratio, build_affinity, cluster
from .support_points import CCPConfig, SupportPointSet, compute_support_points, energy_distance

__version__ = "0.1.0"
