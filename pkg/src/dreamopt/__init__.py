"""Decentralized stochastic minimax optimization with DREAM."""

from .constraints import AllSpace, Box, Simplex, project_simplex
from .data import RobustLogRegData, load_libsvm, parse_libsvm, partition, write_libsvm
from .errors import (
    ConstructionError,
    ConvergenceError,
    DegenerateTopologyError,
    DimensionError,
    DivergenceError,
    DreamError,
    InvalidParameterError,
    ModeError,
    ParseError,
)
from .metrics import (
    RunRecord,
    consensus_error,
    estimator_variances,
    optimization_error,
    snapshot,
    stationarity,
)
from .optimizer import (
    AgentSwarm,
    DreamConfig,
    GdaConfig,
    Streams,
    derive_config,
    dream_init,
    dream_run,
    dream_step,
    gt_gda_baseline_run,
    gt_gda_run,
    gt_gda_step,
)
from .problem import (
    MinimaxProblem,
    QuadraticProblem,
    RobustLogRegProblem,
    SfoLedger,
    estimate_smoothness,
    primal_eval,
    project_y,
    reduced_gradient,
)
from .topology import (
    CommLedger,
    MixingMatrix,
    build_complete_averaging,
    build_lazy_ring,
    fast_mix,
    lazify,
    plain_mix,
    spectral_gap,
)

__version__ = "0.1.0"
