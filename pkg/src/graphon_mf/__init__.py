"""Graphon-based random graphs, exact epidemic-type simulation on them, and
the mean-field equations they converge to."""

__version__ = "0.1.0"

from .stepfunction import StepFunction
from .kernels import (
    Blockwise,
    FiniteRank,
    GraphonKernel,
    GridEvaluable,
    KernelError,
    Separable,
    apply_operator,
    block_average,
    blockwise,
    constant,
    degree_function,
    delta_M,
    discretize,
    evaluate,
    lp_norm,
    parse_kernel,
    product_xy,
    separable_poly,
)
from .sampling import SampledGraph, empirical_graphon, kappa_schedule, sample_graph
from .spectral import Spectrum, epidemic_threshold, op2_norm, spectrum, truncate
from .dynamics import (
    ABSORBED,
    DegreeZero,
    Explicit,
    FromDensity,
    MarkovProcess,
    RateModel,
    Trajectory,
    TransitionEvent,
    init_process,
    sir,
    sis,
)
from .meanfield import (
    DIE_OUT,
    MeanFieldSolution,
    long_run_prevalence,
    rhs,
    sis_equilibrium_separable,
    sis_initial,
    solve,
)
from .analysis import (
    TrajectoryComparison,
    compare_trajectories,
    interval_cut_surrogate,
    interval_norm,
    l1_distance,
)
from .experiments import ExperimentConfig, Report, default_config, run_experiment
