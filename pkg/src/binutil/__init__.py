"""Binomial-lattice utility maximization against its Gaussian limit.

The package builds standardized binomial grids with cancellation-free
log-probabilities, scans sharp Gaussian dominance constants for their tails,
prices with the lattice martingale density, and evaluates dual/primal
utility values on both models to exhibit the lattice-to-continuum limit.
A CLI (`binutil`) orchestrates sweeps and writes deterministic reports.
"""

from .binomial_core import (
    BinomialGrid,
    GaussianRef,
    build_grid,
    cdf,
    kolmogorov_distance,
    log_pmf,
    stirling_theta,
    survival,
)
from .errors import (
    BinutilError,
    DomainError,
    EvaluationError,
    InvalidUtilityError,
    UsageError,
)
from .martingale import (
    DensityEval,
    MartingaleCoefficients,
    coefficients,
    density_on_grid,
    one_step_risk_neutral_check,
)
from .tail_bounds import (
    AlphaDerivativeCheck,
    BoundFunctions,
    GBoundCheck,
    GlobalDominance,
    TailBoundReport,
    alpha_derivative_check,
    g_bound_check,
    global_tail_dominance,
    local_ratio,
    minimal_constant,
)
from .utility import (
    UtilitySpec,
    custom,
    from_table,
    log_utility,
    parse,
    power,
)
from .value_functions import (
    ContinuousDual,
    ConvergenceRow,
    ConvergenceTable,
    DiscreteDual,
    UIProbeReport,
    ValuePoint,
    continuous_payoff,
    convergence_sweep,
    discrete_payoff,
    u_from_v,
    uniform_integrability_probe,
    v_continuous,
    v_discrete,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaDerivativeCheck",
    "BinomialGrid",
    "BinutilError",
    "BoundFunctions",
    "ContinuousDual",
    "ConvergenceRow",
    "ConvergenceTable",
    "DensityEval",
    "DiscreteDual",
    "DomainError",
    "EvaluationError",
    "GBoundCheck",
    "GaussianRef",
    "GlobalDominance",
    "InvalidUtilityError",
    "MartingaleCoefficients",
    "TailBoundReport",
    "UIProbeReport",
    "UsageError",
    "UtilitySpec",
    "ValuePoint",
    "alpha_derivative_check",
    "build_grid",
    "cdf",
    "coefficients",
    "continuous_payoff",
    "convergence_sweep",
    "custom",
    "density_on_grid",
    "discrete_payoff",
    "from_table",
    "g_bound_check",
    "global_tail_dominance",
    "kolmogorov_distance",
    "local_ratio",
    "log_pmf",
    "log_utility",
    "minimal_constant",
    "one_step_risk_neutral_check",
    "parse",
    "power",
    "stirling_theta",
    "survival",
    "u_from_v",
    "uniform_integrability_probe",
    "v_continuous",
    "v_discrete",
]
