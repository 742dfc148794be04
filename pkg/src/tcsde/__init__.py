"""Strong simulation of driftless scalar SDEs dX = sigma(t, X) dW by time change.

A unit-rate Brownian driver is run on its own clock: the SDE time elapsed
after Brownian time s accumulates at rate 1/sigma^2(clock, driver), so
inverting the clock and reading the driver's linear interpolant at the
inverted time yields an approximate solution path. Because the construction
approximates the weak solution, it applies to bounded, spatially
Hoelder-continuous coefficients of any exponent in (0, 1], including the
rough regime where strong solutions (and hence classical strong-rate
schemes) are unavailable.

The experiment harness measures strong L^p sup-errors against coupled
fine-resolution references, regresses empirical convergence orders, and can
run an Euler-Maruyama baseline on the same driver streams for comparison.
"""

__version__ = "0.1.0"

from ._kernels import USING_NUMBA
from .baseline import EmPath, em_simulate
from .brownian import BrownianPath, gaussian_increments, generate_path
from .diffusion import (
    ContractReport,
    DiffusionCoefficient,
    builtin_coefficient,
    check_contract,
    corpus_names,
)
from .errors import (
    ConfigError,
    ContractViolationError,
    ExperimentError,
    PathExhaustedError,
    TcsdeError,
)
from .experiment import (
    ExperimentConfig,
    RateReport,
    SampleResult,
    SchemeComparison,
    compare_schemes,
    fit_loglog,
    run_experiment,
    strong_error_one_sample,
)
from .timechange import (
    SamplePath,
    TimeChangePath,
    build_time_change,
    simulate_sample_path,
)

__all__ = [
    "__version__",
    "USING_NUMBA",
    "BrownianPath",
    "ConfigError",
    "ContractReport",
    "ContractViolationError",
    "DiffusionCoefficient",
    "EmPath",
    "ExperimentConfig",
    "ExperimentError",
    "PathExhaustedError",
    "RateReport",
    "SamplePath",
    "SampleResult",
    "SchemeComparison",
    "TcsdeError",
    "TimeChangePath",
    "builtin_coefficient",
    "build_time_change",
    "check_contract",
    "compare_schemes",
    "corpus_names",
    "em_simulate",
    "fit_loglog",
    "gaussian_increments",
    "generate_path",
    "run_experiment",
    "simulate_sample_path",
    "strong_error_one_sample",
]
