"""Exception types shared across the package."""


class TcsdeError(Exception):
    """Base class for package errors."""


class ConfigError(TcsdeError):
    """Invalid experiment configuration; the message names the offending field."""


class ContractViolationError(TcsdeError):
    """A diffusion coefficient broke its declared bounds during a run."""


class PathExhaustedError(TcsdeError):
    """A Brownian driver ran out of knots before the clock reached its target.

    Internal signal: callers extend the driver and retry.
    """


class ExperimentError(TcsdeError):
    """A Monte Carlo sample failed; records the sample index and module."""

    def __init__(self, sample_index: int, module: str, message: str):
        super().__init__(f"sample {sample_index} failed in {module}: {message}")
        self.sample_index = sample_index
        self.module = module
