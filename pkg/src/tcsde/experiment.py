"""Coupled Monte Carlo strong-error estimation and empirical rate regression.

One sample draws a single fine Brownian driver, builds the reference path at
the finest resolution and every ladder path by subsampling the same driver,
and takes the exact sup over [0, T] of each |coarse - reference| difference.
Both paths are piecewise linear in SDE time, so the sup of their difference
is attained at a breakpoint of one of them: evaluating on the union of both
breakpoint sets is exact, no dense grid needed.

The L^p estimator is the plain Monte Carlo mean of p-th powers; the reported
order is the least-squares slope of log(mean error) against log(1/n).
Aggregation runs in sample-index order, so reports are bit-identical for any
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import __version__, _kernels
from .baseline import em_simulate
from .brownian import generate_path
from .diffusion import DiffusionCoefficient, builtin_coefficient
from .errors import ConfigError, ExperimentError, PathExhaustedError
from .timechange import SamplePath, build_time_change, required_horizon

__all__ = [
    "SCHEME_TIME_CHANGE",
    "SCHEME_EULER_MARUYAMA",
    "SCHEME_COMPARE",
    "ExperimentConfig",
    "SampleResult",
    "RateReport",
    "SchemeComparison",
    "strong_error_one_sample",
    "run_experiment",
    "compare_schemes",
    "fit_loglog",
]

SCHEME_TIME_CHANGE = "time-change"
SCHEME_EULER_MARUYAMA = "euler-maruyama"
SCHEME_COMPARE = "compare"
_SCHEMES = (SCHEME_TIME_CHANGE, SCHEME_EULER_MARUYAMA, SCHEME_COMPARE)

#: Philox stream tags, keeping the two schemes' drivers on disjoint streams
PURPOSE_TIME_CHANGE = 0
PURPOSE_EULER_MARUYAMA = 1

#: overlay exponent: the guaranteed orders hold for every exponent below 1/2,
#: so the overlay reports the best guaranteed order at alpha = 0.49
OVERLAY_ALPHA = 0.49

#: resolutions whose mean error sits below this floor are excluded from the
#: regression; they measure rounding noise, not convergence
ERROR_FLOOR = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one rate experiment; see README for the file format."""

    coefficient: str
    params: tuple[float, ...]
    sde_horizon: float
    x0: float
    resolutions: tuple[int, ...]
    ref_resolution: int
    p: float
    samples: int
    master_seed: int
    scheme: str = SCHEME_TIME_CHANGE

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        res = tuple(sorted({int(n) for n in self.resolutions}))
        object.__setattr__(self, "resolutions", res)
        if self.sde_horizon <= 0:
            raise ConfigError(f"T: must be positive, got {self.sde_horizon}")
        if not np.isfinite(self.x0):
            raise ConfigError(f"x0: must be finite, got {self.x0}")
        if not res:
            raise ConfigError("resolutions: at least one resolution is required")
        if any(n < 1 for n in res):
            raise ConfigError(f"resolutions: must be >= 1, got {res}")
        if self.ref_resolution < 1:
            raise ConfigError(f"ref_resolution: must be >= 1, got {self.ref_resolution}")
        for n in res:
            if self.ref_resolution % n != 0:
                raise ConfigError(
                    f"resolutions: n={n} does not divide ref_resolution="
                    f"{self.ref_resolution}"
                )
        if self.p < 1:
            raise ConfigError(f"p: must be >= 1, got {self.p}")
        if self.samples < 1:
            raise ConfigError(f"samples: must be >= 1, got {self.samples}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed: must be >= 0, got {self.master_seed}")
        if self.scheme not in _SCHEMES:
            raise ConfigError(
                f"scheme: unknown value {self.scheme!r}; choose one of "
                f"{', '.join(_SCHEMES)}"
            )

    def build_coefficient(self) -> DiffusionCoefficient:
        try:
            return builtin_coefficient(self.coefficient, self.params)
        except ValueError as exc:
            raise ConfigError(f"coefficient: {exc}") from exc

    def validate_for_run(self) -> None:
        """Extra requirements enforced before a full experiment run."""
        if self.samples < 2:
            raise ConfigError(f"samples: a rate run needs >= 2 samples, got {self.samples}")
        if self.ref_resolution < 4 * max(self.resolutions):
            raise ConfigError(
                f"ref_resolution: {self.ref_resolution} must be at least 4x the "
                f"largest ladder resolution {max(self.resolutions)}"
            )
        coeff = self.build_coefficient()
        if self.scheme == SCHEME_EULER_MARUYAMA and coeff.holder_beta < 0.5:
            raise ConfigError(
                "scheme: the Euler-Maruyama baseline requires a declared spatial "
                f"Hoelder exponent >= 0.5 (got beta={coeff.holder_beta}); no strong "
                "convergence target is available for rougher coefficients, so a "
                "self-convergence slope would not measure a limit object"
            )

    def to_mapping(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "params": list(self.params),
            "T": self.sde_horizon,
            "x0": self.x0,
            "resolutions": list(self.resolutions),
            "ref_resolution": self.ref_resolution,
            "p": self.p,
            "samples": self.samples,
            "master_seed": self.master_seed,
            "scheme": self.scheme,
        }

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "ExperimentConfig":
        known = {
            "coefficient",
            "params",
            "T",
            "x0",
            "resolutions",
            "ref_resolution",
            "p",
            "samples",
            "master_seed",
            "scheme",
        }
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        missing = known - set(mapping) - {"scheme"}
        if missing:
            raise ConfigError(f"missing config key(s): {', '.join(sorted(missing))}")
        try:
            return cls(
                coefficient=str(mapping["coefficient"]),
                params=tuple(float(v) for v in mapping["params"]),
                sde_horizon=float(mapping["T"]),
                x0=float(mapping["x0"]),
                resolutions=tuple(int(v) for v in mapping["resolutions"]),
                ref_resolution=int(mapping["ref_resolution"]),
                p=float(mapping["p"]),
                samples=int(mapping["samples"]),
                master_seed=int(mapping["master_seed"]),
                scheme=str(mapping.get("scheme", SCHEME_TIME_CHANGE)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config value: {exc}") from exc


@dataclass(frozen=True)
class SampleResult:
    """Per-sample coupled sup-errors, one entry per ladder resolution.

    For the time-change scheme the inverse-clock and clock discrepancies
    against the reference are recorded as well: the first must be bounded by
    C2^2 times the second (checked by the acceptance suite on every sample).
    """

    sample_index: int
    resolutions: tuple[int, ...]
    sup_errors: np.ndarray
    inverse_clock_sup: Optional[np.ndarray] = None
    clock_sup: Optional[np.ndarray] = None


def _tc_sample(config: ExperimentConfig, coeff, sample_index: int) -> SampleResult:
    t_end = config.sde_horizon
    horizon = required_horizon(coeff, t_end, min(config.resolutions))
    fine = generate_path(
        config.ref_resolution,
        horizon,
        config.x0,
        config.master_seed,
        sample_index,
        purpose=PURPOSE_TIME_CHANGE,
    )
    while True:
        try:
            ref_tc = build_time_change(fine, coeff, t_end)
            ladder = []
            for n in config.resolutions:
                coarse = fine.subsample(config.ref_resolution // n)
                ladder.append((coarse, build_time_change(coarse, coeff, t_end)))
        except PathExhaustedError:
            horizon *= 1.5
            fine = fine.extended(horizon)
            continue
        break

    kc_ref = ref_tc.knot_count
    ref_clock = ref_tc.clock
    ref_vals = fine.values[:kc_ref]
    ref_s = np.arange(kc_ref) / config.ref_resolution
    s_cap = config.sde_horizon * coeff.c2**2

    errors = np.empty(len(config.resolutions))
    inv_sup = np.empty(len(config.resolutions))
    clk_sup = np.empty(len(config.resolutions))
    for i, (coarse, tc) in enumerate(ladder):
        kc = tc.knot_count
        clock = tc.clock
        vals = coarse.values[:kc]
        s = np.arange(kc) / coarse.n
        errors[i] = _kernels.pl_sup_abs_diff(clock, vals, ref_clock, ref_vals, t_end)
        # inverse clocks are piecewise linear in SDE time with knots
        # (clock value, brownian time); clocks are piecewise linear in
        # brownian time, compared up to C2^2 * T on the common domain
        inv_sup[i] = _kernels.pl_sup_abs_diff(clock, s, ref_clock, ref_s, t_end)
        s_hi = min(s[-1], ref_s[-1], s_cap)
        clk_sup[i] = _kernels.pl_sup_abs_diff(s, clock, ref_s, ref_clock, s_hi)
    return SampleResult(
        sample_index=sample_index,
        resolutions=config.resolutions,
        sup_errors=errors,
        inverse_clock_sup=inv_sup,
        clock_sup=clk_sup,
    )


def _em_sample(config: ExperimentConfig, coeff, sample_index: int) -> SampleResult:
    t_end = config.sde_horizon
    horizon = t_end + 2.0 / min(config.resolutions)
    fine = generate_path(
        config.ref_resolution,
        horizon,
        0.0,
        config.master_seed,
        sample_index,
        purpose=PURPOSE_EULER_MARUYAMA,
    )
    ref = em_simulate(coeff, fine, t_end, config.x0)
    ref_grid = ref.grid
    errors = np.empty(len(config.resolutions))
    for i, n in enumerate(config.resolutions):
        coarse = fine.subsample(config.ref_resolution // n)
        em = em_simulate(coeff, coarse, t_end, config.x0)
        errors[i] = _kernels.pl_sup_abs_diff(
            em.grid, em.values, ref_grid, ref.values, t_end
        )
    return SampleResult(
        sample_index=sample_index, resolutions=config.resolutions, sup_errors=errors
    )


def strong_error_one_sample(config: ExperimentConfig, sample_index: int) -> SampleResult:
    """Coupled sup-errors of one seeded sample against its fine reference."""
    if not 0 <= sample_index < config.samples:
        raise ConfigError(
            f"sample index {sample_index} outside the configured range "
            f"[0, {config.samples})"
        )
    coeff = config.build_coefficient()
    if config.scheme == SCHEME_EULER_MARUYAMA:
        return _em_sample(config, coeff, sample_index)
    return _tc_sample(config, coeff, sample_index)


def _origin_module(exc: Exception) -> str:
    """Deepest package module on the exception's traceback."""
    tb = exc.__traceback__
    module = "experiment"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("tcsde.") and not name.startswith("tcsde._"):
            module = name.split(".", 1)[1]
        tb = tb.tb_next
    return module


def _worker(mapping: dict, sample_index: int):
    # top-level so process pools can pickle it; failures come back as values
    # to keep the failing sample index attributable
    try:
        config = ExperimentConfig.from_mapping(mapping)
        result = strong_error_one_sample(config, sample_index)
        return ("ok", result)
    except Exception as exc:  # noqa: BLE001 - reported with the sample index
        return ("error", sample_index, _origin_module(exc), str(exc))


def fit_loglog(resolutions: Sequence[int], errors: Sequence[float]) -> tuple[float, float]:
    """OLS slope and its standard error for log(error) against log(1/n)."""
    x = np.log(1.0 / np.asarray(resolutions, dtype=np.float64))
    y = np.log(np.asarray(errors, dtype=np.float64))
    if len(x) < 2:
        raise ValueError("rate regression needs at least two resolutions")
    xc = x - x.mean()
    sxx = float(np.sum(xc * xc))
    slope = float(np.sum(xc * (y - y.mean())) / sxx)
    dof = len(x) - 2
    if dof <= 0:
        return slope, 0.0
    resid = y - (y.mean() + slope * xc)
    stderr = float(np.sqrt(np.sum(resid * resid) / dof / sxx))
    return slope, stderr


@dataclass(frozen=True)
class RateReport:
    """Per-resolution L^p sup-errors and the regressed empirical order."""

    scheme: str
    per_resolution: tuple[tuple[int, float, float], ...]
    fitted_order: float
    fit_stderr: float
    theoretical_orders: dict
    diagnostics: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [n for n, _, _ in self.per_resolution]
        if ns != sorted(ns):
            raise ValueError("per_resolution must be sorted by n")
        if any(err <= 0 for _, err, _ in self.per_resolution):
            raise ValueError("per-resolution errors must be strictly positive")

    def to_json_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "per_resolution": [
                {"n": n, "mean_error": err, "stderr": se}
                for n, err, se in self.per_resolution
            ],
            "fitted_order": self.fitted_order,
            "fit_stderr": self.fit_stderr,
            "theoretical_orders": self.theoretical_orders,
            "diagnostics": self.diagnostics,
            "metadata": self.metadata,
        }

    def csv_rows(self) -> list[list]:
        rows = [["n", "mean_error", "stderr"]]
        for n, err, se in self.per_resolution:
            rows.append([n, repr(float(err)), repr(float(se))])
        return rows


@dataclass(frozen=True)
class SchemeComparison:
    """Side-by-side rate reports for the two schemes on one configuration."""

    time_change: RateReport
    euler_maruyama: RateReport

    def to_json_dict(self) -> dict:
        return {
            "time_change": self.time_change.to_json_dict(),
            "euler_maruyama": self.euler_maruyama.to_json_dict(),
        }


def _collect(config: ExperimentConfig, jobs: int) -> list[SampleResult]:
    indices = range(config.samples)
    if jobs <= 1:
        coeff = config.build_coefficient()
        sampler = _em_sample if config.scheme == SCHEME_EULER_MARUYAMA else _tc_sample
        results = []
        for i in indices:
            try:
                results.append(sampler(config, coeff, i))
            except Exception as exc:
                raise ExperimentError(i, _origin_module(exc), str(exc)) from exc
        return results
    mapping = config.to_mapping()
    chunk = max(1, config.samples // (jobs * 8))
    out: list[SampleResult] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for item in pool.map(_worker, [mapping] * config.samples, indices, chunksize=chunk):
            if item[0] == "error":
                _, idx, kind, message = item
                raise ExperimentError(idx, kind, message)
            out.append(item[1])
    return out


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> RateReport:
    """Estimate L^p sup-errors over the ladder and regress the empirical order.

    Deterministic for a given master_seed, independent of ``jobs``: samples
    are keyed by index and reduced in index order.
    """
    if config.scheme == SCHEME_COMPARE:
        raise ConfigError("scheme: run_experiment takes a single scheme; use compare_schemes")
    config.validate_for_run()
    jobs = 1 if jobs is None else max(1, int(jobs))
    results = _collect(config, jobs)

    errs = np.stack([r.sup_errors for r in results])
    p = config.p
    powered = errs**p
    lp_mean = np.mean(powered, axis=0) ** (1.0 / p)
    m = config.samples
    se_pow = np.std(powered, axis=0, ddof=1) / np.sqrt(m)
    # delta method: d/dm m^(1/p) = (1/p) m^(1/p - 1)
    stderr = np.where(lp_mean > 0, lp_mean ** (1.0 - p) / p * se_pow, 0.0)

    coeff = config.build_coefficient()
    usable = lp_mean >= ERROR_FLOOR
    excluded = [int(n) for n, u in zip(config.resolutions, usable) if not u]
    ns_fit = np.asarray(config.resolutions)[usable]
    if len(ns_fit) < 2:
        raise ExperimentError(
            -1, "experiment", "fewer than two resolutions above the error floor"
        )
    fitted, fit_se = fit_loglog(ns_fit, lp_mean[usable])

    diagnostics = {
        "excluded_resolutions": excluded,
        "c2_squared": coeff.c2**2,
        "lanes": "numba" if _kernels.USING_NUMBA else "numpy",
    }
    if results[0].inverse_clock_sup is not None:
        excess = max(
            float(np.max(r.inverse_clock_sup - coeff.c2**2 * r.clock_sup))
            for r in results
        )
        diagnostics["inverse_clock_bound_max_excess"] = excess

    per_resolution = tuple(
        (int(n), float(e), float(se))
        for n, e, se in zip(config.resolutions, lp_mean, stderr)
    )
    return RateReport(
        scheme=config.scheme,
        per_resolution=per_resolution,
        fitted_order=fitted,
        fit_stderr=fit_se,
        theoretical_orders={
            "holder": OVERLAY_ALPHA**2 * coeff.holder_beta,
            "smooth": OVERLAY_ALPHA,
        },
        diagnostics=diagnostics,
        metadata={"config": config.to_mapping(), "tool_version": f"tcsde {__version__}"},
    )


def compare_schemes(config: ExperimentConfig, jobs: Optional[int] = None) -> SchemeComparison:
    """Run both schemes on the same configuration and return paired reports.

    Refuses coefficients with declared spatial Hoelder exponent below 1/2:
    the Euler-Maruyama baseline has no strong-convergence guarantee there,
    so its self-convergence slope would not measure a limit object.
    """
    coeff = config.build_coefficient()
    if coeff.holder_beta < 0.5:
        raise ConfigError(
            "scheme: cannot compare against Euler-Maruyama for declared "
            f"beta={coeff.holder_beta} < 0.5 (no strong-convergence target "
            "exists for the baseline on such rough coefficients)"
        )
    tc = run_experiment(replace(config, scheme=SCHEME_TIME_CHANGE), jobs=jobs)
    em = run_experiment(replace(config, scheme=SCHEME_EULER_MARUYAMA), jobs=jobs)
    return SchemeComparison(time_change=tc, euler_maruyama=em)


def default_jobs() -> int:
    return os.cpu_count() or 1
