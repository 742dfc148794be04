"""The core scheme: a random clock run on Brownian time, and its inverse.

The SDE solution is the Brownian driver read at a reparameterized time: the
clock maps Brownian time s to the SDE time accumulated at rate
1/sigma^2(clock(s), driver(s)). It is integrated by explicit Euler on the
driver's knot grid, stopping at the first knot where the clock passes the
requested SDE horizon. The clock is piecewise linear and strictly increasing,
so its inverse is available in closed form per knot interval; the approximate
solution evaluates the driver's linear interpolant at the inverted time.

Because both the clock and the driver interpolant are piecewise linear, the
approximate solution itself is piecewise linear in SDE time with breakpoints
exactly at the clock's knot values, which the error harness exploits to take
exact sup-norms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO

import numpy as np

from . import _kernels
from .brownian import BrownianPath, generate_path
from .diffusion import DiffusionCoefficient
from .errors import ContractViolationError, PathExhaustedError

__all__ = [
    "TimeChangePath",
    "SamplePath",
    "build_time_change",
    "simulate_sample_path",
    "required_horizon",
    "write_solution_csv",
]

#: guard against division by a vanishing clock step; impossible while the
#: declared bounds hold (steps are >= 1/(n*C2^2)) so hitting it means the
#: coefficient lied.
MIN_CLOCK_STEP = 1e-300


@dataclass(frozen=True)
class TimeChangePath:
    """Euler solution of the clock ODE on the grid k/n, up to the first knot >= T."""

    n: int
    clock: np.ndarray
    sde_horizon: float

    def __post_init__(self):
        clock = np.ascontiguousarray(self.clock, dtype=np.float64)
        clock.flags.writeable = False
        object.__setattr__(self, "clock", clock)

    @property
    def knot_count(self) -> int:
        return len(self.clock)

    @property
    def knots_s(self) -> np.ndarray:
        """Brownian-time knots 0, 1/n, ..., K/n."""
        return np.arange(self.knot_count) / self.n

    @property
    def last_brownian_time(self) -> float:
        return (self.knot_count - 1) / self.n

    def value(self, s: float) -> float:
        """Clock value at Brownian time s by the same piecewise-linear rule."""
        last = self.knot_count - 1
        if not 0.0 <= s <= last / self.n:
            raise ValueError(f"Brownian time {s} outside [0, {last / self.n}]")
        k = int(s * self.n)
        while k + 1 <= last and (k + 1) / self.n <= s:
            k += 1
        while k > 0 and k / self.n > s:
            k -= 1
        if k == last:
            return float(self.clock[last])
        theta = (s - k / self.n) / ((k + 1) / self.n - k / self.n)
        return float(self.clock[k] + theta * (self.clock[k + 1] - self.clock[k]))

    def invert(self, t: float) -> float:
        """Brownian time at which the clock reaches SDE time t; exact at knots."""
        if not 0.0 <= t <= self.clock[-1]:
            raise ValueError(
                f"SDE time {t} outside the constructed clock range [0, {self.clock[-1]}]"
            )
        j = int(np.searchsorted(self.clock, t, side="right")) - 1
        if j >= self.knot_count - 1:
            return (self.knot_count - 1) / self.n
        step = self.clock[j + 1] - self.clock[j]
        if step < MIN_CLOCK_STEP:
            raise ContractViolationError(
                f"degenerate clock step {step} at knot {j}: coefficient bounds broken"
            )
        return (j + (t - self.clock[j]) / step) / self.n

    def invert_many(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if t.size and (t.min() < 0.0 or t.max() > self.clock[-1]):
            raise ValueError("SDE times outside the constructed clock range")
        j = np.searchsorted(self.clock, t, side="right") - 1
        last = j >= self.knot_count - 1
        j = np.where(last, 0, j)
        s = (j + (t - self.clock[j]) / (self.clock[j + 1] - self.clock[j])) / self.n
        return np.where(last, (self.knot_count - 1) / self.n, s)


def build_time_change(
    driver: BrownianPath, sigma: DiffusionCoefficient, sde_horizon: float
) -> TimeChangePath:
    """Integrate the clock along the driver until it first reaches sde_horizon.

    Raises PathExhaustedError when the driver has too few knots (the caller
    extends it) and ContractViolationError when sigma leaves its declared
    bounds at a knot the integration actually visits.
    """
    if sde_horizon <= 0:
        raise ValueError(f"sde_horizon must be positive, got {sde_horizon}")
    inv_n = 1.0 / driver.n
    args = (driver.values, inv_n, sde_horizon, sigma.c1, sigma.c2, sigma.bound_tolerance)
    if sigma.kernel_kind is not None:
        buf, k, status = _kernels.clock_knots_kind(sigma.kernel_kind, sigma.kernel_params, *args)
    else:
        buf, k, status = _kernels.clock_knots_callable(sigma.evaluate, *args)
    if status == _kernels.BOUNDS_BREACH:
        t_bad = float(buf[k])
        x_bad = float(driver.values[k])
        raise ContractViolationError(
            f"{sigma.label}: value {sigma.evaluate(t_bad, x_bad)} at "
            f"(t={t_bad}, x={x_bad}) leaves declared bounds "
            f"[{sigma.c1}, {sigma.c2}] (clock knot {k})"
        )
    if status == _kernels.EXHAUSTED:
        raise PathExhaustedError(
            f"driver ends at Brownian time {driver.horizon} with the clock at "
            f"{buf[k]} < {sde_horizon}"
        )
    return TimeChangePath(n=driver.n, clock=buf[: k + 1].copy(), sde_horizon=sde_horizon)


@dataclass(frozen=True)
class SamplePath:
    """Approximate SDE solution t -> driver interpolant at the inverted clock."""

    driver: BrownianPath
    time_change: TimeChangePath
    sde_horizon: float

    def __post_init__(self):
        if self.time_change.n != self.driver.n:
            raise ValueError(
                f"resolution mismatch: clock n={self.time_change.n}, "
                f"driver n={self.driver.n}"
            )
        if self.time_change.clock[-1] < self.sde_horizon:
            raise ValueError("clock does not cover the SDE horizon")

    @property
    def n(self) -> int:
        return self.driver.n

    def evaluate(self, t: float) -> float:
        if not 0.0 <= t <= self.sde_horizon:
            raise ValueError(f"SDE time {t} outside [0, {self.sde_horizon}]")
        return self.driver.interpolate(self.time_change.invert(t))

    def evaluate_many(self, t: np.ndarray) -> np.ndarray:
        """Vectorized evaluation through the piecewise-linear composite."""
        t = np.asarray(t, dtype=np.float64)
        if t.size and (t.min() < 0.0 or t.max() > self.sde_horizon):
            raise ValueError("SDE times outside the sample path domain")
        kc = self.time_change.knot_count
        return _kernels.pl_eval_many(
            self.time_change.clock, self.driver.values[:kc], t
        )

    def breakpoints(self) -> np.ndarray:
        """SDE times where the path changes slope: clock knots <= T, plus 0 and T.

        The path is affine between consecutive breakpoints.
        """
        clock = self.time_change.clock
        inside = clock[clock <= self.sde_horizon]
        pts = np.append(inside, self.sde_horizon)
        if len(pts) >= 2 and pts[-1] == pts[-2]:
            pts = pts[:-1]
        return pts


def required_horizon(sigma: DiffusionCoefficient, sde_horizon: float, n: int) -> float:
    """Brownian horizon provisioned so the clock reaches the SDE horizon.

    The clock grows at rate >= 1/C2^2, so C2^2 * T Brownian time always
    suffices; one extra step plus a 10% margin covers the overshoot knot and
    rounding. If a path still runs out it is extended, preserving its prefix.
    """
    return 1.1 * (sigma.c2**2 * sde_horizon) + 2.0 / n


def simulate_sample_path(
    sigma: DiffusionCoefficient,
    sde_horizon: float,
    x0: float,
    n: int,
    master_seed: int,
    sample_index: int,
) -> SamplePath:
    """One-stop construction of a seeded approximate solution path."""
    horizon = required_horizon(sigma, sde_horizon, n)
    driver = generate_path(n, horizon, x0, master_seed, sample_index)
    while True:
        try:
            tc = build_time_change(driver, sigma, sde_horizon)
        except PathExhaustedError:
            horizon *= 1.5
            driver = driver.extended(horizon)
            continue
        return SamplePath(driver=driver, time_change=tc, sde_horizon=sde_horizon)


def write_solution_csv(sample: SamplePath, stream: IO[str]) -> None:
    """Dump (t, x_hat) over the path's breakpoints for plotting."""
    pts = sample.breakpoints()
    vals = sample.evaluate_many(pts)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t", "x_hat"])
    for t, v in zip(pts, vals):
        writer.writerow([repr(float(t)), repr(float(v))])
