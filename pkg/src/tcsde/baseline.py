"""Euler-Maruyama reference scheme on shared Brownian drivers.

The recursion X[k+1] = X[k] + sigma(k/n, X[k]) * dW[k] consumes the same
BrownianPath type at matching resolution, so coarse/fine comparisons share
driving noise by subsampling. Note the driver here lives on SDE time; the
time-change scheme's driver lives on Brownian time. The two schemes coincide
as processes only for sigma == 1, so cross-scheme experiments compare each
scheme's self-convergence rate, never pathwise differences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from . import _kernels
from .brownian import BrownianPath
from .diffusion import DiffusionCoefficient

__all__ = ["EmPath", "em_simulate", "write_em_csv"]


@dataclass(frozen=True)
class EmPath:
    """Euler-Maruyama iterates at SDE times k/n, k = 0..ceil(n*T)."""

    n: int
    values: np.ndarray
    sde_horizon: float

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def knot_count(self) -> int:
        return len(self.values)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.knot_count) / self.n

    def evaluate_many(self, t: np.ndarray) -> np.ndarray:
        """The continuous comparison path: linear interpolation between iterates."""
        t = np.asarray(t, dtype=np.float64)
        if t.size and (t.min() < 0.0 or t.max() > (self.knot_count - 1) / self.n):
            raise ValueError("times outside the simulated grid")
        return _kernels.pl_eval_many(self.grid, self.values, t)

    def breakpoints(self) -> np.ndarray:
        grid = self.grid
        inside = grid[grid <= self.sde_horizon]
        pts = np.append(inside, self.sde_horizon)
        if len(pts) >= 2 and pts[-1] == pts[-2]:
            pts = pts[:-1]
        return pts


def em_simulate(
    sigma: DiffusionCoefficient,
    driver: BrownianPath,
    sde_horizon: float,
    x0: float,
) -> EmPath:
    """Run the recursion over ceil(n*T) steps of the driver's increments."""
    if sde_horizon <= 0:
        raise ValueError(f"sde_horizon must be positive, got {sde_horizon}")
    n = driver.n
    steps = math.ceil(n * sde_horizon - 1e-9)
    if driver.knot_count < steps + 1:
        raise ValueError(
            f"driver too short: {driver.knot_count} knots, need {steps + 1} "
            f"for horizon {sde_horizon} at resolution {n}"
        )
    increments = np.diff(driver.values[: steps + 1])
    if sigma.kernel_kind is not None:
        values = _kernels.em_values_kind(
            sigma.kernel_kind, sigma.kernel_params, increments, n, x0
        )
    else:
        values = _kernels.em_values_callable(sigma.evaluate, increments, n, x0)
    return EmPath(n=n, values=values, sde_horizon=sde_horizon)


def write_em_csv(path: EmPath, stream: IO[str]) -> None:
    """Dump (t, x_hat) over the grid, same shape as the time-change dump."""
    pts = path.breakpoints()
    vals = path.evaluate_many(pts)
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t", "x_hat"])
    for t, v in zip(pts, vals):
        writer.writerow([repr(float(t)), repr(float(v))])
