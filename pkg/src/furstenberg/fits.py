"""Log-linear decay fits shared by the boundary and walk estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitIllConditioned


@dataclass
class DecayFit:
    """Least-squares fit of log(value) against n.

    slope is in nats per step; rho_hat = exp(slope) is the per-step decay
    ratio. slope_stderr is the usual OLS standard error, so slope +- z *
    slope_stderr gives a confidence interval under the fit model.
    """

    grid: list[int]
    values: list[float]
    slope: float
    intercept: float
    r2: float
    rho_hat: float
    slope_stderr: float
    n_fit_points: int
    warnings: list[str] = field(default_factory=list)

    def slope_ci(self, z: float = 1.96) -> tuple[float, float]:
        half = z * self.slope_stderr
        return (self.slope - half, self.slope + half)

    def to_json(self) -> dict:
        return {
            "n_grid": list(self.grid),
            "values": list(self.values),
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "rho_hat": self.rho_hat,
            "slope_stderr": self.slope_stderr,
            "n_fit_points": self.n_fit_points,
            "warnings": list(self.warnings),
        }


def geometric_grid(start: int, stop: int, ratio: float = 1.3) -> list[int]:
    """Default checkpoint grid ceil(start * ratio^k) up to stop: log-linear
    fits are best conditioned when abscissae are geometrically spaced."""
    if start < 1 or stop < start:
        raise ValueError("need 1 <= start <= stop")
    grid = []
    value = float(start)
    while True:
        n = math.ceil(value)
        if n > stop:
            break
        if not grid or n > grid[-1]:
            grid.append(n)
        value *= ratio
    if grid[-1] != stop:
        grid.append(stop)
    return grid


def ols_line(x: np.ndarray, y: np.ndarray):
    """Slope, intercept, R^2 and the slope standard error of y ~ a + b x."""
    n = len(x)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx == 0.0:
        raise FitIllConditioned("all abscissae coincide")
    slope = float(((x - xbar) * (y - ybar)).sum()) / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - ybar) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-24 else 0.0)
    if n > 2:
        sigma2 = ss_res / (n - 2)
        stderr = math.sqrt(sigma2 / sxx)
    else:
        stderr = 0.0
    return slope, intercept, r2, stderr


def fit_log_decay(grid, values, floor: float | None = None) -> DecayFit:
    """Fit log(values) against grid.

    Non-positive values are excluded unless a floor is given, in which case
    they are clipped to the floor (used for failure fractions that hit
    exactly zero). Requires at least 4 grid points and at least 2 usable
    values.
    """
    grid = [int(n) for n in grid]
    values = [float(v) for v in values]
    if len(grid) < 4:
        raise FitIllConditioned(f"need at least 4 grid points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise FitIllConditioned("grid must be strictly increasing")
    warnings = []
    xs, ys = [], []
    clipped = 0
    for n, v in zip(grid, values):
        if v > 0:
            xs.append(n)
            ys.append(math.log(v))
        elif floor is not None:
            xs.append(n)
            ys.append(math.log(floor))
            clipped += 1
    if clipped:
        warnings.append(f"{clipped} non-positive values clipped to floor {floor:g}")
    if len(xs) < 2:
        raise FitIllConditioned("fewer than 2 positive values to fit")
    if len(xs) < len(grid):
        warnings.append(f"{len(grid) - len(xs)} non-positive values excluded from fit")
    slope, intercept, r2, stderr = ols_line(np.array(xs, float), np.array(ys, float))
    return DecayFit(
        grid=grid,
        values=values,
        slope=slope,
        intercept=intercept,
        r2=r2,
        rho_hat=math.exp(slope),
        slope_stderr=stderr,
        n_fit_points=len(xs),
        warnings=warnings,
    )
