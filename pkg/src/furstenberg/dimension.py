"""Hausdorff-dimension lower bounds for the stationary law.

Checks the defining inequality mass(eps-neighborhood of a hyperplane)
<= C eps^alpha on an adversarial finite family of hyperplanes: the true
bound quantifies over all hyperplanes, which is not computable, so the
family is built to hug the sample (hyperplanes through nearest-neighbor
clusters, through the densest directions, plus a random batch). The
fitted alpha therefore upper-bounds nothing and lower-bounds nothing
formally, but positivity against an adversarial family is the meaningful
desk-scale check, and a Grassberger-Procaccia style correlation exponent
provides an independent second estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AllMassesZero, EmptySample
from .boundary import BoundarySample, sample_stationary
from .fits import ols_line
from .linalg import ProjectiveHyperplane
from .measures import MeasureSpec, rng_stream


@dataclass
class DimensionFit:
    """Power-law fit of worst-case hyperplane mass against epsilon."""

    eps_grid: list[float]
    masses: list[float]
    alpha: float
    alpha_stderr: float
    alpha_ci_low: float
    alpha_ci_high: float
    alpha_positive: bool
    c_hat: float
    eps0: float
    r2: float
    family_size: int
    family_description: str
    sample_count: int
    mass_table: list[list[float]] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "eps_grid": self.eps_grid,
            "masses": self.masses,
            "alpha": self.alpha,
            "alpha_stderr": self.alpha_stderr,
            "alpha_ci_low": self.alpha_ci_low,
            "alpha_ci_high": self.alpha_ci_high,
            "alpha_positive": self.alpha_positive,
            "c_hat": self.c_hat,
            "eps0": self.eps0,
            "r2": self.r2,
            "family_size": self.family_size,
            "family_description": self.family_description,
            "sample_count": self.sample_count,
        }


@dataclass
class CorrelationDimension:
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    r_grid: list[float]
    correlations: list[float]
    subsamples: int

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "r_grid": self.r_grid,
            "correlations": self.correlations,
            "subsamples": self.subsamples,
        }


def hyperplane_mass(sample: BoundarySample, h: ProjectiveHyperplane, eps: float) -> float:
    """Fraction of sample points within distance eps of the hyperplane."""
    if not sample.points:
        raise EmptySample("sample contains no points")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    dists = np.abs(sample.matrix() @ h.normal)
    return float((dists <= eps).mean())


def _pairwise_sine(points: np.ndarray, others: np.ndarray | None = None) -> np.ndarray:
    """Sine distances between unit rows: sqrt(1 - <p,q>^2), clipped at 0."""
    q = points if others is None else others
    grams = np.clip(points @ q.T, -1.0, 1.0)
    return np.sqrt(np.clip(1.0 - grams**2, 0.0, None))


def _local_normal(points: np.ndarray, anchor: int, order: np.ndarray, d: int) -> np.ndarray:
    """Unit normal of a hyperplane through the anchor point and its d-2
    nearest neighbors (for d = 2 the hyperplane through the point itself)."""
    rows = points[order[:d - 1]] if d > 2 else points[anchor:anchor + 1]
    _, _, vt = np.linalg.svd(rows, full_matrices=True)
    return vt[-1]


def adversarial_hyperplanes(
    sample: BoundarySample, budget: int, seed: int
) -> list[ProjectiveHyperplane]:
    """Hyperplane family hugging the sample: (a) through closest sample
    pairs, (b) through the densest directions found by greedy covering,
    (c) a seeded random batch. Built to make the per-eps max mass a strong
    lower bound of the sup over all hyperplanes."""
    points = sample.matrix()
    count, d = points.shape
    rng = rng_stream(seed, 171)
    # Work on a subsample for pair search to keep the distance matrix small.
    probe = min(count, 1200)
    probe_idx = rng.choice(count, size=probe, replace=False) if count > probe else np.arange(count)
    pp = points[probe_idx]
    dists = _pairwise_sine(pp)
    np.fill_diagonal(dists, np.inf)

    normals = []
    n_pairs = max(budget // 2, 1)
    flat = np.argsort(dists, axis=None)
    seen = set()
    for k in flat:
        i = int(k // probe)
        if i in seen:
            continue
        seen.add(i)
        order = np.argsort(dists[i])
        normals.append(_local_normal(pp, i, np.concatenate(([i], order)), d))
        if len(normals) >= n_pairs:
            break

    # Densest directions: greedy covering at the median nearest-neighbor
    # radius, largest neighborhoods first.
    n_dense = max(budget // 4, 1)
    nn = dists.min(axis=1)
    radius = max(float(np.median(nn)) * 4.0, 1e-12)
    neighbor_counts = (dists <= radius).sum(axis=1)
    covered = np.zeros(probe, dtype=bool)
    for i in np.argsort(-neighbor_counts):
        if covered[i]:
            continue
        covered |= dists[int(i)] <= radius
        order = np.argsort(dists[int(i)])
        normals.append(_local_normal(pp, int(i), np.concatenate(([int(i)], order)), d))
        if len(normals) >= n_pairs + n_dense:
            break

    while len(normals) < budget:
        normals.append(rng.standard_normal(d))
    return [ProjectiveHyperplane(v) for v in normals[:budget]]


def dimension_fit_for_sample(
    sample: BoundarySample,
    eps_grid,
    hyperplane_budget: int,
    seed: int,
    family_description: str = "closest-pairs + densest-directions + random",
) -> DimensionFit:
    """Worst-case mass per eps over the adversarial family and the
    power-law fit of log max-mass against log eps. Grid points with zero
    mass or eps below the sample resolution 1/count are excluded from the
    fit (they only witness that the sample is finite)."""
    eps_grid = sorted(float(e) for e in eps_grid)
    if len(eps_grid) < 5:
        raise ValueError("eps grid needs at least 5 points")
    if not sample.points:
        raise EmptySample("sample contains no points")
    count = len(sample.points)
    family = adversarial_hyperplanes(sample, hyperplane_budget, seed)
    normals = np.stack([h.normal for h in family])
    dists = np.abs(sample.matrix() @ normals.T)  # (count, family)
    mass_table = [
        [float((dists[:, j] <= eps).mean()) for j in range(len(family))]
        for eps in eps_grid
    ]
    masses = [max(row) for row in mass_table]

    resolution = 1.0 / count
    xs, ys = [], []
    for eps, mass in zip(eps_grid, masses):
        if mass > 0.0 and eps >= resolution:
            xs.append(math.log(eps))
            ys.append(math.log(mass))
    if not xs:
        raise AllMassesZero("no usable (eps, mass) points; enlarge eps or the sample")
    if len(xs) < 2:
        raise AllMassesZero("fewer than 2 usable fit points; enlarge the eps grid")
    slope, intercept, r2, stderr = ols_line(np.array(xs), np.array(ys))
    half = 1.96 * stderr
    return DimensionFit(
        eps_grid=eps_grid,
        masses=masses,
        alpha=slope,
        alpha_stderr=stderr,
        alpha_ci_low=slope - half,
        alpha_ci_high=slope + half,
        alpha_positive=(slope - half) > 0.0,
        c_hat=math.exp(intercept),
        eps0=eps_grid[-1],
        r2=r2,
        family_size=len(family),
        family_description=family_description,
        sample_count=count,
        mass_table=mass_table,
    )


def dimension_lower_bound(
    spec: MeasureSpec,
    n: int,
    count: int,
    seed: int,
    eps_grid=None,
    hyperplane_budget: int = 120,
) -> DimensionFit:
    """Stationary sample plus adversarial mass fit; alpha_positive holds
    when the 95% interval for the fitted exponent stays above zero."""
    if count < 2000:
        raise ValueError("count must be >= 2000 for a stable mass curve")
    if eps_grid is None:
        eps_grid = np.geomspace(0.01, 0.3, 8).tolist()
    sample = sample_stationary(spec, n, count, seed)
    return dimension_fit_for_sample(sample, eps_grid, hyperplane_budget, seed)


def correlation_dimension(
    sample: BoundarySample,
    r_grid=None,
    subsamples: int = 5,
    seed: int = 0,
) -> CorrelationDimension:
    """Correlation-integral exponent: slope of log C(r) against log r,
    where C(r) is the fraction of point pairs closer than r in the sine
    metric. The confidence interval comes from disjoint subsamples."""
    if len(sample.points) < 4:
        raise EmptySample("need at least 4 points")
    points = sample.matrix()
    count = len(sample.points)
    dists = _pairwise_sine(points)
    iu = np.triu_indices(count, k=1)
    flat = dists[iu]
    positive = flat[flat > 1e-12]
    if len(positive) == 0:
        # Degenerate (e.g. Dirac) sample: all pairs coincide.
        return CorrelationDimension(0.0, 0.0, 0.0, 0.0, [], [], subsamples)
    if r_grid is None:
        lo = float(np.quantile(positive, 0.05))
        hi = float(np.quantile(positive, 0.5))
        lo = max(lo, 1e-10)
        hi = max(hi, lo * 10.0)
        r_grid = np.geomspace(lo, hi, 8).tolist()
    r_arr = np.array(sorted(r_grid))
    corr = [(flat <= r).mean() for r in r_arr]

    def _slope(sub_flat):
        cs = np.array([(sub_flat <= r).mean() for r in r_arr])
        keep = cs > 0
        if keep.sum() < 2:
            return None
        s, _, _, _ = ols_line(np.log(r_arr[keep]), np.log(cs[keep]))
        return s

    full = _slope(flat)
    rng = rng_stream(seed, 99)
    perm = rng.permutation(count)
    slopes = []
    for part in np.array_split(perm, subsamples):
        if len(part) < 4:
            continue
        sub = dists[np.ix_(part, part)]
        sub_flat = sub[np.triu_indices(len(part), k=1)]
        s = _slope(sub_flat)
        if s is not None:
            slopes.append(s)
    if len(slopes) >= 2:
        stderr = float(np.std(slopes, ddof=1) / math.sqrt(len(slopes)))
    else:
        stderr = 0.0
    half = 1.96 * stderr
    return CorrelationDimension(
        estimate=float(full),
        stderr=stderr,
        ci_low=float(full) - half,
        ci_high=float(full) + half,
        r_grid=r_arr.tolist(),
        correlations=[float(c) for c in corr],
        subsamples=len(slopes),
    )
