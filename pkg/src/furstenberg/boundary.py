"""Stationary-measure sampling and exponential-convergence estimators.

The limit direction is never materialized: every convergence statement is
estimated through two-start or consecutive-step proxies, which bound the
distance to the limit by the triangle inequality. Flag-valued statistics
run at the full flag level for d <= 4 and fall back to the top projective
line above that (wedge dimensions grow too fast otherwise); each result
records which level was used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FitIllConditioned, TooManyDegenerate
from .fits import DecayFit, fit_log_decay, ols_line
from .linalg import (
    DegenerateFlag,
    FlagPoint,
    ProjectivePoint,
    sine_distance,
    wedge_power,
    wedge_vector,
)
from .measures import MeasureSpec, rng_stream, sample_index, sample_indices
from .walk import ScaledProduct, _qr_positive

RESOLUTION_TARGET = 1e-6
FLAG_LEVEL_MAX_DIM = 4


@dataclass
class BoundarySample:
    """Independent draws of x_n . start, approximating the stationary law."""

    points: list[ProjectivePoint]
    n: int
    seed: int
    side: str = "right-limit"
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def matrix(self) -> np.ndarray:
        return np.stack([p.rep for p in self.points])


@dataclass
class KakConvergence:
    side: str
    level: str
    fit: DecayFit
    stderrs: list[float]
    skipped: int
    total: int

    def to_json(self) -> dict:
        return {
            "side": self.side,
            "level": self.level,
            "fit": self.fit.to_json(),
            "stderrs": self.stderrs,
            "skipped": self.skipped,
            "total": self.total,
        }


@dataclass
class UNonconvergence:
    grid: list[int]
    means: list[float]
    stderrs: list[float]
    windowed_mean: float
    floor: float
    floor_ok: bool
    fit: DecayFit
    level: str
    skipped: int
    total: int

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "means": self.means,
            "stderrs": self.stderrs,
            "windowed_mean": self.windowed_mean,
            "floor": self.floor,
            "floor_ok": self.floor_ok,
            "fit": self.fit.to_json(),
            "level": self.level,
            "skipped": self.skipped,
            "total": self.total,
        }


@dataclass
class IndependenceResult:
    grid: list[int]
    phi_ids: list[str]
    discrepancies: dict[str, list[float]]
    max_series: list[float]
    fit: DecayFit
    level: str
    samples: int
    n_star: int
    skipped: int

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "phi_ids": self.phi_ids,
            "discrepancies": self.discrepancies,
            "max_series": self.max_series,
            "fit": self.fit.to_json(),
            "level": self.level,
            "samples": self.samples,
            "n_star": self.n_star,
            "skipped": self.skipped,
        }


# ---------------------------------------------------------------------------
# Stationary sampling
# ---------------------------------------------------------------------------

def _probe_gap(spec: MeasureSpec, seed: int, n_probe: int = 64, replicas: int = 8) -> float:
    """Cheap top-gap probe used only for resolution warnings."""
    d = spec.dim
    atoms = spec.matrices()
    total = 0.0
    for r in range(replicas):
        rng = rng_stream(seed, 90_000 + r)
        frame = np.eye(d)
        log_diag = np.zeros(d)
        for _ in range(n_probe):
            g = atoms[sample_index(spec, rng)]
            frame, rdiag = _qr_positive(g.T @ frame)
            log_diag += np.log(rdiag)
        total += (log_diag[0] - log_diag[1]) / n_probe
    return max(total / replicas, 0.0)


def default_start(d: int) -> ProjectivePoint:
    return ProjectivePoint(np.ones(d))


def sample_stationary(
    spec: MeasureSpec,
    n: int,
    count: int,
    seed: int,
    start: ProjectivePoint | None = None,
) -> BoundarySample:
    """count independent draws of x_n . start.

    The product is applied to the start vector factor by factor from the
    right (last draw first), renormalizing at each step, which reproduces
    the direction of x_n . start exactly. A warning is recorded when the
    estimated contraction exp(-gap * n) resolves the stationary law more
    coarsely than 1e-6.
    """
    d = spec.dim
    if start is None:
        start = default_start(d)
    warnings = []
    gap = _probe_gap(spec, seed)
    resolution = math.exp(-gap * n)
    if resolution > RESOLUTION_TARGET:
        warnings.append(
            f"estimated resolution {resolution:.2e} above {RESOLUTION_TARGET:.0e};"
            f" increase n (probe gap {gap:.3f})"
        )
    atoms = spec.matrices()
    points = []
    for s in range(count):
        rng = rng_stream(seed, s)
        idx = sample_indices(spec, rng, n)
        v = start.rep.copy()
        # x_n . v multiplies draws g_1 ... g_n onto v from the right, i.e.
        # the last draw acts first.
        for i in idx[::-1]:
            v = atoms[i] @ v
            v /= np.linalg.norm(v)
        points.append(ProjectivePoint(v))
    return BoundarySample(points=points, n=n, seed=seed, warnings=warnings)


def push_forward(spec: MeasureSpec, sample: BoundarySample, seed: int) -> BoundarySample:
    """One more left multiplication by a fresh draw per point: if the
    sample has the stationary law, the pushed sample does too."""
    atoms = spec.matrices()
    rng = rng_stream(seed, 123_456)
    idx = sample_indices(spec, rng, len(sample.points))
    pushed = [ProjectivePoint(atoms[i] @ p.rep) for i, p in zip(idx, sample.points)]
    return BoundarySample(points=pushed, n=sample.n + 1, seed=sample.seed,
                          warnings=list(sample.warnings))


# ---------------------------------------------------------------------------
# Two-start contraction rate
# ---------------------------------------------------------------------------

def convergence_rate(
    spec: MeasureSpec,
    n_grid,
    replicas: int,
    seed: int,
    start_pair: tuple[ProjectivePoint, ProjectivePoint] | None = None,
) -> DecayFit:
    """Fit the typical two-start distance delta(x_n . p, x_n . q) against n
    for two fixed starts, i.e. the log of its geometric mean.

    The two-start distance bounds the distance to the limit direction, so
    a negative slope certifies exponential convergence at rate exp(slope).
    The geometric mean is the right summary here: per replica, log delta
    drifts at the top-gap rate with sqrt(n) fluctuations, so the
    arithmetic mean decays at a strictly slower large-deviation rate and
    would not reproduce the gap it is cross-checked against.

    log delta is evaluated through the identity delta(Xp, Xq) =
    |wedge^2 X (p ^ q)| / (|Xp| |Xq|), with the second wedge accumulated
    as its own scaled product: the direct sine formula collapses to zero
    below float resolution, which a log mean cannot tolerate.
    """
    n_grid = sorted(set(int(x) for x in n_grid))
    if len(n_grid) < 4:
        raise FitIllConditioned(f"need at least 4 grid points, got {len(n_grid)}")
    d = spec.dim
    if start_pair is None:
        start_pair = (default_start(d), ProjectivePoint(np.eye(d)[0]))
    p, q = start_pair
    base = sine_distance(p.rep, q.rep)
    if base == 0.0:
        raise ValueError("start pair must be two distinct lines")
    atoms = spec.matrices()
    wedge_atoms = [wedge_power(g, 2).arr for g in atoms]
    w_pq = wedge_vector(np.stack([p.rep, q.rep], axis=1))
    log_w = math.log(np.linalg.norm(w_pq))
    log_sums = np.zeros(len(n_grid))
    for r in range(replicas):
        rng = rng_stream(seed, r)
        scaled = ScaledProduct(d, side="right")
        wedge = ScaledProduct(len(w_pq), side="right")
        pos = 0
        for m in range(1, n_grid[-1] + 1):
            i = sample_index(spec, rng)
            scaled.step(atoms[i])
            wedge.step(wedge_atoms[i])
            if m == n_grid[pos]:
                num = wedge.log_scale + math.log(np.linalg.norm(wedge.mat @ w_pq))
                den_p = scaled.log_scale + math.log(np.linalg.norm(scaled.mat @ p.rep))
                den_q = scaled.log_scale + math.log(np.linalg.norm(scaled.mat @ q.rep))
                log_sums[pos] += num - den_p - den_q
                pos += 1
                if pos == len(n_grid):
                    break
    mean_logs = log_sums / replicas
    xs = np.array(n_grid, dtype=float)
    slope, intercept, r2, stderr = ols_line(xs, mean_logs)
    if abs(slope) * (xs[-1] - xs[0]) < 1e-9:
        # Total predicted change below a nano-nat: any fit here explains
        # rounding noise, not decay.
        r2 = 0.0
    values = [math.exp(v) if v > -700 else 0.0 for v in mean_logs]
    return DecayFit(
        grid=n_grid,
        values=values,
        slope=slope,
        intercept=intercept,
        r2=r2,
        rho_hat=math.exp(slope) if slope > -700 else 0.0,
        slope_stderr=stderr,
        n_fit_points=len(n_grid),
    )


# ---------------------------------------------------------------------------
# Flag extraction at the chosen level
# ---------------------------------------------------------------------------

def boundary_level(d: int) -> str:
    return "flag" if d <= FLAG_LEVEL_MAX_DIM else "top-line"


SPREAD_TRUST_LIMIT = 3e12  # past this the trailing frame directions are noise


def _check_separation(a: np.ndarray, level: str):
    # Division-free: a trailing value may be exactly zero when the product
    # is rank-one at float precision, which for d = 2 means maximal
    # separation (the complement direction is pinned by orthogonality).
    if not a[0] > (1.0 + 1e-10) * a[1]:
        raise DegenerateFlag("top singular gap not separated")
    if level == "flag" and len(a) >= 3:
        for i in range(1, len(a) - 1):
            if not a[i] > (1.0 + 1e-10) * a[i + 1]:
                raise DegenerateFlag("singular values not strictly separated")
        # Middle frame directions are only trustworthy while the full
        # spread resolves in floats.
        if not a[-1] * SPREAD_TRUST_LIMIT > a[0]:
            raise DegenerateFlag("singular spread past float resolution")


def _k_side(kak, level: str) -> tuple[ProjectivePoint, ...]:
    _check_separation(kak.a, level)
    if level == "flag":
        return FlagPoint(kak.k).wedge_lines
    return (ProjectivePoint(kak.k[:, 0]),)


def _u_side(kak, level: str) -> tuple[ProjectivePoint, ...]:
    _check_separation(kak.a, level)
    if level == "flag":
        return FlagPoint(kak.u.T).wedge_lines
    return (ProjectivePoint(kak.u[0, :]),)


def _tuple_distance(x: tuple[ProjectivePoint, ...], y: tuple[ProjectivePoint, ...]) -> float:
    return max(sine_distance(a.rep, b.rep) for a, b in zip(x, y))


def _consecutive_distances(spec, n_grid, replicas, seed, side_extractor, walk_side):
    """Mean consecutive-step distances E[dist(F(x_n), F(x_{n+1}))] on the
    grid; degenerate snapshots invalidate the pairs they touch."""
    n_grid = sorted(set(int(x) for x in n_grid))
    d = spec.dim
    level = boundary_level(d)
    atoms = spec.matrices()
    needed = sorted({m for n in n_grid for m in (n, n + 1)})
    sums = np.zeros(len(n_grid))
    sq_sums = np.zeros(len(n_grid))
    counts = np.zeros(len(n_grid), dtype=int)
    skipped = 0
    for r in range(replicas):
        rng = rng_stream(seed, r)
        scaled = ScaledProduct(d, side=walk_side)
        frames: dict[int, tuple | None] = {}
        pos = 0
        for m in range(1, needed[-1] + 1):
            scaled.step(atoms[sample_index(spec, rng)])
            if pos < len(needed) and m == needed[pos]:
                try:
                    frames[m] = side_extractor(scaled.frames(), level)
                except DegenerateFlag:
                    # Singular gap tie or conditioning past float resolution:
                    # the snapshot is unusable either way.
                    frames[m] = None
                pos += 1
        for i, n in enumerate(n_grid):
            a, b = frames.get(n), frames.get(n + 1)
            if a is None or b is None:
                skipped += 1
                continue
            dist = _tuple_distance(a, b)
            sums[i] += dist
            sq_sums[i] += dist * dist
            counts[i] += 1
    total = replicas * len(n_grid)
    if skipped > 0.10 * total:
        raise TooManyDegenerate(
            f"{skipped}/{total} snapshots had degenerate singular gaps"
        )
    means, stderrs = [], []
    for s, sq, c in zip(sums, sq_sums, counts):
        if c == 0:
            means.append(0.0)
            stderrs.append(0.0)
            continue
        mean = s / c
        var = max(sq / c - mean * mean, 0.0)
        means.append(mean)
        stderrs.append(math.sqrt(var / c) if c > 1 else 0.0)
    return n_grid, means, stderrs, skipped, total, level


def kak_convergence(
    spec: MeasureSpec, n_grid, replicas: int, seed: int, side: str = "right-k"
) -> KakConvergence:
    """Consecutive-step decay of the converging orthogonal components:
    the left frame of the right walk ("right-k") or the right frame of the
    left walk ("left-u"). A negative fitted slope certifies exponential
    Cauchy convergence."""
    if side == "right-k":
        grid, means, stderrs, skipped, total, level = _consecutive_distances(
            spec, n_grid, replicas, seed, _k_side, "right"
        )
    elif side == "left-u":
        grid, means, stderrs, skipped, total, level = _consecutive_distances(
            spec, n_grid, replicas, seed, _u_side, "left"
        )
    else:
        raise ValueError("side must be 'right-k' or 'left-u'")
    fit = fit_log_decay(grid, means, floor=1e-300)
    return KakConvergence(side=side, level=level, fit=fit, stderrs=stderrs,
                          skipped=skipped, total=total)


def u_nonconvergence(
    spec: MeasureSpec, n_grid, replicas: int, seed: int, floor: float = 0.05
) -> UNonconvergence:
    """Consecutive-step distances of the right frame of the *right* walk,
    which does not converge when the stationary law is non-atomic: the
    windowed mean over the last third of the grid must stay above the
    floor, and the fitted slope shows no decay trend."""
    grid, means, stderrs, skipped, total, level = _consecutive_distances(
        spec, n_grid, replicas, seed, _u_side, "right"
    )
    fit = fit_log_decay(grid, means, floor=1e-300)
    tail = max(1, len(grid) // 3)
    windowed = float(np.mean(means[-tail:]))
    return UNonconvergence(
        grid=grid,
        means=means,
        stderrs=stderrs,
        windowed_mean=windowed,
        floor=floor,
        floor_ok=windowed > floor,
        fit=fit,
        level=level,
        skipped=skipped,
        total=total,
    )


# ---------------------------------------------------------------------------
# Asymptotic independence of the two orthogonal components
# ---------------------------------------------------------------------------

def _reference_flag_lines(d: int, level: str, which: str) -> tuple[ProjectivePoint, ...]:
    if which == "p0":
        frame = np.eye(d)
    else:
        # Fixed generic frame: orthonormalization of a Hilbert-like matrix.
        raw = np.array([[1.0 / (1.0 + i + j) for j in range(d)] for i in range(d)])
        frame, _ = _qr_positive(raw)
    if level == "flag":
        return FlagPoint(frame).wedge_lines
    return (ProjectivePoint(frame[:, 0]),)


def lipschitz_family(d: int, level: str):
    """The built-in test functions on (k-side flag, u-side flag) pairs.

    phi1 is the incidence distance between the flag and the dual flag's
    kernel set; phi2 and phi3 compare against fixed references; phi2*phi3
    is a separable product; const is identically 1/2 (zero Lipschitz
    constant, so its discrepancy must vanish exactly).
    """
    p0 = _reference_flag_lines(d, level, "p0")
    q0 = _reference_flag_lines(d, level, "q0")

    def phi1(x, y):
        return min(abs(float(a.rep @ b.rep)) for a, b in zip(x, y))

    def phi2(x, _y):
        return _tuple_distance(x, p0)

    def phi3(_x, y):
        return min(abs(float(a.rep @ b.rep)) for a, b in zip(q0, y))

    def phi23(x, y):
        return phi2(x, y) * phi3(x, y)

    def const(_x, _y):
        return 0.5

    return [("phi1", phi1), ("phi2", phi2), ("phi3", phi3), ("phi2*phi3", phi23),
            ("const", const)]


def independence_gap(
    spec: MeasureSpec,
    n_grid,
    samples: int,
    seed: int,
    test_functions=None,
    n_star: int | None = None,
) -> IndependenceResult:
    """Discrepancy between the joint law of (k-side, u-side) components of
    x_n and the product of the two marginal limits.

    The joint term averages phi over `samples` walks at each grid n. The
    product term pairs a batch of k-side components of right walks at n*
    with an independent batch of u-side components of *left* walks at n*
    (whose right frame converges), n* defaulting to four times the largest
    grid point.
    """
    n_grid = sorted(set(int(x) for x in n_grid))
    d = spec.dim
    level = boundary_level(d)
    family = test_functions if test_functions is not None else lipschitz_family(d, level)
    phi_ids = [name for name, _ in family]
    if n_star is None:
        n_star = 4 * n_grid[-1]
    atoms = spec.matrices()

    # Joint batch: both components of the same walk, along the grid.
    joint_sums = {name: np.zeros(len(n_grid)) for name in phi_ids}
    joint_counts = np.zeros(len(n_grid), dtype=int)
    skipped = 0
    for s in range(samples):
        rng = rng_stream(seed, s)
        scaled = ScaledProduct(d, side="right")
        pos = 0
        for m in range(1, n_grid[-1] + 1):
            scaled.step(atoms[sample_index(spec, rng)])
            if m == n_grid[pos]:
                try:
                    kak = scaled.frames()
                    kside = _k_side(kak, level)
                    uside = _u_side(kak, level)
                except DegenerateFlag:
                    skipped += 1
                else:
                    joint_counts[pos] += 1
                    for name, phi in family:
                        joint_sums[name][pos] += phi(kside, uside)
                pos += 1
                if pos == len(n_grid):
                    break

    # Marginal batches: independent streams, evaluated once at n*.
    def _marginal(side: str, extractor, offset: int):
        out = []
        for s in range(samples):
            rng = rng_stream(seed, offset + s)
            scaled = ScaledProduct(d, side=side)
            for _ in range(n_star):
                scaled.step(atoms[sample_index(spec, rng)])
            try:
                out.append(extractor(scaled.frames(), level))
            except DegenerateFlag:
                out.append(None)
        return out

    v_batch = _marginal("right", _k_side, 1_000_000)
    u_batch = _marginal("left", _u_side, 2_000_000)
    usable = [
        (v, u) for v, u in zip(v_batch, u_batch) if v is not None and u is not None
    ]
    if len(usable) < max(1, samples // 2):
        raise TooManyDegenerate(
            f"only {len(usable)}/{samples} marginal draws usable at n*={n_star};"
            " lower n_star or the flag level"
        )

    product_means = {}
    for name, phi in family:
        product_means[name] = float(np.mean([phi(v, u) for v, u in usable]))

    discrepancies = {}
    for name, _ in family:
        series = []
        for pos in range(len(n_grid)):
            if joint_counts[pos] == 0:
                series.append(0.0)
                continue
            joint = joint_sums[name][pos] / joint_counts[pos]
            series.append(abs(joint - product_means[name]))
        discrepancies[name] = series
    max_series = [
        max(discrepancies[name][pos] for name in phi_ids) for pos in range(len(n_grid))
    ]
    fit = fit_log_decay(n_grid, max_series, floor=1e-300)
    return IndependenceResult(
        grid=n_grid,
        phi_ids=phi_ids,
        discrepancies=discrepancies,
        max_series=max_series,
        fit=fit,
        level=level,
        samples=samples,
        n_star=n_star,
        skipped=skipped,
    )
