"""Streaming random matrix products and Lyapunov-spectrum estimators.

Right walks multiply new draws on the right (x_n = g_1 ... g_n), left
walks on the left (y_n = g_n ... g_1). Two accumulation modes exist:

* direct: the literal product, guarded against entry overflow at 1e250;
* renormalized: a QR-reorthonormalized frame plus accumulated logs of the
  triangular diagonal (the standard re-orthonormalization scheme for
  Lyapunov spectra). For right walks the transposed product is tracked,
  which has the same singular values step for step.

A scale-tracking product (matrix divided by its largest entry, log scale
kept separately) backs every estimator that needs singular vectors of
x_n at large n; all quantities read off it are scale-invariant.

Replicas are independent (one rng stream each) and merge by averaging,
so they may run concurrently; a single WalkState or ScaledProduct is
never shared between tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateImage, Overflow
from .fits import DecayFit, fit_log_decay
from .linalg import (
    ProjectivePoint,
    SquareMatrix,
    as_matrix,
    loose_kak,
    operator_norm,
    sine_distance,
    svd_kak,
    wedge_power,
    wedge_vector,
)
from .measures import MeasureSpec, rng_stream, sample_index

OVERFLOW_LIMIT = 1e250
GAP_NOISE_FLOOR = 1e-12


@dataclass
class WalkState:
    """Snapshot of a streaming product after n steps."""

    mode: str  # "direct" | "renormalized"
    side: str  # "right" | "left"
    n: int
    stream: int
    product: SquareMatrix | None = None
    max_abs: float = 0.0
    frame: np.ndarray | None = None
    log_diag: np.ndarray | None = None


@dataclass
class LyapunovEstimate:
    """Per-exponent means and standard errors across replicas, plus the
    wedge-norm cross-check values for the first two exponents."""

    lambdas: list[float]
    stderrs: list[float]
    n: int
    replicas: int
    wedge_lambda1: float
    wedge_lambda1_stderr: float
    wedge_sum12: float
    wedge_sum12_stderr: float
    wedge_prefix: int
    warnings: list[str] = field(default_factory=list)

    def check(self) -> list[str]:
        """Diagnostics for the estimate-level invariants (ordering within
        two combined standard errors; exponent sum near zero)."""
        out = []
        for i in range(len(self.lambdas) - 1):
            slack = 2.0 * math.hypot(self.stderrs[i], self.stderrs[i + 1]) + GAP_NOISE_FLOOR
            if self.lambdas[i] < self.lambdas[i + 1] - slack:
                out.append(f"ordering violated at index {i}")
        total = sum(self.lambdas)
        total_se = math.sqrt(sum(s * s for s in self.stderrs))
        if abs(total) > 3.0 * total_se + 1e-9:
            out.append(f"exponent sum {total:.3e} not within 3 stderr of 0")
        return out

    def to_json(self) -> dict:
        return {
            "lambdas": self.lambdas,
            "stderrs": self.stderrs,
            "n": self.n,
            "replicas": self.replicas,
            "wedge_lambda1": self.wedge_lambda1,
            "wedge_lambda1_stderr": self.wedge_lambda1_stderr,
            "wedge_sum12": self.wedge_sum12,
            "wedge_sum12_stderr": self.wedge_sum12_stderr,
            "wedge_prefix": self.wedge_prefix,
            "warnings": self.warnings,
        }


@dataclass
class GapEstimate:
    gap: float
    stderr: float
    ci_low: float
    ci_high: float
    gap_positive: bool
    n: int
    replicas: int

    def to_json(self) -> dict:
        return {
            "gap": self.gap,
            "stderr": self.stderr,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "gap_positive": self.gap_positive,
            "n": self.n,
            "replicas": self.replicas,
        }


@dataclass
class CocycleDrift:
    """Estimate of lim (1/n) sup_x E[s(x_n, x)], the sup replaced by a max
    over a finite net (a lower bound of the sup)."""

    estimate: float
    stderr: float
    cocycle: str
    n: int
    replicas: int
    net_size: int

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "cocycle": self.cocycle,
            "n": self.n,
            "replicas": self.replicas,
            "net_size": self.net_size,
        }


@dataclass
class RatioSeries:
    """Monte Carlo means of a_j(n)/a_1(n) over a checkpoint grid, with a
    log-linear decay fit per j.

    Two summaries are kept: the arithmetic mean (whose decay rate is the
    annealed one, strictly slower than the gap when fluctuations are
    large) and the geometric mean ("typical"), whose rate matches the
    Lyapunov gap."""

    grid: list[int]
    means: dict[int, list[float]]
    fits: dict[int, DecayFit]
    typical: dict[int, list[float]]
    typical_fits: dict[int, DecayFit]
    replicas: int

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "means": {str(j): v for j, v in self.means.items()},
            "fits": {str(j): f.to_json() for j, f in self.fits.items()},
            "typical": {str(j): v for j, v in self.typical.items()},
            "typical_fits": {str(j): f.to_json() for j, f in self.typical_fits.items()},
            "replicas": self.replicas,
        }


# ---------------------------------------------------------------------------
# Walk drivers
# ---------------------------------------------------------------------------

def _qr_positive(b: np.ndarray):
    q, r = np.linalg.qr(b)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, np.abs(np.diag(r))


def run_walk(
    spec: MeasureSpec,
    n: int,
    seed: int,
    side: str = "right",
    mode: str = "direct",
    checkpoints=None,
    stream: int = 0,
) -> list[WalkState]:
    """Stream the walk to n steps, returning snapshots at the checkpoints
    (default: only at n). Checkpoints must be increasing and at most n.

    In direct mode the snapshot product is exactly the product of the
    first m draws, multiplied on the side requested; Overflow is raised
    as soon as any entry would pass 1e250. In renormalized mode the
    snapshot holds the orthogonal frame and the accumulated log-diagonal.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', not {side!r}")
    if mode not in ("direct", "renormalized"):
        raise ValueError(f"mode must be 'direct' or 'renormalized', not {mode!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    checkpoints = sorted(set(checkpoints)) if checkpoints else [n]
    if checkpoints[-1] > n or checkpoints[0] < 1:
        raise ValueError("checkpoints must lie in [1, n]")
    d = spec.dim
    rng = rng_stream(seed, stream)
    atoms = spec.matrices()
    snapshots = []
    if mode == "direct":
        prod = np.eye(d)
        for m in range(1, checkpoints[-1] + 1):
            g = atoms[sample_index(spec, rng)]
            prod = prod @ g if side == "right" else g @ prod
            max_abs = float(np.abs(prod).max())
            if max_abs > OVERFLOW_LIMIT or not np.isfinite(max_abs):
                raise Overflow(f"entry magnitude passed {OVERFLOW_LIMIT:.0e} at step {m}")
            if m in checkpoints:
                snapshots.append(
                    WalkState(mode=mode, side=side, n=m, stream=stream,
                              product=SquareMatrix(prod.copy()), max_abs=max_abs)
                )
    else:
        frame = np.eye(d)
        log_diag = np.zeros(d)
        for m in range(1, checkpoints[-1] + 1):
            g = atoms[sample_index(spec, rng)]
            step = g.T if side == "right" else g
            frame, rdiag = _qr_positive(step @ frame)
            log_diag = log_diag + np.log(rdiag)
            if m in checkpoints:
                snapshots.append(
                    WalkState(mode=mode, side=side, n=m, stream=stream,
                              frame=frame.copy(), log_diag=log_diag.copy())
                )
    return snapshots


class ScaledProduct:
    """Product matrix kept normalized by its largest entry magnitude, with
    the log of the removed scale accumulated separately. Singular vectors,
    singular-value ratios and log-norms of the true product are all
    recoverable; only absolute small singular values degrade (they fall
    below float resolution once the spread passes ~1e15)."""

    __slots__ = ("mat", "log_scale", "n", "side")

    def __init__(self, d: int, side: str = "right"):
        self.mat = np.eye(d)
        self.log_scale = 0.0
        self.n = 0
        self.side = side

    def step(self, g: np.ndarray):
        self.mat = self.mat @ g if self.side == "right" else g @ self.mat
        peak = float(np.abs(self.mat).max())
        if peak > 1e100 or peak < 1e-100:
            self.mat /= peak
            self.log_scale += math.log(peak)
        self.n += 1

    def log_operator_norm(self) -> float:
        return self.log_scale + math.log(operator_norm(self.mat))

    def log_wedge_norm(self, i: int) -> float:
        return i * self.log_scale + math.log(operator_norm(wedge_power(self.mat, i)))

    def kak(self):
        return svd_kak(self.mat)

    def frames(self):
        """Frame decomposition tolerant of numerical rank deficiency (the
        top directions stay accurate at any conditioning)."""
        return loose_kak(self.mat)


# ---------------------------------------------------------------------------
# Lyapunov spectrum
# ---------------------------------------------------------------------------

WEDGE_SPREAD_CAP = 30.0  # log(a_1/a_2) ceiling keeping 2x2 minors accurate


def _qr_lambda_replica(spec, n, seed, stream, wedge_prefix=0):
    """One replica: QR-accumulated log diagonal over n steps, and, when
    wedge_prefix > 0, log norms of the product and its second wedge on a
    prefix of the same draws. The wedge measurement stops early (per
    replica) once the accumulated singular spread passes WEDGE_SPREAD_CAP,
    beyond which the second wedge of the floored product drowns in minor
    cancellation."""
    d = spec.dim
    atoms = spec.matrices()
    rng = rng_stream(seed, stream)
    frame = np.eye(d)
    log_diag = np.zeros(d)
    scaled = ScaledProduct(d, side="right") if wedge_prefix > 0 else None
    last_good = None
    for m in range(1, n + 1):
        g = atoms[sample_index(spec, rng)]
        frame, rdiag = _qr_positive(g.T @ frame)
        log_diag += np.log(rdiag)
        if scaled is not None and m <= wedge_prefix:
            scaled.step(g)
            spread = log_diag[0] - log_diag[1] if d >= 2 else 0.0
            if spread <= WEDGE_SPREAD_CAP or last_good is None:
                last_good = (m, scaled.mat.copy(), scaled.log_scale)
    wedge1 = wedge12 = None
    if last_good is not None:
        m, mat, log_scale = last_good
        wedge1 = (log_scale + math.log(operator_norm(mat))) / m
        if d >= 2:
            norm2 = operator_norm(wedge_power(mat, 2))
            if norm2 > 0.0:
                wedge12 = (2.0 * log_scale + math.log(norm2)) / m
            else:
                wedge12 = math.nan
    return log_diag / n, wedge1, wedge12


def _mean_stderr(values: np.ndarray):
    mean = float(values.mean())
    if len(values) > 1:
        stderr = float(values.std(ddof=1) / math.sqrt(len(values)))
    else:
        stderr = 0.0
    return mean, stderr


def lyapunov_spectrum(spec: MeasureSpec, n: int, replicas: int, seed: int) -> LyapunovEstimate:
    """Estimate the full Lyapunov spectrum.

    Per replica the estimate is the accumulated QR log-diagonal divided by
    n. The top exponent and the sum of the first two are cross-checked
    against direct wedge-norm estimates (1/m) log ||wedge^i x_m|| computed
    on a shorter prefix m of the same draws; the prefix is capped so the
    second wedge stays above float cancellation. The two estimators must
    agree within three combined standard errors; a warning is recorded if
    they do not.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    if replicas < 8:
        raise ValueError("replicas must be >= 8")
    d = spec.dim
    # Provisional gap from a short pilot pass fixes the safe wedge prefix.
    pilot = np.array(
        [_qr_lambda_replica(spec, min(n, 200), seed, 10_000 + r)[0] for r in range(4)]
    )
    gap_prov = max(float(pilot[:, 0].mean() - pilot[:, 1].mean()), 0.0) if d >= 2 else 0.0
    wedge_prefix = min(n, 512, max(16, int(30.0 / max(gap_prov, 30.0 / 512))))

    lams = np.empty((replicas, d))
    w1 = np.empty(replicas)
    w12 = np.empty(replicas)
    for r in range(replicas):
        lam, wedge1, wedge12 = _qr_lambda_replica(spec, n, seed, r, wedge_prefix=wedge_prefix)
        lams[r] = lam
        w1[r] = wedge1
        w12[r] = wedge12

    lambdas, stderrs = [], []
    for i in range(d):
        m, s = _mean_stderr(lams[:, i])
        lambdas.append(m)
        stderrs.append(s)
    w1_mean, w1_se = _mean_stderr(w1)
    w12_valid = w12[np.isfinite(w12)]
    if len(w12_valid) < len(w12):
        dropped = len(w12) - len(w12_valid)
    else:
        dropped = 0
    w12_mean, w12_se = _mean_stderr(w12_valid) if len(w12_valid) else (math.nan, math.nan)

    warnings = []
    if dropped:
        warnings.append(f"{dropped} replicas dropped from the second-wedge cross-check")
    qr_sum12 = lambdas[0] + (lambdas[1] if d >= 2 else 0.0)
    qr_sum12_se = math.hypot(stderrs[0], stderrs[1] if d >= 2 else 0.0)
    if abs(lambdas[0] - w1_mean) > 3.0 * math.hypot(stderrs[0], w1_se) + GAP_NOISE_FLOOR:
        warnings.append(
            f"top exponent: QR {lambdas[0]:.6f} and wedge {w1_mean:.6f} disagree beyond 3 stderr"
        )
    if abs(qr_sum12 - w12_mean) > 3.0 * math.hypot(qr_sum12_se, w12_se) + GAP_NOISE_FLOOR:
        warnings.append(
            f"sum of first two: QR {qr_sum12:.6f} and wedge {w12_mean:.6f} disagree beyond 3 stderr"
        )
    return LyapunovEstimate(
        lambdas=lambdas,
        stderrs=stderrs,
        n=n,
        replicas=replicas,
        wedge_lambda1=w1_mean,
        wedge_lambda1_stderr=w1_se,
        wedge_sum12=w12_mean,
        wedge_sum12_stderr=w12_se,
        wedge_prefix=wedge_prefix,
        warnings=warnings,
    )


def top_gap(spec: MeasureSpec, n: int, replicas: int, seed: int, z: float = 1.96) -> GapEstimate:
    """lambda_1 - lambda_2 with a confidence interval from paired
    per-replica differences. The interval half-width carries a small
    additive floor so that exactly-isometric walks (all singular values 1
    up to rounding) do not spuriously report a positive gap."""
    if n < 100:
        raise ValueError("n must be >= 100")
    if replicas < 8:
        raise ValueError("replicas must be >= 8")
    if spec.dim < 2:
        raise ValueError("gap needs d >= 2")
    diffs = np.empty(replicas)
    for r in range(replicas):
        lam, _, _ = _qr_lambda_replica(spec, n, seed, r)
        diffs[r] = lam[0] - lam[1]
    gap, stderr = _mean_stderr(diffs)
    half = z * stderr + GAP_NOISE_FLOOR
    return GapEstimate(
        gap=gap,
        stderr=stderr,
        ci_low=gap - half,
        ci_high=gap + half,
        gap_positive=(gap - half) > 0.0,
        n=n,
        replicas=replicas,
    )


# ---------------------------------------------------------------------------
# Cocycles
# ---------------------------------------------------------------------------

def cocycle_norm(g, p: ProjectivePoint) -> float:
    """log ||g x|| / ||x|| for a unit representative x of p."""
    g = as_matrix(g)
    image = g.arr @ p.rep
    norm = float(np.linalg.norm(image))
    if norm < 1e-300:
        raise DegenerateImage("image norm underflowed")
    return math.log(norm)


def cocycle_two_point(g, p: ProjectivePoint, q: ProjectivePoint) -> float:
    """log of the contraction ratio delta(g p, g q) / delta(p, q)."""
    g = as_matrix(g)
    before = sine_distance(p.rep, q.rep)
    if before == 0.0:
        raise DegenerateImage("two-point cocycle needs distinct points")
    gp = g.arr @ p.rep
    gq = g.arr @ q.rep
    np_, nq = np.linalg.norm(gp), np.linalg.norm(gq)
    if np_ < 1e-300 or nq < 1e-300:
        raise DegenerateImage("image norm underflowed")
    after = sine_distance(gp / np_, gq / nq)
    if after == 0.0:
        raise DegenerateImage("images collapsed to the same line")
    return math.log(after / before)


def projective_net(d: int, seed: int, extra_random: int = 50) -> list[ProjectivePoint]:
    """Deterministic net on P(R^d): coordinate axes, two-coordinate
    bisectors (both signs), skewed two-coordinate combinations, plus seeded
    random directions."""
    points = [np.eye(d)[i] for i in range(d)]
    for i in range(d):
        for j in range(d):
            if i != j:
                points.append((np.eye(d)[i] + np.eye(d)[j]) / math.sqrt(2.0))
                points.append((2.0 * np.eye(d)[i] + np.eye(d)[j]) / math.sqrt(5.0))
    rng = rng_stream(seed, 777)
    for _ in range(extra_random):
        points.append(rng.standard_normal(d))
    return [ProjectivePoint(v) for v in points]


def cocycle_drift(
    spec: MeasureSpec, n: int, replicas: int, seed: int, cocycle: str = "two_point"
) -> CocycleDrift:
    """Estimate the drift l = lim (1/n) sup_x E[s(x_n, x)] for the norm or
    two-point cocycle, with the sup replaced by a max over a finite net
    (so the result is a lower bound of the sup).

    The two-point value log(delta(x_n p, x_n q) / delta(p, q)) is
    evaluated as log |wedge^2 x_n (p ^ q)| - log |x_n p| - log |x_n q|
    - log |p ^ q|, with the second wedge accumulated as its own scaled
    product: the direct distance formula cancels below float precision
    once the contraction passes ~1e-16, while the multiplicative wedge
    walk stays accurate at any n.
    """
    if cocycle not in ("norm", "two_point"):
        raise ValueError("cocycle must be 'norm' or 'two_point'")
    d = spec.dim
    atoms = spec.matrices()
    net = projective_net(d, seed)
    two_point = cocycle == "two_point"
    if two_point:
        pairs = [(net[i], net[(i + 1) % len(net)]) for i in range(len(net))]
        pairs = [(p, q) for p, q in pairs if sine_distance(p.rep, q.rep) > 1e-6]
        wedge_atoms = [wedge_power(g, 2).arr for g in atoms]
        base = [(p.rep, q.rep, wedge_vector(np.stack([p.rep, q.rep], axis=1)))
                for p, q in pairs]
        per_x = np.empty((replicas, len(pairs)))
    else:
        per_x = np.empty((replicas, len(net)))
    wedge_dim = math.comb(d, 2)
    for r in range(replicas):
        scaled = ScaledProduct(d, side="right")
        wedge = ScaledProduct(wedge_dim, side="right") if two_point else None
        rng = rng_stream(seed, r)
        for _ in range(n):
            i = sample_index(spec, rng)
            scaled.step(atoms[i])
            if two_point:
                wedge.step(wedge_atoms[i])
        m = scaled.mat
        if not two_point:
            for ix, p in enumerate(net):
                per_x[r, ix] = scaled.log_scale + math.log(np.linalg.norm(m @ p.rep))
        else:
            for ix, (p, q, w) in enumerate(base):
                num = wedge.log_scale + math.log(np.linalg.norm(wedge.mat @ w))
                den_p = scaled.log_scale + math.log(np.linalg.norm(m @ p))
                den_q = scaled.log_scale + math.log(np.linalg.norm(m @ q))
                per_x[r, ix] = num - den_p - den_q - math.log(np.linalg.norm(w))
    means = per_x.mean(axis=0) / n
    best = int(np.argmax(means))
    if replicas > 1:
        stderr = float(per_x[:, best].std(ddof=1) / math.sqrt(replicas)) / n
    else:
        stderr = 0.0
    return CocycleDrift(
        estimate=float(means[best]),
        stderr=stderr,
        cocycle=cocycle,
        n=n,
        replicas=replicas,
        net_size=per_x.shape[1],
    )


# ---------------------------------------------------------------------------
# Singular value ratio series
# ---------------------------------------------------------------------------

def singular_ratio_series(spec: MeasureSpec, n_grid, replicas: int, seed: int) -> RatioSeries:
    """Monte Carlo means of a_j(n)/a_1(n), j = 2..d, over the checkpoint
    grid, with a log-linear fit of each mean series. Ratios are read from
    scale-tracked products, so they are reliable down to about 1e-15;
    callers should keep the grid short enough that means stay above that."""
    n_grid = sorted(set(int(x) for x in n_grid))
    if not n_grid or n_grid[0] < 1:
        raise ValueError("n_grid must contain positive integers")
    d = spec.dim
    if d < 2:
        raise ValueError("ratio series needs d >= 2")
    atoms = spec.matrices()
    sums = {j: np.zeros(len(n_grid)) for j in range(2, d + 1)}
    log_sums = {j: np.zeros(len(n_grid)) for j in range(2, d + 1)}
    for r in range(replicas):
        rng = rng_stream(seed, r)
        scaled = ScaledProduct(d, side="right")
        pos = 0
        for m in range(1, n_grid[-1] + 1):
            scaled.step(atoms[sample_index(spec, rng)])
            if m == n_grid[pos]:
                a = scaled.kak().a
                for j in range(2, d + 1):
                    ratio = a[j - 1] / a[0]
                    sums[j][pos] += ratio
                    log_sums[j][pos] += math.log(max(ratio, 1e-300))
                pos += 1
                if pos == len(n_grid):
                    break
    means = {j: (sums[j] / replicas).tolist() for j in sums}
    typical = {j: np.exp(log_sums[j] / replicas).tolist() for j in log_sums}
    fits = {j: fit_log_decay(n_grid, means[j]) for j in means}
    typical_fits = {j: fit_log_decay(n_grid, typical[j]) for j in typical}
    return RatioSeries(grid=n_grid, means=means, fits=fits, typical=typical,
                       typical_fits=typical_fits, replicas=replicas)
