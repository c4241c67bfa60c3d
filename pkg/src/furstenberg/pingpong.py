"""Freeness certificates for pairs of unimodular matrices.

A certificate checks the four conditions of the table-tennis argument on
the projective space of the standard representation: attracting balls
around the top left-singular directions, repelling neighborhoods of the
hyperplanes orthogonal to the top right-singular directions, quantified
separation between all of them, and explicit witnesses that no attracting
ball together with a repelling neighborhood covers the whole space. A
passing certificate implies the two projective transformations generate a
free group of rank 2; since a matrix word equal to +-I acts trivially on
projective space, the matrix group itself is then free.

Certification against the standard representation only is deliberately
conservative: pairs that would separate only in a higher wedge factor are
reported "not certified", never "not free". An exact-arithmetic word
enumeration provides the soundness check on the other side: a certified
pair must admit no short relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGap, ExactEntriesMissing, FurstenbergError, OutOfRange
from .fits import DecayFit, fit_log_decay
from .linalg import (
    ProjectiveHyperplane,
    ProjectivePoint,
    SquareMatrix,
    as_matrix,
    loose_kak,
    svd_kak,
)
from .measures import MeasureSpec, RationalMatrix, rng_stream, sample_index
from .walk import ScaledProduct

GAP_TOL = 1e-10
NOISE_GUARD = 1e-7
EPS_CAP = 0.45
EPS_FLOOR = 1e-7
GRID_STEPS = 21


def contraction_epsilon(g) -> float:
    """sqrt(a_2 / a_1): the smallest eps for which g is eps-contracting."""
    kak = svd_kak(g)
    return math.sqrt(kak.a[1] / kak.a[0])


def attracting_point(g) -> ProjectivePoint:
    """Top left-singular direction (first column of k), the center of the
    attracting ball."""
    kak = svd_kak(g)
    if kak.a[0] / kak.a[1] <= 1.0 + GAP_TOL:
        raise DegenerateGap("top singular values are not separated")
    return ProjectivePoint(kak.k[:, 0])


def repelling_hyperplane(g) -> ProjectiveHyperplane:
    """Hyperplane spanned by right-singular directions 2..d, i.e. the
    kernel of the top row of u."""
    kak = svd_kak(g)
    if kak.a[0] / kak.a[1] <= 1.0 + GAP_TOL:
        raise DegenerateGap("top singular values are not separated")
    return ProjectiveHyperplane(kak.u[0, :])


@dataclass
class LetterData:
    """Per-generator data entering the certificate conditions."""

    contraction_ratio: float  # a_2 / a_1
    v: list[float] | None  # attracting point (None when gap degenerate)
    hyperplane: list[float] | None  # repelling hyperplane normal
    contraction_margin: float | None = None  # eps^2 - ratio at the used eps
    proximality_margin: float | None = None  # delta(v, H) - 2 eps

    def to_json(self) -> dict:
        return {
            "contraction_ratio": self.contraction_ratio,
            "v": self.v,
            "hyperplane": self.hyperplane,
            "contraction_margin": self.contraction_margin,
            "proximality_margin": self.proximality_margin,
        }


@dataclass
class PingPongCertificate:
    epsilon: float
    passed: bool
    dim: int
    letters: dict[str, LetterData]
    condition_passed: dict[str, bool]
    cross_margins: dict[str, float]
    witnesses: dict[str, dict | None]
    grid: list[dict]
    statement: str

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "passed": self.passed,
            "dim": self.dim,
            "letters": {k: v.to_json() for k, v in self.letters.items()},
            "condition_passed": self.condition_passed,
            "cross_margins": self.cross_margins,
            "witnesses": self.witnesses,
            "grid": self.grid,
            "statement": self.statement,
        }


_STATEMENT = (
    "All four separation conditions hold on real projective space, so the "
    "projective images of the two matrices generate a free group of rank 2. "
    "A matrix word evaluating to +I or -I acts trivially on projective "
    "space and must therefore be the empty word: the matrix group generated "
    "by the pair is free."
)

LETTERS = ("g", "g^-1", "h", "h^-1")
_G_SIDE = ("g", "g^-1")
_H_SIDE = ("h", "h^-1")


def _witness_candidates(d: int, seed: int):
    pts = [np.eye(d)[i] for i in range(d)]
    for i in range(d):
        for j in range(d):
            if i < j:
                pts.append((np.eye(d)[i] + np.eye(d)[j]) / math.sqrt(2))
                pts.append((np.eye(d)[i] - np.eye(d)[j]) / math.sqrt(2))
    rng = rng_stream(seed, 4242)
    for _ in range(100):
        pts.append(rng.standard_normal(d))
    return [ProjectivePoint(v) for v in pts]


def _union_pairs() -> list[tuple[str, str]]:
    pairs = [(s, s) for s in LETTERS]
    pairs += [(s, t) for s in _G_SIDE for t in _H_SIDE]
    pairs += [(s, t) for s in _H_SIDE for t in _G_SIDE]
    return pairs


def _evaluate(data, eps, candidates):
    """Evaluate the four conditions at a fixed eps. Returns (passed,
    per-condition flags, per-letter margins, cross margins, witnesses,
    failed-condition names)."""
    failed = []

    cond1 = True
    for s in LETTERS:
        ratio = data[s].contraction_ratio
        data[s].contraction_margin = eps * eps - ratio
        # Relative guard: the ratio itself is computed to ~1e-14 relative,
        # and eps scales down with the walk length, so an absolute guard
        # would reject every long-walk certificate.
        if not ratio < eps * eps * (1.0 - NOISE_GUARD):
            cond1 = False
    if not cond1:
        failed.append("contraction")

    cond2 = True
    for s in LETTERS:
        if data[s].v is None or data[s].hyperplane is None:
            data[s].proximality_margin = None
            cond2 = False
            continue
        dist = abs(float(np.dot(data[s].v, data[s].hyperplane)))
        data[s].proximality_margin = dist - 2.0 * eps
        if not data[s].proximality_margin > NOISE_GUARD:
            cond2 = False
    if not cond2:
        failed.append("proximality")

    cond3 = True
    cross = {}
    for s, t in [(a, b) for a in _G_SIDE for b in _H_SIDE] + [
        (a, b) for a in _H_SIDE for b in _G_SIDE
    ]:
        key = f"v_{s}|H_{t}"
        if data[s].v is None or data[t].hyperplane is None:
            cross[key] = None
            cond3 = False
            continue
        dist = abs(float(np.dot(data[s].v, data[t].hyperplane)))
        cross[key] = dist - 2.0 * eps
        if not cross[key] > NOISE_GUARD:
            cond3 = False
    if not cond3:
        failed.append("general-position")

    cond4 = True
    witnesses = {}
    for s, t in _union_pairs():
        key = f"V_{s}|H_{t}"
        if data[s].v is None or data[t].hyperplane is None:
            witnesses[key] = None
            cond4 = False
            continue
        v = np.array(data[s].v)
        normal = np.array(data[t].hyperplane)
        best = None
        for x in candidates:
            ball_clear = _sine(x.rep, v) - eps
            plane_clear = abs(float(x.rep @ normal)) - eps
            clearance = min(ball_clear, plane_clear)
            if best is None or clearance > best[1]:
                best = (x, clearance)
        if best is not None and best[1] > NOISE_GUARD:
            witnesses[key] = {"point": best[0].rep.tolist(), "clearance": best[1]}
        else:
            witnesses[key] = None
            cond4 = False
    if not cond4:
        failed.append("witness")

    flags = {
        "contraction": cond1,
        "proximality": cond2,
        "general-position": cond3,
        "witness": cond4,
    }
    return (not failed), flags, cross, witnesses, failed


def _sine(x: np.ndarray, y: np.ndarray) -> float:
    m = np.outer(x, y)
    m -= m.T
    return min(1.0, float(np.linalg.norm(m)) / math.sqrt(2.0))


def _letter_data(mat: SquareMatrix) -> tuple[LetterData, LetterData]:
    """Attracting data of a matrix and of its inverse from one frame
    decomposition: the inverse's singular values are the reversed
    reciprocals, its top left direction is the bottom row of u and its
    repelling normal the bottom column of k, so no numerical inversion is
    needed (walk products are often too ill-conditioned to invert)."""
    kak = loose_kak(mat)
    a = kak.a
    d = len(a)
    ratio_fwd = float(a[1] / a[0]) if a[0] > 0 else 1.0
    ratio_inv = float(a[d - 1] / a[d - 2]) if a[d - 2] > 0 else 1.0
    if a[0] > (1.0 + GAP_TOL) * a[1]:
        fwd = LetterData(
            contraction_ratio=ratio_fwd,
            v=ProjectivePoint(kak.k[:, 0]).rep.tolist(),
            hyperplane=ProjectiveHyperplane(kak.u[0, :]).normal.tolist(),
        )
    else:
        fwd = LetterData(contraction_ratio=ratio_fwd, v=None, hyperplane=None)
    if a[d - 2] > (1.0 + GAP_TOL) * a[d - 1]:
        inv = LetterData(
            contraction_ratio=ratio_inv,
            v=ProjectivePoint(kak.u[d - 1, :]).rep.tolist(),
            hyperplane=ProjectiveHyperplane(kak.k[:, d - 1]).normal.tolist(),
        )
    else:
        inv = LetterData(contraction_ratio=ratio_inv, v=None, hyperplane=None)
    return fwd, inv


def certify_pair(g, h, epsilon: float | None = None, seed: int = 0) -> PingPongCertificate:
    """Search for a ball radius eps at which g and h pass all four
    conditions. With epsilon given, only that value is tried; otherwise
    the grid 1.05 * eps_min * 1.15^k (k = 0..20, capped at 0.45) is
    scanned, eps_min being the largest contraction epsilon of the four
    generators. Margins at or below the noise guard count as failures, so
    a certificate can be conservative but never unsound."""
    g = as_matrix(g)
    h = as_matrix(h)
    if g.dim != h.dim:
        raise DegenerateGap("pair must share a dimension")
    data = {}
    data["g"], data["g^-1"] = _letter_data(g)
    data["h"], data["h^-1"] = _letter_data(h)

    if epsilon is not None:
        grid_eps = [float(epsilon)]
    else:
        eps_min = max(math.sqrt(data[s].contraction_ratio) for s in LETTERS)
        # Products that are rank-one at float precision report ratio zero;
        # any positive ball radius contracts then, so floor the grid.
        eps_min = max(eps_min, EPS_FLOOR)
        grid_eps = []
        for k in range(GRID_STEPS):
            eps = min(EPS_CAP, 1.05 * eps_min * 1.15**k)
            if not grid_eps or eps > grid_eps[-1]:
                grid_eps.append(eps)

    candidates = _witness_candidates(g.dim, seed)
    grid_log = []
    best = None
    for eps in grid_eps:
        passed, flags, cross, witnesses, failed = _evaluate(data, eps, candidates)
        grid_log.append({"epsilon": eps, "passed": passed, "failed": failed})
        snapshot = PingPongCertificate(
            epsilon=eps,
            passed=passed,
            dim=g.dim,
            letters={
                s: LetterData(
                    contraction_ratio=data[s].contraction_ratio,
                    v=data[s].v,
                    hyperplane=data[s].hyperplane,
                    contraction_margin=data[s].contraction_margin,
                    proximality_margin=data[s].proximality_margin,
                )
                for s in LETTERS
            },
            condition_passed=flags,
            cross_margins=cross,
            witnesses=witnesses,
            grid=grid_log,
            statement=_STATEMENT if passed else "not certified",
        )
        if passed:
            snapshot.grid = list(grid_log)
            return snapshot
        score = len([f for f in flags.values() if f])
        if best is None or score > best[0]:
            best = (score, snapshot)
    cert = best[1]
    cert.grid = grid_log
    return cert


# ---------------------------------------------------------------------------
# Exact word oracle
# ---------------------------------------------------------------------------

_INVERSE_LETTER = {"a": "A", "A": "a", "b": "B", "B": "b"}


def _as_rational(g) -> RationalMatrix:
    if isinstance(g, RationalMatrix):
        return g
    if isinstance(g, SquareMatrix):
        if g.exact is None:
            raise ExactEntriesMissing("word oracle needs exact rational entries")
        return RationalMatrix(g.exact)
    raise ExactEntriesMissing("word oracle needs exact rational entries")


def word_oracle(g, h, max_len: int) -> list[str]:
    """All reduced words in g, h (letters a, A, b, B; A = a^-1 etc.) of
    length 1..max_len that evaluate to +I or -I in exact arithmetic. An
    empty list certifies there is no relation up to that length."""
    if not 1 <= max_len <= 12:
        raise OutOfRange("word length must lie in [1, 12]")
    g = _as_rational(g)
    h = _as_rational(h)
    gens = {"a": g, "A": g.inverse(), "b": h, "B": h.inverse()}
    relations: list[str] = []

    def descend(word: str, mat: RationalMatrix):
        if word and (mat.is_identity() or mat.is_minus_identity()):
            relations.append(word)
        if len(word) == max_len:
            return
        last = word[-1] if word else ""
        for letter, gen in gens.items():
            if last and _INVERSE_LETTER[last] == letter:
                continue
            descend(word + letter, mat @ gen)

    descend("", RationalMatrix.identity(g.dim))
    return relations


# ---------------------------------------------------------------------------
# Probabilistic freeness experiment
# ---------------------------------------------------------------------------

@dataclass
class FreenessResult:
    grid: list[int]
    certified_fraction: list[float]
    pairs: int
    failure_fit: DecayFit
    oracle_checked: int
    oracle_relations: int
    oracle_length: int
    exact_available: bool
    certify_errors: int
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "certified_fraction": self.certified_fraction,
            "pairs": self.pairs,
            "failure_fit": self.failure_fit.to_json(),
            "oracle_checked": self.oracle_checked,
            "oracle_relations": self.oracle_relations,
            "oracle_length": self.oracle_length,
            "exact_available": self.exact_available,
            "certify_errors": self.certify_errors,
            "warnings": self.warnings,
        }


def freeness_experiment(
    spec1: MeasureSpec,
    spec2: MeasureSpec,
    n_grid,
    pairs: int,
    seed: int,
    oracle_fraction: float = 0.1,
    oracle_len: int = 6,
) -> FreenessResult:
    """Certify `pairs` couples of independent walks along the grid.

    Per grid point the certified fraction is reported; the failure
    fraction is fitted log-linearly (zero failures are clipped to half a
    pair). When both specs carry exact entries, a seeded 10% of the
    certified couples are re-checked with the word oracle; any relation
    found is counted (and must be zero for a sound certifier)."""
    n_grid = sorted(set(int(x) for x in n_grid))
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    d = spec1.dim
    if spec2.dim != d:
        raise ValueError("specs must share a dimension")
    exact_ok = spec1.has_exact() and spec2.has_exact()
    atoms1, atoms2 = spec1.matrices(), spec2.matrices()
    exact1 = [RationalMatrix(a.matrix.exact) for a in spec1.atoms] if exact_ok else None
    exact2 = [RationalMatrix(a.matrix.exact) for a in spec2.atoms] if exact_ok else None

    certified = np.zeros(len(n_grid), dtype=int)
    errors = 0
    certified_exact: list[tuple[RationalMatrix, RationalMatrix]] = []
    for p in range(pairs):
        rng1 = rng_stream(seed, 1, p)
        rng2 = rng_stream(seed, 2, p)
        s1 = ScaledProduct(d, side="right")
        s2 = ScaledProduct(d, side="right")
        e1 = RationalMatrix.identity(d) if exact_ok else None
        e2 = RationalMatrix.identity(d) if exact_ok else None
        pos = 0
        for m in range(1, n_grid[-1] + 1):
            i1 = sample_index(spec1, rng1)
            i2 = sample_index(spec2, rng2)
            s1.step(atoms1[i1])
            s2.step(atoms2[i2])
            if exact_ok:
                e1 = e1 @ exact1[i1]
                e2 = e2 @ exact2[i2]
            if m == n_grid[pos]:
                try:
                    cert = certify_pair(s1.mat, s2.mat, seed=seed)
                    ok = cert.passed
                except FurstenbergError:
                    ok = False
                    errors += 1
                if ok:
                    certified[pos] += 1
                    if exact_ok:
                        certified_exact.append((e1, e2))
                pos += 1
                if pos == len(n_grid):
                    break

    fraction = (certified / pairs).tolist()
    failure = [1.0 - f for f in fraction]
    failure_fit = fit_log_decay(n_grid, failure, floor=0.5 / pairs)

    oracle_checked = 0
    oracle_relations = 0
    if exact_ok and certified_exact:
        rng = rng_stream(seed, 3)
        n_check = max(1, int(math.ceil(oracle_fraction * len(certified_exact))))
        picks = rng.choice(len(certified_exact), size=min(n_check, len(certified_exact)),
                           replace=False)
        for i in picks:
            x, y = certified_exact[int(i)]
            found = word_oracle(x, y, oracle_len)
            oracle_checked += 1
            oracle_relations += len(found)

    warnings = []
    if oracle_relations:
        warnings.append(
            f"{oracle_relations} relations found among certified pairs: certifier unsound"
        )
    return FreenessResult(
        grid=n_grid,
        certified_fraction=fraction,
        pairs=pairs,
        failure_fit=failure_fit,
        oracle_checked=oracle_checked,
        oracle_relations=oracle_relations,
        oracle_length=oracle_len,
        exact_available=exact_ok,
        certify_errors=errors,
        warnings=warnings,
    )
