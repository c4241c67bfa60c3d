"""Dense small-dimension linear algebra for unimodular matrix products.

Provides the polar (orthogonal x positive-diagonal x orthogonal)
decomposition computed by one-sided Jacobi iteration, exterior powers in
the lexicographic minor basis, and the projective / flag geometry (sine
metric, point-hyperplane distances) that all walk estimators consume.

Dimensions are expected to stay small (d <= 8); accuracy is preferred
over speed throughout. All operations are pure functions of their
inputs; values are treated as immutable after construction and are safe
to share across concurrent tasks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DegenerateFlag,
    DegenerateImage,
    DimensionMismatch,
    NonFinite,
    NonInvertible,
    OutOfRange,
)

JACOBI_TOL = 1e-14
FLAG_SEPARATION_TOL = 1e-10


class SquareMatrix:
    """A d x d real matrix, optionally paired with exact rational entries.

    The floating array is the working representation; ``exact`` (a nested
    list of ``fractions.Fraction``) is carried along when available so that
    downstream word enumeration can run in exact arithmetic.
    """

    __slots__ = ("arr", "exact")

    def __init__(self, entries, exact=None):
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFinite("matrix entries must be finite")
        self.arr = arr
        if exact is not None:
            exact = [[Fraction(x) for x in row] for row in exact]
            if len(exact) != arr.shape[0] or any(len(r) != arr.shape[0] for r in exact):
                raise DimensionMismatch("exact entries do not match matrix shape")
        self.exact = exact

    @property
    def dim(self) -> int:
        return self.arr.shape[0]

    def det(self) -> float:
        return float(np.linalg.det(self.arr))

    def inv(self) -> "SquareMatrix":
        if self.exact is not None:
            inv_exact = _rational_inverse(self.exact)
            return SquareMatrix([[float(x) for x in row] for row in inv_exact], exact=inv_exact)
        a1 = np.linalg.svd(self.arr, compute_uv=False)
        if a1[-1] < 1e-13 * a1[0]:
            raise NonInvertible("matrix numerically singular")
        return SquareMatrix(np.linalg.inv(self.arr))

    def __matmul__(self, other: "SquareMatrix") -> "SquareMatrix":
        exact = None
        if self.exact is not None and other.exact is not None:
            exact = _rational_matmul(self.exact, other.exact)
            return SquareMatrix([[float(x) for x in row] for row in exact], exact=exact)
        return SquareMatrix(self.arr @ other.arr)

    def unimodular_defect(self) -> float:
        """|det - 1| relative to the natural scale max(1, max|entry|)^d."""
        scale = max(1.0, float(np.abs(self.arr).max())) ** self.dim
        return abs(self.det() - 1.0) / scale

    def to_json(self) -> dict:
        doc = {"dim": self.dim, "entries": self.arr.tolist()}
        if self.exact is not None:
            doc["exact"] = [[str(x) for x in row] for row in self.exact]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SquareMatrix":
        exact = doc.get("exact")
        if exact is not None:
            exact = [[Fraction(str(x)) for x in row] for row in exact]
            entries = [[float(x) for x in row] for row in exact]
        else:
            entries = doc["entries"]
        mat = cls(entries, exact=exact)
        if mat.dim != int(doc["dim"]):
            raise DimensionMismatch("declared dim does not match entries")
        return mat

    def __repr__(self):
        return f"SquareMatrix({self.arr.tolist()!r})"


def _rational_matmul(a, b):
    d = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(d)) for j in range(d)] for i in range(d)]


def _rational_inverse(rows):
    """Gauss-Jordan inverse over Fraction entries."""
    d = len(rows)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(d)]
           for i, row in enumerate(rows)]
    for col in range(d):
        pivot = next((r for r in range(col, d) if aug[r][col] != 0), None)
        if pivot is None:
            raise NonInvertible("exact matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_p = Fraction(1) / aug[col][col]
        aug[col] = [x * inv_p for x in aug[col]]
        for r in range(d):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[d:] for row in aug]


def as_matrix(g) -> SquareMatrix:
    """Coerce arrays / nested lists to SquareMatrix, passing instances through."""
    if isinstance(g, SquareMatrix):
        return g
    return SquareMatrix(g)


# ---------------------------------------------------------------------------
# KA+K decomposition
# ---------------------------------------------------------------------------

@dataclass
class KAKDecomposition:
    """g = k . diag(a) . u with k, u orthogonal and a positive non-increasing."""

    k: np.ndarray
    a: np.ndarray
    u: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.k @ np.diag(self.a) @ self.u

    @property
    def dim(self) -> int:
        return len(self.a)


def _canonicalize_frame_signs(k: np.ndarray, u: np.ndarray):
    # Fix the diagonal sign ambiguity: make the largest-magnitude entry of
    # each column of k positive, compensating on the matching row of u.
    for j in range(k.shape[1]):
        i = int(np.argmax(np.abs(k[:, j])))
        if k[i, j] < 0:
            k[:, j] = -k[:, j]
            u[j, :] = -u[j, :]
    return k, u


def _jacobi_orthogonalize(arr: np.ndarray):
    """One-sided Jacobi: rotate column pairs of a copy of arr until all
    columns are mutually orthogonal to relative tolerance JACOBI_TOL.
    Returns (b, v) with b = arr v and v exactly orthogonal."""
    d = arr.shape[0]
    b = arr.copy()
    v = np.eye(d)
    for _ in range(80):
        off = 0.0
        for p in range(d - 1):
            for q in range(p + 1, d):
                alpha = float(b[:, p] @ b[:, p])
                beta = float(b[:, q] @ b[:, q])
                gamma = float(b[:, p] @ b[:, q])
                denom = math.sqrt(alpha * beta)
                if denom == 0.0:
                    continue
                rel = abs(gamma) / denom
                off = max(off, rel)
                if rel <= JACOBI_TOL:
                    continue
                theta = 0.5 * math.atan2(2.0 * gamma, alpha - beta)
                c, s = math.cos(theta), math.sin(theta)
                bp = c * b[:, p] + s * b[:, q]
                bq = -s * b[:, p] + c * b[:, q]
                b[:, p], b[:, q] = bp, bq
                vp = c * v[:, p] + s * v[:, q]
                vq = -s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
        if off <= JACOBI_TOL:
            break
    return b, v


def svd_kak(g) -> KAKDecomposition:
    """Decompose g = k . diag(a) . u by one-sided Jacobi iteration.

    Parameters
    ----------
    g : SquareMatrix or array-like
        Invertible matrix with finite entries.

    Returns
    -------
    KAKDecomposition
        a holds the singular values in non-increasing order; k and u are
        orthogonal, sign-canonicalized so each column of k has its
        largest-magnitude entry positive.

    Raises
    ------
    NonInvertible
        If the smallest singular value is below 1e-13 times the largest.
    NonFinite
        On NaN / infinite input.
    """
    g = as_matrix(g)
    b, v = _jacobi_orthogonalize(g.arr)
    norms = np.linalg.norm(b, axis=0)
    if norms.max() == 0.0 or norms.min() < 1e-13 * norms.max():
        raise NonInvertible(
            f"smallest singular value {norms.min():.3e} below 1e-13 of largest {norms.max():.3e}"
        )
    order = np.argsort(-norms, kind="stable")
    a = norms[order]
    k = b[:, order] / a
    u = v[:, order].T
    k, u = _canonicalize_frame_signs(k, u)
    return KAKDecomposition(k=k, a=a, u=u)


def loose_kak(g) -> KAKDecomposition:
    """Frame decomposition for numerically rank-deficient products.

    Same Jacobi core as svd_kak but no invertibility requirement: columns
    whose norm falls to the float noise floor are replaced by an
    orthonormal completion of the leading columns (for d = 2 this pins
    the second frame direction exactly; for d >= 3 directions below the
    noise floor are arbitrary within the orthogonal complement and the
    caller must decide how far down the returned frame is trusted). The
    top directions of k and u stay accurate at any conditioning.
    """
    g = as_matrix(g)
    d = g.dim
    b, v = _jacobi_orthogonalize(g.arr)
    norms = np.linalg.norm(b, axis=0)
    order = np.argsort(-norms, kind="stable")
    a = norms[order]
    u = v[:, order].T
    k = np.empty((d, d))
    floor = max(a[0], 1.0) * 1e-300
    good = 0
    for i in range(d):
        if a[i] > floor:
            k[:, i] = b[:, order[i]] / a[i]
            good += 1
        else:
            break
    if good < d:
        # Complete the frame: orthonormal basis of the complement, in a
        # deterministic order.
        basis, _ = np.linalg.qr(np.hstack([k[:, :good], np.eye(d)]))
        k[:, good:] = basis[:, good:d]
    k, u = _canonicalize_frame_signs(k, u)
    return KAKDecomposition(k=k, a=a, u=u)


# ---------------------------------------------------------------------------
# Exterior powers
# ---------------------------------------------------------------------------

def _lex_subsets(d: int, i: int):
    return list(itertools.combinations(range(d), i))


def wedge_power(g, i: int) -> SquareMatrix:
    """Matrix of i x i minors of g in the lexicographic basis of the i-th
    exterior power. wedge_power(g, 1) is g itself; wedge_power(g, d) is
    the 1 x 1 matrix [det g].
    """
    g = as_matrix(g)
    d = g.dim
    if not 1 <= i <= d:
        raise OutOfRange(f"wedge index {i} outside [1, {d}]")
    if i == 1:
        return SquareMatrix(g.arr.copy())
    subsets = _lex_subsets(d, i)
    m = len(subsets)
    out = np.empty((m, m))
    for r, rows in enumerate(subsets):
        block = g.arr[np.ix_(rows, range(d))]
        for c, cols in enumerate(subsets):
            out[r, c] = np.linalg.det(block[:, cols])
    return SquareMatrix(out)


def wedge_vector(columns: np.ndarray) -> np.ndarray:
    """Coordinates of col_1 ^ ... ^ col_i in the lexicographic minor basis."""
    d, i = columns.shape
    subsets = _lex_subsets(d, i)
    if i == 1:
        return columns[:, 0].copy()
    return np.array([np.linalg.det(columns[rows, :]) for rows in subsets])


def operator_norm(g) -> float:
    return float(np.linalg.norm(as_matrix(g).arr, 2))


# ---------------------------------------------------------------------------
# Projective geometry
# ---------------------------------------------------------------------------

def _canonical_unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateImage("cannot normalize a zero or non-finite vector")
    v = v / norm
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return v


class ProjectivePoint:
    """A line in R^m represented by a canonical unit vector.

    Canonical form: unit norm with the first largest-magnitude coordinate
    positive, so equal lines compare equal entrywise.
    """

    __slots__ = ("rep",)

    def __init__(self, rep):
        self.rep = _canonical_unit(np.asarray(rep, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.rep)

    def __repr__(self):
        return f"ProjectivePoint({self.rep.tolist()!r})"


class ProjectiveHyperplane:
    """A hyperplane ker(y) given by its canonical unit normal y."""

    __slots__ = ("normal",)

    def __init__(self, normal):
        self.normal = _canonical_unit(np.asarray(normal, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.normal)

    def __repr__(self):
        return f"ProjectiveHyperplane({self.normal.tolist()!r})"


def sine_distance(x: np.ndarray, y: np.ndarray) -> float:
    """||x ^ y|| for unit vectors, evaluated through the antisymmetric outer
    product so the result is exactly symmetric in its arguments and stays
    accurate for nearly-parallel inputs."""
    m = np.outer(x, y)
    m -= m.T
    val = float(np.linalg.norm(m)) / math.sqrt(2.0)
    return min(1.0, val)


def fubini_study(p: ProjectivePoint, q: ProjectivePoint) -> float:
    """Sine of the angle between two lines: ||x ^ y|| / (||x|| ||y||)."""
    if p.dim != q.dim:
        raise DimensionMismatch(f"ambient dims differ: {p.dim} vs {q.dim}")
    return sine_distance(p.rep, q.rep)


def point_hyperplane_distance(p: ProjectivePoint, h: ProjectiveHyperplane) -> float:
    """|<p, normal>| — zero iff the line lies inside the hyperplane."""
    if p.dim != h.dim:
        raise DimensionMismatch(f"ambient dims differ: {p.dim} vs {h.dim}")
    return min(1.0, abs(float(p.rep @ h.normal)))


def act_projective(g, p: ProjectivePoint) -> ProjectivePoint:
    g = as_matrix(g)
    if g.dim != p.dim:
        raise DimensionMismatch(f"matrix dim {g.dim} vs point dim {p.dim}")
    image = g.arr @ p.rep
    if np.linalg.norm(image) < 1e-13 * operator_norm(g):
        raise DegenerateImage("image vector vanishes to working precision")
    return ProjectivePoint(image)


# ---------------------------------------------------------------------------
# Flags
# ---------------------------------------------------------------------------

class FlagPoint:
    """A complete flag, stored as an orthogonal frame modulo column signs.

    The comparable data are the derived wedge lines: for i = 1..d-1 the
    line of col_1 ^ ... ^ col_i inside the i-th exterior power. These are
    invariant under column sign flips, which is exactly the residual
    ambiguity of the frame.
    """

    __slots__ = ("frame", "wedge_lines")

    def __init__(self, frame):
        frame = np.asarray(frame, dtype=float)
        d = frame.shape[0]
        if frame.shape != (d, d):
            raise DimensionMismatch("flag frame must be square")
        if np.abs(frame.T @ frame - np.eye(d)).max() > 1e-10:
            raise DegenerateFlag("flag frame is not orthogonal to 1e-10")
        self.frame = frame
        self.wedge_lines = tuple(
            ProjectivePoint(wedge_vector(frame[:, : i + 1])) for i in range(d - 1)
        )

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    def __repr__(self):
        return f"FlagPoint(dim={self.dim})"


def flag_of(g) -> FlagPoint:
    """Flag of the left orthogonal factor of g.

    Requires strictly separated singular values (each consecutive ratio
    above 1 + 1e-10); otherwise the flag is ambiguous and DegenerateFlag
    is raised.
    """
    kak = svd_kak(g)
    ratios = kak.a[:-1] / kak.a[1:]
    if np.any(ratios <= 1.0 + FLAG_SEPARATION_TOL):
        raise DegenerateFlag(
            f"singular values not strictly separated (min ratio {ratios.min():.3e})"
        )
    return FlagPoint(kak.k)


def dual_flag_of(g) -> FlagPoint:
    """Flag of the right orthogonal factor (rows of u), with the same
    separation requirement as flag_of."""
    kak = svd_kak(g)
    ratios = kak.a[:-1] / kak.a[1:]
    if np.any(ratios <= 1.0 + FLAG_SEPARATION_TOL):
        raise DegenerateFlag(
            f"singular values not strictly separated (min ratio {ratios.min():.3e})"
        )
    return FlagPoint(kak.u.T)


def flag_distance(f1: FlagPoint, f2: FlagPoint) -> float:
    """max over i of the sine distance between the i-th wedge lines."""
    if f1.dim != f2.dim:
        raise DimensionMismatch("flags live in different dimensions")
    return max(
        fubini_study(a, b) for a, b in zip(f1.wedge_lines, f2.wedge_lines)
    )
