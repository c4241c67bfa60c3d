"""Finitely supported step distributions on SL_d(R).

A MeasureSpec is a list of weighted unimodular atoms, optionally with
exact rational entries (used by the word oracle). Finite support makes
the exponential-moment hypothesis of every estimator automatic; Zariski
density of the generated group is a user-asserted hypothesis that cannot
be checked here.

Specs are immutable and shareable; concurrent walks each own a generator
derived from (master seed, stream id) via rng_stream, so replicas are
independent and reproducible regardless of scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from .errors import NonInvertible
from .linalg import SquareMatrix, _rational_inverse, _rational_matmul

DET_TOL = 1e-9
WEIGHT_TOL = 1e-12


class RationalMatrix:
    """Square matrix over exact rationals with determinant exactly 1."""

    __slots__ = ("rows",)

    def __init__(self, rows):
        self.rows = [[Fraction(x) for x in row] for row in rows]
        d = len(self.rows)
        if any(len(r) != d for r in self.rows):
            raise ValueError("rational matrix must be square")

    @property
    def dim(self) -> int:
        return len(self.rows)

    def det(self) -> Fraction:
        # Fraction-exact Gaussian elimination.
        rows = [list(r) for r in self.rows]
        d = self.dim
        det = Fraction(1)
        for col in range(d):
            pivot = next((r for r in range(col, d) if rows[r][col] != 0), None)
            if pivot is None:
                return Fraction(0)
            if pivot != col:
                rows[col], rows[pivot] = rows[pivot], rows[col]
                det = -det
            det *= rows[col][col]
            inv_p = Fraction(1) / rows[col][col]
            for r in range(col + 1, d):
                if rows[r][col] != 0:
                    factor = rows[r][col] * inv_p
                    rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
        return det

    def inverse(self) -> "RationalMatrix":
        return RationalMatrix(_rational_inverse(self.rows))

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        return RationalMatrix(_rational_matmul(self.rows, other.rows))

    def __eq__(self, other) -> bool:
        return isinstance(other, RationalMatrix) and self.rows == other.rows

    def is_identity(self) -> bool:
        return all(
            self.rows[i][j] == (1 if i == j else 0)
            for i in range(self.dim)
            for j in range(self.dim)
        )

    def is_minus_identity(self) -> bool:
        return all(
            self.rows[i][j] == (-1 if i == j else 0)
            for i in range(self.dim)
            for j in range(self.dim)
        )

    @classmethod
    def identity(cls, d: int) -> "RationalMatrix":
        return cls([[Fraction(int(i == j)) for j in range(d)] for i in range(d)])

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.rows])

    def __repr__(self):
        return f"RationalMatrix({[[str(x) for x in row] for row in self.rows]!r})"


@dataclass
class Atom:
    matrix: SquareMatrix
    weight: float

    @property
    def exact(self) -> RationalMatrix | None:
        if self.matrix.exact is None:
            return None
        return RationalMatrix(self.matrix.exact)


@dataclass
class MeasureSpec:
    """Finitely supported probability measure on unimodular matrices."""

    atoms: list[Atom]
    label: str = ""
    _cum: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        weights = np.array([a.weight for a in self.atoms], dtype=float)
        self._cum = np.cumsum(weights)

    @property
    def dim(self) -> int:
        return self.atoms[0].matrix.dim if self.atoms else 0

    def matrices(self) -> list[np.ndarray]:
        return [a.matrix.arr for a in self.atoms]

    def has_exact(self) -> bool:
        return bool(self.atoms) and all(a.matrix.exact is not None for a in self.atoms)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "atoms": [
                {"matrix": a.matrix.to_json(), "weight": a.weight} for a in self.atoms
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MeasureSpec":
        atoms = [
            Atom(matrix=SquareMatrix.from_json(entry["matrix"]), weight=float(entry["weight"]))
            for entry in doc["atoms"]
        ]
        return cls(atoms=atoms, label=str(doc.get("label", "")))

    def save(self, path):
        with open(path, "w") as handle:
            json.dump(self.to_json(), handle, indent=2)

    @classmethod
    def load(cls, path) -> "MeasureSpec":
        with open(path) as handle:
            return cls.from_json(json.load(handle))


def validate(spec: MeasureSpec) -> list[str]:
    """Check spec invariants. Returns an empty list when the spec is usable,
    otherwise one human-readable diagnostic per violation.

    The exponential-moment condition holds automatically for finite support
    and is not a diagnostic; adaptedness (support generating the intended
    group) is not algorithmically checkable and is assumed.
    """
    diagnostics = []
    if not spec.atoms:
        diagnostics.append("atom list is empty")
        return diagnostics
    dims = {a.matrix.dim for a in spec.atoms}
    if len(dims) > 1:
        diagnostics.append(f"atoms have mixed dimensions {sorted(dims)}")
    total = sum(a.weight for a in spec.atoms)
    if abs(total - 1.0) > WEIGHT_TOL:
        diagnostics.append(f"weights sum {total:.12g} != 1")
    for i, atom in enumerate(spec.atoms):
        if atom.weight < 0:
            diagnostics.append(f"atom {i}: negative weight {atom.weight}")
        if not np.all(np.isfinite(atom.matrix.arr)):
            diagnostics.append(f"atom {i}: non-finite entries")
            continue
        defect = atom.matrix.unimodular_defect()
        if defect > DET_TOL:
            diagnostics.append(
                f"atom {i}: determinant {atom.matrix.det():.12g} != 1 (relative defect {defect:.3e})"
            )
        exact = atom.matrix.exact
        if exact is not None and RationalMatrix(exact).det() != 1:
            diagnostics.append(f"atom {i}: exact determinant != 1")
    return diagnostics


def rng_stream(seed: int, *stream_ids: int) -> np.random.Generator:
    """Independent generator for (master seed, stream id...)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(stream_ids)))


def sample_index(spec: MeasureSpec, rng: np.random.Generator) -> int:
    u = rng.random()
    return int(np.searchsorted(spec._cum, u, side="right"))


def sample_indices(spec: MeasureSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    return np.searchsorted(spec._cum, rng.random(count), side="right").astype(int)


def sample(spec: MeasureSpec, rng: np.random.Generator) -> SquareMatrix:
    """Draw one atom; deterministic given the generator state."""
    return spec.atoms[sample_index(spec, rng)].matrix


def inverse_measure(spec: MeasureSpec) -> MeasureSpec:
    """The law of g^{-1}: same weights, inverted atoms (exactly when exact
    entries are present)."""
    atoms = []
    for atom in spec.atoms:
        try:
            atoms.append(Atom(matrix=atom.matrix.inv(), weight=atom.weight))
        except NonInvertible:
            raise NonInvertible(f"atom with weight {atom.weight} is not invertible")
    label = spec.label + "^-1" if spec.label else ""
    if label.endswith("^-1^-1"):
        label = label[:-6]
    return MeasureSpec(atoms=atoms, label=label)


def bundled_spec(name: str) -> MeasureSpec:
    """Load one of the example specs shipped with the package
    ("sanov" or "diagrot")."""
    data = resources.files("furstenberg").joinpath(f"specs/{name}.json").read_text()
    return MeasureSpec.from_json(json.loads(data))
