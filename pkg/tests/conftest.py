import math

import pytest

from furstenberg.measures import Atom, MeasureSpec, bundled_spec
from furstenberg.linalg import SquareMatrix


def make_spec(label, atoms):
    """atoms: list of (entries, weight) or (entries, weight, exact)."""
    out = []
    for entry in atoms:
        entries, weight = entry[0], entry[1]
        exact = entry[2] if len(entry) > 2 else None
        out.append(Atom(matrix=SquareMatrix(entries, exact=exact), weight=weight))
    return MeasureSpec(atoms=out, label=label)


@pytest.fixture(scope="session")
def sanov():
    return bundled_spec("sanov")


@pytest.fixture(scope="session")
def diagrot():
    return bundled_spec("diagrot")


@pytest.fixture(scope="session")
def diag2():
    return make_spec("diag2", [([[2.0, 0.0], [0.0, 0.5]], 1.0, [["2", "0"], ["0", "1/2"]])])


@pytest.fixture(scope="session")
def diag4():
    return make_spec("diag4", [([[4.0, 0.0], [0.0, 0.25]], 1.0, [["4", "0"], ["0", "1/4"]])])


@pytest.fixture(scope="session")
def abelian():
    return make_spec(
        "abelian",
        [([[2.0, 0.0], [0.0, 0.5]], 0.5), ([[0.5, 0.0], [0.0, 2.0]], 0.5)],
    )


@pytest.fixture(scope="session")
def rotations():
    c, s = math.cos(1.0), math.sin(1.0)
    return make_spec(
        "rotations",
        [([[0.6, -0.8], [0.8, 0.6]], 0.5), ([[c, -s], [s, c]], 0.5)],
    )


@pytest.fixture(scope="session")
def diagrot3():
    # d = 3: a diagonal stretch plus two plane rotations, so all three
    # exponents separate and the full flag machinery gets exercised.
    third = 1.0 / 3.0
    return make_spec(
        "diagrot3",
        [
            ([[3.0, 0, 0], [0, 1.0, 0], [0, 0, third]], third),
            ([[0.6, -0.8, 0], [0.8, 0.6, 0], [0, 0, 1.0]], third),
            ([[1.0, 0, 0], [0, 0.6, -0.8], [0, 0.8, 0.6]], third),
        ],
    )
