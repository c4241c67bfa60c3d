import math

import numpy as np
import pytest

from furstenberg import errors
from furstenberg.linalg import ProjectivePoint, SquareMatrix, svd_kak
from furstenberg.measures import RationalMatrix
from furstenberg.pingpong import (
    attracting_point,
    certify_pair,
    contraction_epsilon,
    freeness_experiment,
    repelling_hyperplane,
    word_oracle,
)

from conftest import make_spec

SANOV_S = [[1.0, 2.0], [0.0, 1.0]]
SANOV_T = [[1.0, 0.0], [2.0, 1.0]]


def rotation(deg):
    t = math.radians(deg)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


class TestContractionEpsilon:
    def test_diagonal(self):
        assert contraction_epsilon([[4.0, 0.0], [0.0, 0.25]]) == pytest.approx(0.25)

    def test_orthogonal_never_contracts(self):
        assert contraction_epsilon(rotation(37)) == pytest.approx(1.0)

    def test_sanov_generator(self):
        # a2/a1 = (sqrt2 - 1)^2 from the eigenvalues (1 +- sqrt2)^2 of g g^T
        assert contraction_epsilon(SANOV_S) == pytest.approx(math.sqrt(2) - 1, abs=1e-12)


class TestAttractingRepelling:
    def test_diagonal(self):
        v = attracting_point([[4.0, 0.0], [0.0, 0.25]])
        h = repelling_hyperplane([[4.0, 0.0], [0.0, 0.25]])
        assert np.allclose(v.rep, [1.0, 0.0])
        assert np.allclose(h.normal, [1.0, 0.0])
        # the repelling set is the e2 line
        assert abs(float(np.array([0.0, 1.0]) @ h.normal)) == 0.0

    def test_sanov_generator_angles(self):
        v = attracting_point(SANOV_S)
        h = repelling_hyperplane(SANOV_S)
        assert math.degrees(math.atan2(v.rep[1], v.rep[0])) == pytest.approx(22.5, abs=1e-9)
        assert math.degrees(math.atan2(h.normal[1], h.normal[0])) == pytest.approx(67.5, abs=1e-9)
        assert abs(float(v.rep @ h.normal)) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_rotation_degenerate(self):
        with pytest.raises(errors.DegenerateGap):
            attracting_point(rotation(10))
        with pytest.raises(errors.DegenerateGap):
            repelling_hyperplane(rotation(10))

    def test_inverse_duality(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            g = rng.standard_normal((3, 3))
            det = np.linalg.det(g)
            if abs(det) < 1e-2:
                continue
            g = g / abs(det) ** (1.0 / 3.0)
            kak = svd_kak(g)
            if kak.a[0] / kak.a[1] < 1.1 or kak.a[1] / kak.a[2] < 1.1:
                continue
            kak_inv = svd_kak(np.linalg.inv(g))
            assert abs(kak_inv.a[0] - 1.0 / kak.a[-1]) <= 1e-9 * kak_inv.a[0]
            v_inv = attracting_point(np.linalg.inv(g))
            last_u = ProjectivePoint(kak.u.T[:, -1])
            assert min(np.abs(v_inv.rep - last_u.rep).max(),
                       np.abs(v_inv.rep + last_u.rep).max()) <= 1e-9


class TestCertifyPair:
    def test_identity_pair_fails(self):
        cert = certify_pair(np.eye(2), np.eye(2))
        assert not cert.passed
        assert cert.letters["g"].contraction_margin <= 0

    def test_hand_pair_at_fixed_epsilon(self):
        g = SquareMatrix([[4.0, 0.0], [0.0, 0.25]])
        r = rotation(45)
        h = SquareMatrix(r @ g.arr @ r.T)
        cert = certify_pair(g, h, epsilon=0.26)
        assert cert.passed
        for s in ("g", "g^-1", "h", "h^-1"):
            assert cert.letters[s].contraction_margin == pytest.approx(
                0.26**2 - 1.0 / 16.0, abs=1e-9
            )
            assert cert.letters[s].proximality_margin == pytest.approx(
                1.0 - 0.52, abs=1e-9
            )
        for margin in cert.cross_margins.values():
            assert margin == pytest.approx(math.sqrt(2) / 2 - 0.52, abs=1e-9)
        assert all(cert.condition_passed.values())

    def test_hand_pair_grid_search(self):
        g = SquareMatrix([[4.0, 0.0], [0.0, 0.25]])
        r = rotation(45)
        h = SquareMatrix(r @ g.arr @ r.T)
        cert = certify_pair(g, h)
        assert cert.passed
        assert 0.25 < cert.epsilon < 0.45

    def test_sanov_generators_not_certified(self):
        cert = certify_pair(SquareMatrix(SANOV_S), SquareMatrix(SANOV_T))
        assert not cert.passed
        # the search needs eps > sqrt(2) - 1, but then 2 eps exceeds the
        # attracting-repelling distance sqrt(2)/2
        for entry in cert.grid:
            assert entry["epsilon"] >= 1.05 * (math.sqrt(2) - 1) - 1e-12
            assert not entry["passed"]

    def test_margins_recomputable(self):
        g = SquareMatrix([[4.0, 0.0], [0.0, 0.25]])
        r = rotation(45)
        h = SquareMatrix(r @ g.arr @ r.T)
        cert = certify_pair(g, h, epsilon=0.26)
        for s, data in cert.letters.items():
            v = np.array(data.v)
            normal = np.array(data.hyperplane)
            dist = abs(float(v @ normal))
            assert abs((dist - 2 * cert.epsilon) - data.proximality_margin) <= 1e-10
        for key, margin in cert.cross_margins.items():
            s = key.split("|")[0][2:]
            t = key.split("|")[1][2:]
            dist = abs(float(np.dot(cert.letters[s].v, cert.letters[t].hyperplane)))
            assert abs((dist - 2 * cert.epsilon) - margin) <= 1e-10
        for key, witness in cert.witnesses.items():
            assert witness is not None
            assert witness["clearance"] > 0


class TestContractionLemma:
    def test_property_500_instances(self):
        # if sup_{j>1} a_j/a_1 < eps^2 and delta(x, H_g) >= eps then
        # delta(g x, v_g) <= eps
        rng = np.random.default_rng(606)
        checked = 0
        while checked < 500:
            d = int(rng.integers(2, 5))
            eps = float(rng.uniform(0.05, 0.4))
            q1, _ = np.linalg.qr(rng.standard_normal((d, d)))
            q2, _ = np.linalg.qr(rng.standard_normal((d, d)))
            a1 = float(rng.uniform(1.0, 10.0))
            ratios = rng.uniform(0.05, 0.95, size=d - 1)
            a = [a1]
            for rat in ratios:
                a.append(a[-1] * rat * eps**2)
            g = q1 @ np.diag(a) @ q2
            x = ProjectivePoint(rng.standard_normal(d))
            h_g = repelling_hyperplane(g)
            if abs(float(x.rep @ h_g.normal)) < eps:
                continue
            v_g = attracting_point(g)
            image = g @ x.rep
            image = image / np.linalg.norm(image)
            dist = math.sqrt(max(0.0, 1.0 - float(image @ v_g.rep) ** 2))
            assert dist <= eps + 1e-9
            checked += 1


class TestWordOracle:
    def test_inverse_pair_has_length_two_relation(self):
        a = RationalMatrix([["2", "0"], ["0", "1/2"]])
        words = word_oracle(a, a.inverse(), 2)
        assert "ab" in words and "ba" in words

    def test_identity_pair_length_one(self):
        eye = RationalMatrix.identity(2)
        words = word_oracle(eye, eye, 1)
        assert sorted(words) == ["A", "B", "a", "b"]

    def test_sanov_free_to_length_eight(self):
        s = RationalMatrix([["1", "2"], ["0", "1"]])
        t = RationalMatrix([["1", "0"], ["2", "1"]])
        assert word_oracle(s, t, 8) == []

    def test_minus_identity_detected(self):
        # g of order 4 in SL_2(Z): g^2 = -I
        g = RationalMatrix([["0", "-1"], ["1", "0"]])
        words = word_oracle(g, RationalMatrix.identity(2), 2)
        assert "aa" in words

    def test_requires_exact(self):
        with pytest.raises(errors.ExactEntriesMissing):
            word_oracle(SquareMatrix([[1.5, 0.0], [0.0, 1 / 1.5]]), RationalMatrix.identity(2), 3)

    def test_length_cap(self):
        eye = RationalMatrix.identity(2)
        with pytest.raises(errors.OutOfRange):
            word_oracle(eye, eye, 13)


class TestFreenessExperiment:
    def test_negative_control_identical_walks(self, diag4):
        res = freeness_experiment(diag4, diag4, [5, 10, 15, 20], pairs=5, seed=3)
        assert res.certified_fraction == [0.0, 0.0, 0.0, 0.0]

    def test_sanov_certifies_with_sound_oracle(self, sanov):
        res = freeness_experiment(sanov, sanov, [20, 30, 40, 50], pairs=40, seed=3,
                                  oracle_fraction=1.0)
        assert res.certified_fraction[-1] >= 0.9
        assert res.oracle_checked > 0
        assert res.oracle_relations == 0
        assert res.exact_available
