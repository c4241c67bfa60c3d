import math

import numpy as np
import pytest

from furstenberg import errors
from furstenberg.linalg import ProjectivePoint, sine_distance
from furstenberg.measures import rng_stream, sample_index
from furstenberg.walk import (
    cocycle_drift,
    cocycle_norm,
    cocycle_two_point,
    lyapunov_spectrum,
    run_walk,
    singular_ratio_series,
    top_gap,
)

from conftest import make_spec


class TestRunWalk:
    def test_single_atom_cube(self, diag2):
        [snap] = run_walk(diag2, 3, seed=0)
        assert np.allclose(snap.product.arr, [[8.0, 0.0], [0.0, 0.125]])

    def test_side_order(self, sanov):
        # Recompute the draw stream independently and check the product
        # order on each side.
        seed, stream, n = 99, 0, 5
        rng = rng_stream(seed, stream)
        idx = [sample_index(sanov, rng) for _ in range(n)]
        mats = [sanov.atoms[i].matrix.arr for i in idx]
        right = np.eye(2)
        for m in mats:
            right = right @ m
        left = np.eye(2)
        for m in mats:
            left = m @ left
        [snap_r] = run_walk(sanov, n, seed=seed, side="right")
        [snap_l] = run_walk(sanov, n, seed=seed, side="left")
        assert np.array_equal(snap_r.product.arr, right)
        assert np.array_equal(snap_l.product.arr, left)
        if not np.array_equal(right, left):
            assert not np.array_equal(snap_r.product.arr, snap_l.product.arr)

    def test_checkpoints(self, diag2):
        snaps = run_walk(diag2, 5, seed=1, checkpoints=[1, 3, 5])
        assert [s.n for s in snaps] == [1, 3, 5]
        assert np.allclose(snaps[1].product.arr, [[8.0, 0.0], [0.0, 0.125]])

    def test_overflow_guard(self):
        big = make_spec("big", [([[1e6, 0.0], [0.0, 1e-6]], 1.0)])
        with pytest.raises(errors.Overflow):
            run_walk(big, 60, seed=0)

    def test_sanov_direct_overflow_or_finite(self, sanov):
        # Either the guard trips or every entry respects it.
        try:
            snaps = run_walk(sanov, 300, seed=3, checkpoints=list(range(50, 301, 50)))
        except errors.Overflow:
            return
        for snap in snaps:
            assert snap.max_abs <= 1e250

    def test_renormalized_mode(self, diag2):
        [snap] = run_walk(diag2, 100, seed=0, mode="renormalized")
        assert abs(snap.log_diag[0] - 100 * math.log(2)) < 1e-9
        assert np.abs(snap.frame.T @ snap.frame - np.eye(2)).max() < 1e-9


class TestLyapunov:
    def test_deterministic_diagonal(self, diag2):
        est = lyapunov_spectrum(diag2, 2000, 8, seed=3)
        assert abs(est.lambdas[0] - math.log(2)) < 1e-10
        assert abs(est.lambdas[1] + math.log(2)) < 1e-10
        assert est.stderrs[0] < 1e-12

    def test_symmetric_abelian_top_exponent_zero(self, abelian):
        est = lyapunov_spectrum(abelian, 2000, 16, seed=11)
        assert abs(est.lambdas[0]) <= 4 * est.stderrs[0]

    def test_sanov_positive_with_consistency(self, sanov):
        est = lyapunov_spectrum(sanov, 2000, 16, seed=7)
        # 99% CI excludes zero
        assert est.lambdas[0] - 2.58 * est.stderrs[0] > 0
        # unimodular: exponents sum to ~0
        total_se = math.sqrt(sum(s * s for s in est.stderrs))
        assert abs(sum(est.lambdas)) <= 3 * total_se + 1e-9
        # QR and wedge estimators agree (no warnings raised)
        assert est.warnings == []
        assert est.check() == []

    def test_diagrot_consistency(self, diagrot):
        est = lyapunov_spectrum(diagrot, 2000, 16, seed=7)
        assert est.warnings == []
        assert est.lambdas[0] > 0

    def test_preconditions(self, sanov):
        with pytest.raises(ValueError):
            lyapunov_spectrum(sanov, 50, 8, seed=0)
        with pytest.raises(ValueError):
            lyapunov_spectrum(sanov, 200, 4, seed=0)


class TestTopGap:
    def test_deterministic(self, diag4):
        est = top_gap(diag4, 200, 8, seed=3)
        assert abs(est.gap - 2 * math.log(4)) < 1e-10
        assert est.gap_positive

    def test_rotations_no_gap(self, rotations):
        est = top_gap(rotations, 2000, 16, seed=3)
        assert est.ci_low <= 0.0 <= est.ci_high
        assert not est.gap_positive

    def test_sanov_gap_positive(self, sanov):
        est = top_gap(sanov, 2000, 16, seed=7)
        assert est.gap_positive
        assert est.gap > 0.5


class TestCocycles:
    def test_norm_examples(self):
        p = ProjectivePoint([1.0, 0.0])
        assert cocycle_norm(np.eye(2), p) == 0.0
        assert abs(cocycle_norm([[4.0, 0.0], [0.0, 0.25]], p) - math.log(4)) < 1e-12

    def test_two_point_requires_distinct(self):
        p = ProjectivePoint([1.0, 0.0])
        with pytest.raises(errors.DegenerateImage):
            cocycle_two_point(np.eye(2), p, ProjectivePoint([-1.0, 0.0]))

    def test_additivity(self):
        # s(g1 g2, x) = s(g1, g2 x) + s(g2, x), both cocycles.
        rng = np.random.default_rng(17)
        for _ in range(1000):
            g1 = rng.standard_normal((2, 2))
            g2 = rng.standard_normal((2, 2))
            if abs(np.linalg.det(g1)) < 1e-2 or abs(np.linalg.det(g2)) < 1e-2:
                continue
            p = ProjectivePoint(rng.standard_normal(2))
            q = ProjectivePoint(rng.standard_normal(2))
            if sine_distance(p.rep, q.rep) < 1e-3:
                continue
            g2p = ProjectivePoint(g2 @ p.rep)
            lhs = cocycle_norm(g1 @ g2, p)
            rhs = cocycle_norm(g1, g2p) + cocycle_norm(g2, p)
            assert abs(lhs - rhs) < 1e-10
            g2q = ProjectivePoint(g2 @ q.rep)
            lhs2 = cocycle_two_point(g1 @ g2, p, q)
            rhs2 = cocycle_two_point(g1, g2p, g2q) + cocycle_two_point(g2, p, q)
            assert abs(lhs2 - rhs2) < 1e-10

    def test_two_point_drift_bounded_by_gap(self, sanov):
        drift = cocycle_drift(sanov, 300, 24, seed=5, cocycle="two_point")
        gap = top_gap(sanov, 2000, 16, seed=5)
        bound = -gap.gap + 3 * math.hypot(drift.stderr, gap.stderr)
        assert drift.estimate <= bound


class TestSingularRatioSeries:
    def test_deterministic_sixteenth(self, diag4):
        rs = singular_ratio_series(diag4, [1, 2, 3, 5, 8], replicas=2, seed=0)
        for n, mean in zip(rs.grid, rs.means[2]):
            assert abs(mean - 16.0 ** (-n)) <= 1e-12 * 16.0 ** (-n)

    def test_rotations_flat(self, rotations):
        rs = singular_ratio_series(rotations, [2, 4, 6, 8, 10], replicas=20, seed=1)
        assert all(abs(v - 1.0) < 1e-9 for v in rs.means[2])
        assert abs(rs.fits[2].slope) < 1e-9

    def test_sanov_decay_and_gap(self, sanov):
        rs = singular_ratio_series(sanov, range(4, 25, 4), replicas=200, seed=5)
        assert rs.fits[2].slope < 0
        gap = top_gap(sanov, 2000, 16, seed=5)
        typical = rs.typical_fits[2]
        combined = 3 * math.hypot(typical.slope_stderr, gap.stderr)
        assert abs(abs(typical.slope) - gap.gap) <= combined


class TestLawEquality:
    def test_log_norm_right_left_ks(self, sanov):
        # (g_1..g_n) and (g_n..g_1) have the same law, so log|x_n| and
        # log|y_n| agree in distribution across replicas.
        n, reps = 40, 400
        rvals, lvals = [], []
        for r in range(reps):
            [sr] = run_walk(sanov, n, seed=21, side="right", stream=r)
            [sl] = run_walk(sanov, n, seed=22, side="left", stream=r)
            rvals.append(math.log(np.linalg.norm(sr.product.arr, 2)))
            lvals.append(math.log(np.linalg.norm(sl.product.arr, 2)))
        rvals, lvals = np.sort(rvals), np.sort(lvals)
        grid = np.concatenate([rvals, lvals])
        cdf_r = np.searchsorted(rvals, grid, side="right") / reps
        cdf_l = np.searchsorted(lvals, grid, side="right") / reps
        ks = np.abs(cdf_r - cdf_l).max()
        assert ks <= 2.0 / math.sqrt(reps)
