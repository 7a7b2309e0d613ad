import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyflow.errors import GridMismatch
from polyflow.spaces import (AtomicMeasure, BvTimeSeries, GridFunction,
                             bv_estimate_checks, flat_distance, l1_distance,
                             shifted_l1_difference, total_variation)


def indicator(grid, lo, hi):
    return GridFunction.from_callable(
        lambda x: ((x >= lo) & (x < hi)).astype(float),
        grid.origin, grid.dx, grid.values.shape)


class TestGridFunction:
    def test_l1_distance_zero_for_equal(self):
        g = GridFunction(np.array([1.0, 2.0, 3.0]), (0.0,), (0.5,))
        assert l1_distance(g, g) == 0.0

    def test_l1_distance_unit_rectangle(self):
        g = GridFunction(np.ones(10), (0.0,), (0.1,))
        z = g.with_values(np.zeros(10))
        assert l1_distance(g, z) == pytest.approx(1.0)

    def test_l1_distance_shifted_indicator(self):
        grid = GridFunction.uniform((-1.0, 2.0), 300)  # dx = 0.01
        u = indicator(grid, 0.0, 1.0)
        v = indicator(grid, 0.3, 1.3)
        # brute-force cell sum oracle
        expect = float(np.sum(np.abs(u.values - v.values)) * 0.01)
        assert expect == pytest.approx(0.6, abs=1e-12)
        assert l1_distance(u, v) == pytest.approx(expect)

    def test_l1_distance_grid_mismatch(self):
        a = GridFunction(np.ones(4), (0.0,), (1.0,))
        b = GridFunction(np.ones(5), (0.0,), (1.0,))
        with pytest.raises(GridMismatch):
            l1_distance(a, b)

    def test_tv_constant(self):
        g = GridFunction(np.full(20, 3.7), (0.0,), (0.1,))
        assert total_variation(g) == 0.0

    def test_tv_indicator_two_jumps(self):
        grid = GridFunction.uniform((-1.0, 2.0), 300)
        assert total_variation(indicator(grid, 0.0, 1.0)) == pytest.approx(2.0)

    def test_tv_monotone_staircase(self):
        g = GridFunction(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), (0.0,), (1.0,))
        assert total_variation(g) == pytest.approx(1.0)

    def test_tv_2d_weighted(self):
        vals = np.zeros((4, 4))
        vals[1:3, 1:3] = 1.0  # 2x2 block
        g = GridFunction(vals, (0.0, 0.0), (0.5, 0.25))
        # x-direction: 2 interfaces x 2 rows... jumps along axis0: 4 of size 1,
        # each weighted by dy; axis1: 4 weighted by dx
        assert total_variation(g) == pytest.approx(4 * 0.25 + 4 * 0.5)

    def test_lookup_left_closed(self):
        g = GridFunction(np.array([1.0, 2.0]), (0.0,), (1.0,))
        vals = g.lookup(np.array([0.0, 0.999, 1.0, 1.999, 2.0, -0.1]))
        assert list(vals) == [1.0, 1.0, 2.0, 2.0, 0.0, 0.0]

    def test_lookup_clamp(self):
        g = GridFunction(np.array([1.0, 2.0]), (0.0,), (1.0,))
        vals = g.lookup(np.array([-5.0, 5.0]), outside="clamp")
        assert list(vals) == [1.0, 2.0]

    def test_support_clearance(self):
        grid = GridFunction.uniform((0.0, 1.0), 10)
        u = grid.with_values(np.array([0, 0, 1, 1, 0, 0, 0, 0, 0, 0],
                                      dtype=float))
        assert u.support_clearance() == pytest.approx(0.2)
        assert grid.support_clearance() == math.inf

    def test_csv_roundtrip_1d(self, tmp_path):
        g = GridFunction(np.array([1.5, -2.0, 0.25]), (-1.0,), (0.5,))
        g.to_csv(tmp_path / "g.csv")
        back = GridFunction.read_csv(tmp_path / "g.csv")
        assert back.same_grid(g)
        assert np.array_equal(back.values, g.values)

    def test_csv_roundtrip_2d(self, tmp_path):
        g = GridFunction(np.arange(6, dtype=float).reshape(2, 3),
                         (0.0, 1.0), (0.5, 0.25))
        g.to_csv(tmp_path / "g.csv")
        back = GridFunction.read_csv(tmp_path / "g.csv")
        assert back.same_grid(g)
        assert np.array_equal(back.values, g.values)


class TestFlatDistance:
    def test_identical(self):
        mu = AtomicMeasure(np.array([0.5, 1.5]), np.array([0.3, 0.7]))
        assert flat_distance(mu, mu) == pytest.approx(0.0, abs=1e-12)

    def test_same_site_mass_gap(self):
        # optimal test function is constant +-1
        mu = AtomicMeasure(np.array([1.0]), np.array([0.8]))
        nu = AtomicMeasure(np.array([1.0]), np.array([0.3]))
        assert flat_distance(mu, nu) == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize("h,expect", [(0.25, 0.25), (1.0, 1.0),
                                          (2.0, 2.0), (5.0, 2.0)])
    def test_unit_atoms_translate(self, h, expect):
        mu = AtomicMeasure(np.array([0.0]), np.array([1.0]))
        nu = AtomicMeasure(np.array([h]), np.array([1.0]))
        assert flat_distance(mu, nu) == pytest.approx(expect, abs=1e-9)

    def test_brute_force_oracle(self):
        # independent oracle: grid search over test-function values at the
        # atoms subject to |phi| <= 1 and pairwise slope <= 1
        rng = np.random.default_rng(7)
        for _ in range(5):
            pos = np.sort(rng.uniform(0, 2, 3))
            mu = AtomicMeasure(pos, rng.uniform(0, 1, 3))
            nu = AtomicMeasure(pos, rng.uniform(0, 1, 3))
            w = mu.masses - nu.masses
            grid = np.linspace(-1, 1, 81)
            best = -np.inf
            for a in grid:
                for b in grid:
                    if abs(b - a) > pos[1] - pos[0] + 1e-12:
                        continue
                    for c in grid:
                        if abs(c - b) > pos[2] - pos[1] + 1e-12:
                            continue
                        best = max(best, a * w[0] + b * w[1] + c * w[2])
            got = flat_distance(mu, nu)
            assert got == pytest.approx(best, abs=2e-2)
            assert got >= best - 1e-9  # grid search only undershoots

    def test_mass_difference_lower_bound_and_tv_upper(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            mu = AtomicMeasure(rng.uniform(0, 3, 4), rng.uniform(0, 1, 4))
            nu = AtomicMeasure(rng.uniform(0, 3, 3), rng.uniform(0, 1, 3))
            d = flat_distance(mu, nu)
            assert d >= abs(mu.total_mass() - nu.total_mass()) - 1e-9
            assert d <= mu.total_mass() + nu.total_mass() + 1e-9

    def test_bounded_by_shared_site_mass_gap(self):
        # constant +-1 test functions are feasible, so the flat distance
        # never exceeds the per-site mass differences
        rng = np.random.default_rng(8)
        for _ in range(10):
            pos = np.sort(rng.uniform(0, 2, 5))
            m1, m2 = rng.uniform(0, 1, 5), rng.uniform(0, 1, 5)
            d = flat_distance(AtomicMeasure(pos, m1), AtomicMeasure(pos, m2))
            assert d <= float(np.sum(np.abs(m1 - m2))) + 1e-9

    def test_empty_measure(self):
        mu = AtomicMeasure(np.array([1.0, 2.0]), np.array([0.5, 0.25]))
        assert flat_distance(mu, AtomicMeasure.empty()) == pytest.approx(
            0.75, abs=1e-9)
        assert flat_distance(AtomicMeasure.empty(),
                             AtomicMeasure.empty()) == 0.0

    def test_resolution_monotone(self):
        mu = AtomicMeasure(np.array([0.2, 1.7]), np.array([1.0, 0.4]))
        nu = AtomicMeasure(np.array([0.9]), np.array([0.8]))
        vals = [flat_distance(mu, nu, resolution=r) for r in (2, 8, 32, 128)]
        for a, b in zip(vals, vals[1:]):
            assert b >= a - 1e-9
        assert max(vals) - min(vals) < 1e-9  # atoms are nodes: exact already


class TestMetricAxioms:
    def spaces(self):
        rng = np.random.default_rng(11)
        grid = GridFunction.uniform((0.0, 1.0), 16)
        def rand_grid():
            return grid.with_values(rng.uniform(-1, 1, 16))
        def rand_measure():
            n = rng.integers(1, 4)
            return AtomicMeasure(rng.uniform(0, 2, n), rng.uniform(0, 1, n))
        return [(l1_distance, rand_grid), (flat_distance, rand_measure)]

    def test_axioms_random_triples(self):
        for dist, sample in self.spaces():
            for _ in range(10):
                a, b, c = sample(), sample(), sample()
                assert dist(a, a) <= 1e-12
                assert abs(dist(a, b) - dist(b, a)) <= 1e-12
                assert dist(a, c) <= dist(a, b) + dist(b, c) + 1e-12


class TestAtomicMeasure:
    def test_merge_conserves_mass_bitexact(self):
        rng = np.random.default_rng(5)
        pos = rng.uniform(0, 1e-6, 8)
        mas = rng.uniform(0, 1, 8)
        mu = AtomicMeasure(pos, mas)
        merged = mu.merged(1.0)
        assert merged.n_atoms == 1
        assert merged.total_mass() == mu.total_mass()

    def test_merge_weighted_position(self):
        mu = AtomicMeasure(np.array([0.0, 1.0]), np.array([3.0, 1.0]))
        merged = mu.merged(2.0)
        assert merged.n_atoms == 1
        assert merged.positions[0] == pytest.approx(0.25)

    def test_sorted_and_nonnegative(self):
        mu = AtomicMeasure(np.array([2.0, 1.0]), np.array([0.1, 0.2]))
        assert list(mu.positions) == [1.0, 2.0]
        with pytest.raises(ValueError):
            AtomicMeasure(np.array([1.0]), np.array([-0.1]))

    def test_csv_roundtrip(self, tmp_path):
        mu = AtomicMeasure(np.array([0.25, 1.5]), np.array([0.4, 0.6]))
        mu.to_csv(tmp_path / "m.csv")
        back = AtomicMeasure.read_csv(tmp_path / "m.csv")
        assert np.array_equal(back.positions, mu.positions)
        assert np.array_equal(back.masses, mu.masses)


class TestBvTimeSeries:
    def test_left_continuous_evaluation(self):
        b = BvTimeSeries(np.array([0.0, 1.0]), np.array([5.0, 7.0]))
        assert float(b(1.0)) == 5.0       # left limit at the jump
        assert float(b(1.0 + 1e-12)) == 7.0
        assert float(b(0.5)) == 5.0
        assert float(b(-3.0)) == 5.0      # constant extension on the left

    def test_tv_subinterval(self):
        b = BvTimeSeries(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 3.0]))
        assert b.tv() == pytest.approx(3.0)
        assert b.tv(1.5, 3.0) == pytest.approx(2.0)
        assert b.tv(2.5, 3.0) == pytest.approx(0.0)

    def test_l1(self):
        b = BvTimeSeries(np.array([0.0, 1.0]), np.array([2.0, -1.0]))
        assert b.l1(0.0, 2.0) == pytest.approx(2.0 + 1.0)


class TestBvEstimates:
    def test_constant_pair_margins_equal_rhs(self):
        grid = GridFunction.uniform((0.0, 1.0), 10)
        c = grid.with_values(np.full(10, 2.0))
        d = grid.with_values(np.full(10, 0.1))
        rep = bv_estimate_checks(c, c, d)
        for chk in rep.checks:
            assert chk.lhs == pytest.approx(0.0, abs=1e-14)
            assert chk.margin == pytest.approx(chk.rhs, abs=1e-14)

    def test_indicator_times_ramp(self):
        grid = GridFunction.uniform((-1.0, 2.0), 120)
        u = indicator(grid, 0.0, 1.0)
        xs = grid.axis_centers(0)
        w = grid.with_values(np.clip(xs, 0.0, 1.0))
        d = grid.with_values(np.zeros(120))
        rep = bv_estimate_checks(u, w, d)
        prod = next(c for c in rep.checks if c.name == "tv-product-rule")
        assert prod.lhs <= prod.rhs - 1e-6  # strict margin

    def test_shift_bound_exact_at_constant_shift(self):
        grid = GridFunction.uniform((-1.0, 2.0), 300)  # dx = 0.01
        u = indicator(grid, 0.0, 1.0)
        d = grid.with_values(np.full(300, 0.2))
        lhs = shifted_l1_difference(u, d)
        assert lhs == pytest.approx(0.4, abs=1e-12)
        rep = bv_estimate_checks(u, u, d)
        shift = next(c for c in rep.checks if c.name == "l1-shift-bound")
        assert shift.lhs == pytest.approx(0.4, abs=1e-12)
        assert shift.rhs == pytest.approx(0.4, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=4, max_size=24),
           st.lists(st.floats(-2, 2), min_size=4, max_size=24),
           st.integers(0, 10 ** 6))
    def test_random_pairs_hold(self, uv, wv, dseed):
        n = min(len(uv), len(wv))
        grid = GridFunction.uniform((0.0, 1.0), n)
        u = grid.with_values(np.array(uv[:n]))
        w = grid.with_values(np.array(wv[:n]))
        rng = np.random.default_rng(dseed)
        d = grid.with_values(rng.uniform(0, 0.5, n))
        rep = bv_estimate_checks(u, w, d)
        assert rep.all_hold(tol=1e-12)
