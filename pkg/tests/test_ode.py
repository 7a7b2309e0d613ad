import math

import numpy as np
import pytest

from polyflow.errors import (DomainExit, GridMismatch, HorizonExceeded,
                             HorizonUnreachable, NegativeRadius)
from polyflow.ode import (NonlocalField, OdeField, nonlocal_constants,
                          nonlocal_eval, nonlocal_ode_field,
                          ode_continue_global, ode_constants,
                          ode_domain_radius, ode_solve)
from polyflow.spaces import GridFunction


def linear_field(radius=8.0):
    return OdeField(f=lambda t, u, w: u, lip=1.0, sup=radius, radius=radius)


class TestOdeSolve:
    def test_constant_rate_exact(self):
        field = OdeField(f=lambda t, u, w: np.full(1, float(w)),
                         lip=1.0, sup=2.0, radius=4.0)
        out = ode_solve(field, 0.0, 1.0, np.zeros(1), 2.0, n_sub=3)
        assert out[0] == pytest.approx(2.0, abs=1e-14)

    def test_exponential(self):
        out = ode_solve(linear_field(), 0.0, 1.0, np.array([1.0]), None,
                        n_sub=100)
        assert abs(out[0] - math.e) < 1e-8

    def test_start_time_identity(self):
        u0 = np.array([0.3, -0.4])
        out = ode_solve(linear_field(), 0.5, 0.5, u0, None)
        assert np.array_equal(out, u0)

    def test_domain_exit(self):
        field = OdeField(f=lambda t, u, w: u, lip=1.0, sup=1.0, radius=1.5)
        with pytest.raises(DomainExit):
            ode_solve(field, 0.0, 1.0, np.array([1.0]), None, n_sub=16)

    def test_horizon_exceeded(self):
        with pytest.raises(HorizonExceeded):
            ode_solve(linear_field(), 0.0, 2.0, np.array([0.1]), None,
                      horizon=1.0)

    def test_rk4_order(self):
        errs = []
        for n in (8, 16, 32, 64):
            out = ode_solve(linear_field(), 0.0, 1.0, np.array([1.0]), None,
                            n_sub=n)
            errs.append(abs(out[0] - math.e))
        orders = [math.log2(errs[i] / errs[i + 1])
                  for i in range(len(errs) - 1)]
        assert min(orders) >= 3.9

    def test_lipschitz_in_data(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            u1 = rng.uniform(-1, 1, 3)
            u2 = rng.uniform(-1, 1, 3)
            v1 = ode_solve(linear_field(), 0.0, 0.7, u1, None, n_sub=32)
            v2 = ode_solve(linear_field(), 0.0, 0.7, u2, None, n_sub=32)
            lhs = np.linalg.norm(v1 - v2)
            rhs = math.exp(1.0 * 0.7) * np.linalg.norm(u1 - u2)
            assert lhs <= rhs * (1 + 1e-6)

    def test_lipschitz_in_parameter(self):
        field = OdeField(f=lambda t, u, w: np.full(1, float(w)),
                         lip=1.0, sup=4.0, radius=8.0)
        horizon = 1.0
        c = ode_constants(field, horizon)
        v1 = ode_solve(field, 0.0, 1.0, np.zeros(1), 1.0, n_sub=4)
        v2 = ode_solve(field, 0.0, 1.0, np.zeros(1), -0.5, n_sub=4)
        assert abs(v1[0] - v2[0]) <= c.c_w * 1.0 * 1.5 * (1 + 1e-6)

    def test_time_lipschitz(self):
        field = OdeField(f=lambda t, u, w: np.array([math.cos(3 * t)]),
                         lip=0.0, sup=1.0, radius=4.0)
        v1 = ode_solve(field, 0.0, 0.5, np.zeros(1), None, n_sub=64)
        v2 = ode_solve(field, 0.0, 0.9, np.zeros(1), None, n_sub=64)
        assert abs(v2[0] - v1[0]) <= field.sup * 0.4 * (1 + 1e-6)


class TestAudit:
    def test_honest_certificates_pass(self):
        field = OdeField(f=lambda t, u, w: u, lip=1.0, sup=8.0, radius=8.0)
        rng = np.random.default_rng(0)
        assert field.audit(rng, n=128, dim=2) <= 0.0

    def test_understated_certificates_flagged(self):
        field = OdeField(f=lambda t, u, w: 3.0 * u, lip=1.0, sup=24.0,
                         radius=8.0)
        rng = np.random.default_rng(0)
        assert field.audit(rng, n=128, dim=2) > 0.0


class TestDomainRadius:
    def test_at_horizon(self):
        assert ode_domain_radius(1.0, 1.0, 2.0, 1.0) == 2.0

    def test_interior_value(self):
        assert ode_domain_radius(0.0, 0.5, 1.0, 1.0) == pytest.approx(0.5)

    def test_zero_sup(self):
        for t in (0.0, 0.3, 1.0):
            assert ode_domain_radius(t, 1.0, 3.0, 0.0) == 3.0

    def test_negative_radius_configuration(self):
        with pytest.raises(NegativeRadius):
            ode_domain_radius(0.0, 1.0, 1.0, 1.0)  # horizon > R/(2 sup)


class TestContinuation:
    def test_unit_sup_doubling_segments(self):
        family = lambda R: OdeField(f=lambda t, u, w: np.zeros_like(u),
                                    lip=0.0, sup=1.0, radius=R)
        traj = ode_continue_global(family, 0.0, np.array([0.2]), 10.0,
                                   steps_per_unit=4)
        segments = traj.meta["segments"]
        assert len(segments) <= 5
        assert traj.times[-1] == pytest.approx(10.0)

    def test_linear_sup_constant_segments(self):
        family = lambda R: OdeField(f=lambda t, u, w: np.zeros_like(u),
                                    lip=0.0, sup=R, radius=R)
        traj = ode_continue_global(family, 0.0, np.array([0.2]), 3.0,
                                   steps_per_unit=4)
        segments = traj.meta["segments"]
        assert len(segments) == 6  # half-unit segments
        for seg in segments[:-1]:
            assert seg["t_end"] - seg["t_start"] == pytest.approx(0.5)

    def test_zero_field_single_segment(self):
        family = lambda R: OdeField(f=lambda t, u, w: np.zeros_like(u),
                                    lip=0.0, sup=0.0, radius=R)
        traj = ode_continue_global(family, 0.0, np.zeros(1), 5.0,
                                   steps_per_unit=2)
        assert len(traj.meta["segments"]) == 1
        assert all(abs(s[0]) == 0.0 for s in traj.states)

    def test_unreachable_horizon(self):
        # sup growing quadratically: segment lengths ~ 1/R shrink too fast
        family = lambda R: OdeField(f=lambda t, u, w: np.zeros_like(u),
                                    lip=0.0, sup=R * R, radius=R)
        with pytest.raises(HorizonUnreachable):
            ode_continue_global(family, 0.0, np.zeros(1), 10.0,
                                steps_per_unit=1, k_max=25)


class TestNonlocal:
    def make_field(self, kernel):
        grid = GridFunction.uniform((-1.0, 2.0), 3000)
        return NonlocalField(
            g=lambda t, u, W: u * 0 + W,
            g_lip=1.0, g_sup=5.0, kernel=kernel, grid=grid,
            kernel_sup=1.0, radius=5.0)

    def test_zero_kernel(self):
        field = self.make_field(lambda t, x: np.zeros_like(x))
        w = field.grid.with_values(np.ones(3000))
        assert nonlocal_eval(field, 0.0, np.zeros(1), w)[0] == 0.0

    def test_unit_kernel_indicator(self):
        field = self.make_field(lambda t, x: np.ones_like(x))
        xs = field.grid.axis_centers(0)
        w = field.grid.with_values(((xs >= 0) & (xs < 1)).astype(float))
        out = nonlocal_eval(field, 0.0, np.zeros(1), w)
        assert abs(out[0] - 1.0) < 1e-3

    def test_zero_parameter(self):
        field = self.make_field(lambda t, x: np.ones_like(x))
        w = field.grid.with_values(np.zeros(3000))
        assert nonlocal_eval(field, 0.0, np.zeros(1), w)[0] == 0.0

    def test_grid_mismatch(self):
        field = self.make_field(lambda t, x: np.ones_like(x))
        other = GridFunction.uniform((-1.0, 2.0), 100)
        with pytest.raises(GridMismatch):
            nonlocal_eval(field, 0.0, np.zeros(1), other)

    def test_derived_constants(self):
        field = self.make_field(lambda t, x: np.ones_like(x))
        ode = nonlocal_ode_field(field)
        assert ode.lip == pytest.approx(2.0)  # g_lip * (1 + kernel_sup)
        assert ode.sup == 5.0
        c = nonlocal_constants(field, horizon=0.5)
        assert c.c_u == pytest.approx(2.0)
        assert c.c_t == 5.0
        assert c.c_w == pytest.approx(2.0 * math.exp(2.0 * 0.5))
