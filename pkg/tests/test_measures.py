import math

import numpy as np
import pytest

from polyflow.errors import MassBlowup
from polyflow.measures import (MeasureCoefficients, audit_coefficients,
                               evolve, measure_domain_bound, measure_step,
                               weak_residual)
from polyflow.spaces import AtomicMeasure, flat_distance


def constant_fields(drift=0.0, decay=0.0, child=None):
    return MeasureCoefficients(
        drift=lambda t, mu, w, x: np.full(np.shape(x), drift),
        decay=lambda t, mu, w, x: np.full(np.shape(x), decay),
        offspring=(child if child is not None
                   else lambda t, mu, w, y: AtomicMeasure.empty()),
        drift_bound=abs(drift), decay_bound=abs(decay),
        birth_bound=0.0 if child is None else 1.0)


class TestMeasureStep:
    def test_pure_drift(self):
        mu = AtomicMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.25]))
        out = measure_step(constant_fields(drift=1.0), mu, None, 0.0, 0.125)
        assert np.allclose(out.positions, mu.positions + 0.125)
        assert np.array_equal(out.masses, mu.masses)

    def test_pure_decay(self):
        mu = AtomicMeasure(np.array([0.3, 0.9]), np.array([0.5, 0.25]))
        out = measure_step(constant_fields(decay=1.0), mu, None, 0.0, 0.25)
        assert out.total_mass() == pytest.approx(
            mu.total_mass() * math.exp(-0.25))

    def test_self_offspring_growth(self):
        # each atom spawns dt * mass at its own site; merge absorbs it
        child = lambda t, mu, w, y: AtomicMeasure(np.array([y]),
                                                  np.array([1.0]))
        coef = constant_fields(child=child)
        mu = AtomicMeasure(np.array([0.2, 1.4]), np.array([0.5, 0.25]))
        dt = 0.0625
        out = measure_step(coef, mu, None, 0.0, dt, merge_eps=1e-9)
        assert out.n_atoms == 2
        assert out.total_mass() == pytest.approx(
            mu.total_mass() * (1 + dt), rel=1e-12)

    def test_clamp_to_half_line(self):
        mu = AtomicMeasure(np.array([0.05]), np.array([1.0]))
        out = measure_step(constant_fields(drift=-1.0), mu, None, 0.0, 0.5)
        assert out.positions[0] == 0.0

    def test_mass_blowup_guard(self):
        coef = MeasureCoefficients(
            drift=lambda t, mu, w, x: np.zeros(np.shape(x)),
            decay=lambda t, mu, w, x: np.zeros(np.shape(x)),
            offspring=lambda t, mu, w, y: AtomicMeasure.empty(),
            mass_radius=1.0)
        mu = AtomicMeasure(np.array([0.5]), np.array([2.0]))
        with pytest.raises(MassBlowup):
            measure_step(coef, mu, None, 0.0, 0.1)

    def test_deterministic_merge_order(self):
        mu = AtomicMeasure(np.array([0.0, 1e-12, 1.0]),
                           np.array([0.25, 0.5, 0.125]))
        a = measure_step(constant_fields(), mu, None, 0.0, 0.1,
                         merge_eps=1e-9)
        b = measure_step(constant_fields(), mu, None, 0.0, 0.1,
                         merge_eps=1e-9)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.masses, b.masses)
        assert a.total_mass() == mu.total_mass()


class TestDomainBound:
    def test_at_horizon(self):
        assert measure_domain_bound(1.0, 1.0, 3.0, 1.0, 1.0, 1.0) == 3.0

    def test_zero_rates(self):
        for t in (0.0, 0.4, 1.0):
            assert measure_domain_bound(t, 1.0, 2.0, 0.0, 0.0, 0.0) == 2.0

    def test_exponential_value(self):
        got = measure_domain_bound(0.0, 1.0, 1.0, 1.0 / 9, 1.0 / 9, 1.0 / 9)
        assert got == pytest.approx(math.exp(-1.0))


def interacting_fields():
    return MeasureCoefficients(
        drift=lambda t, mu, w, x: 0.4 + 0.1 * np.sin(x)
        + 0.05 * mu.total_mass() * np.ones(np.shape(x)),
        decay=lambda t, mu, w, x: 0.3 + 0.1 * np.cos(x),
        offspring=lambda t, mu, w, y: AtomicMeasure(np.array([0.3]),
                                                    np.array([0.2])),
        drift_bound=0.6, decay_bound=0.4, birth_bound=0.2)


def cutoff(x):
    y = np.asarray(x, dtype=float) / 6.0
    return np.where(np.abs(y) < 1.0, (1.0 - y * y) ** 2, 0.0)


def cutoff_slope(x):
    y = np.asarray(x, dtype=float) / 6.0
    return np.where(np.abs(y) < 1.0, 2.0 * (1.0 - y * y) * (-2.0 * y / 6.0),
                    0.0)


class TestWeakResidual:
    def test_first_order_in_dt(self):
        mu0 = AtomicMeasure(np.array([0.2, 0.8, 1.5]),
                            np.array([0.4, 0.3, 0.3]))
        coef = interacting_fields()
        res = []
        for steps in (8, 16, 32, 64):
            r = weak_residual(
                coef, mu0, None, 0.0, 1.0, 1.0 / steps,
                phi=lambda t, x: (1 + 0.5 * t) * cutoff(x),
                phi_t=lambda t, x: 0.5 * cutoff(x),
                phi_x=lambda t, x: (1 + 0.5 * t) * cutoff_slope(x))
            res.append(abs(r))
        orders = [math.log2(res[i] / res[i + 1]) for i in range(3)]
        assert float(np.median(orders)) >= 0.9

    def test_mass_envelope_along_trajectory(self):
        mu0 = AtomicMeasure(np.array([0.2, 0.8, 1.5]),
                            np.array([0.4, 0.3, 0.3]))
        coef = interacting_fields()
        total = coef.drift_bound + coef.decay_bound + coef.birth_bound
        radius = mu0.total_mass() * math.exp(3 * total)
        dt = 1.0 / 64
        times, states = evolve(coef, mu0, None, 0.0, 1.0, dt)
        for t, st in zip(times, states):
            bound = measure_domain_bound(t, 1.0, radius, coef.drift_bound,
                                         coef.decay_bound, coef.birth_bound)
            assert st.total_mass() <= bound + 10 * dt


class TestAudit:
    def test_honest_bounds_pass(self):
        mu = AtomicMeasure(np.array([0.2, 0.8]), np.array([0.4, 0.3]))
        rng = np.random.default_rng(0)
        assert audit_coefficients(interacting_fields(), mu, None,
                                  rng) <= 1e-12

    def test_negative_origin_drift_flagged(self):
        coef = constant_fields(drift=-1.0)
        mu = AtomicMeasure(np.array([0.5]), np.array([0.5]))
        rng = np.random.default_rng(0)
        assert audit_coefficients(coef, mu, None, rng) > 0.5


class TestFlatStability:
    def test_step_contraction_factor(self):
        rng = np.random.default_rng(21)
        coef = interacting_fields()
        total = coef.drift_bound + coef.decay_bound + coef.birth_bound
        dt = 0.05
        for _ in range(5):
            pos = np.sort(rng.uniform(0, 2, 3))
            mu = AtomicMeasure(pos, rng.uniform(0.1, 0.5, 3))
            nu = AtomicMeasure(pos, rng.uniform(0.1, 0.5, 3))
            d0 = flat_distance(mu, nu)
            if d0 < 1e-9:
                continue
            d1 = flat_distance(measure_step(coef, mu, None, 0.0, dt),
                               measure_step(coef, nu, None, 0.0, dt))
            assert d1 <= math.exp(3 * total * dt) * d0 * (1 + 1e-2)

    def test_semigroup_restart(self):
        mu0 = AtomicMeasure(np.array([0.2, 0.8, 1.5]),
                            np.array([0.4, 0.3, 0.3]))
        coef = interacting_fields()
        dt = 1.0 / 32
        _, direct = evolve(coef, mu0, None, 0.0, 1.0, dt)
        _, first = evolve(coef, mu0, None, 0.0, 0.5, dt)
        _, second = evolve(coef, first[-1], None, 0.5, 1.0, dt)
        gap = flat_distance(direct[-1], second[-1])
        assert gap <= 5 * dt
