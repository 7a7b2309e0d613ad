"""Balance law on the half line with strict inflow at the origin.

Solves ``du/dt + d/dx(v(t,x) u) = m(t,x,w) u + q(t,x,w)`` for ``x >= 0``
with boundary trace ``u(t, 0) = b(t)``.  The explicit solution splits at the
curve traced by the characteristic leaving the origin at the start time: to
its right the interior representation applies (datum carried backward along
characteristics), to its left the state is seeded by the boundary series at
the crossing time.  The speed is bounded away from zero, so every backward
characteristic from the left region reaches the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import (InadmissibleHorizon, NoCrossing,
                     SupportClearanceViolated, UndefinedBoundaryDatum)
from .metric import GridFunctionSpace, Process, ProcessConstants
from .renewal import RenewalCoefficients, backward_transport, characteristic
from .spaces import BvTimeSeries, GridFunction


@dataclass(frozen=True)
class IbvpCoefficients:
    """Coefficients of the inflow problem with certified bounds.

    ``speed(t, x)`` takes values in ``[speed_min, speed_max]`` with
    ``speed_min > 0`` and does not depend on the parameter; ``growth`` and
    ``source`` have the renewal signatures; ``inflow`` is the left-continuous
    boundary series.  Certificates: ``v_var`` bounds the time+space variation
    of the speed, ``v_slope`` its space derivative's sup and variation;
    ``m_sup_tv``, ``m_param_lip``, ``q_l1``, ``q_sup_tv``, ``q_param_lip`` as
    in the renewal problem; ``b_l1``, ``b_sup_tv`` bound the boundary series.
    """

    speed: Callable[[Any, np.ndarray], np.ndarray]
    growth: Callable[[Any, np.ndarray, Any], np.ndarray]
    source: Callable[[Any, np.ndarray, Any], np.ndarray]
    inflow: BvTimeSeries
    speed_min: float
    speed_max: float
    v_var: float = 0.0
    v_slope: float = 0.0
    m_sup_tv: float = 0.0
    m_param_lip: float = 0.0
    q_l1: float = 0.0
    q_sup_tv: float = 0.0
    q_param_lip: float = 0.0
    b_l1: float = 0.0
    b_sup_tv: float = 0.0

    def __post_init__(self):
        if self.speed_min <= 0:
            raise ValueError("speed_min must be strictly positive (inflow)")
        if self.speed_max < self.speed_min:
            raise ValueError("speed_max must be >= speed_min")

    def as_renewal(self) -> RenewalCoefficients:
        """Parameter-blind view of the coefficients for the interior branch."""
        return RenewalCoefficients(
            velocity=lambda t, x, w: np.broadcast_to(
                np.asarray(self.speed(t, x), dtype=float), np.shape(x)).copy(),
            growth=self.growth,
            source=self.source,
            v_sup=self.speed_max,
            v_lip=self.v_slope,
            m_sup_tv=self.m_sup_tv,
            q_sup_tv=self.q_sup_tv,
            q_l1=self.q_l1,
        )


def boundary_crossing_time(speed, t: float, x, t0: float,
                           n_sub: int = 10) -> np.ndarray:
    """Time at which the backward characteristic through ``(t, x)`` hits 0.

    Integrates ``dt/dx = 1 / speed`` from ``x`` down to the boundary (RK4 in
    the space variable, vectorized over points).  Raises ``NoCrossing`` when
    the crossing happens before ``t0`` beyond a small consistency tolerance,
    which means the caller should have used the interior branch.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    tau = np.full(xs.shape, float(t))
    h = -xs / n_sub
    pos = xs.copy()
    rhs = lambda s, p: 1.0 / np.asarray(speed(s, np.maximum(p, 0.0)),
                                        dtype=float)
    for _ in range(n_sub):
        k1 = rhs(tau, pos)
        k2 = rhs(tau + 0.5 * h * k1, pos + 0.5 * h)
        k3 = rhs(tau + 0.5 * h * k2, pos + 0.5 * h)
        k4 = rhs(tau + h * k3, pos + h)
        tau = tau + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pos = pos + h
    tol = 1e-9 * max(1.0, t - t0)
    if np.any(tau < t0 - tol):
        raise NoCrossing("backward characteristic exits through the initial "
                         "time; use the interior branch")
    return np.clip(tau, t0, t)


def ibvp_solve(coef: IbvpCoefficients, u0: GridFunction, w,
               t0: float, t: float, n_sub: int = 10,
               grid: GridFunction | None = None,
               outflow_edge: bool = False) -> GridFunction:
    """Advance the datum with the parameter frozen, filling from the boundary.

    Cells are classified against the origin characteristic by their centers;
    the straddling cell takes its center's branch (the exact solution may
    genuinely jump there).  The interior branch reuses the renewal transport
    kernel verbatim, so with zero inflow and source it reproduces the free
    problem bit for bit.

    With ``outflow_edge`` the grid's right edge is a true model boundary
    with free outflow (mass crossing it is meant to leave), so no clearance
    is required there; otherwise the datum must keep ``speed_max * (t - t0)``
    clearance from the truncation edge.
    """
    if t < t0:
        raise ValueError("t must be >= t0")
    if u0.dim != 1:
        raise ValueError("half-line problem is one-dimensional")
    if coef.inflow is None or coef.inflow.times.size == 0:
        raise UndefinedBoundaryDatum("boundary series is empty")
    target = grid if grid is not None else u0
    if not outflow_edge:
        needed = coef.speed_max * (t - t0)
        clear_right = _right_clearance(u0)
        if clear_right < needed - 1e-12:
            raise SupportClearanceViolated(
                f"right-edge clearance {clear_right:.3g} below required "
                f"{needed:.3g}")
    if t == t0 and target.same_grid(u0):
        return u0

    ren = coef.as_renewal()
    sigma = float(characteristic(ren.velocity, t0, np.array([0.0]), t, w,
                                 n_sub=n_sub)[0])
    centers = target.centers()
    interior = centers >= sigma
    vals = np.zeros(centers.shape[0])

    if np.any(interior):
        foot, factor, src = backward_transport(ren, w, t, t0,
                                               centers[interior], n_sub,
                                               target.dx)
        vals[interior] = u0.lookup(foot, outside="zero") * factor + src

    boundary = ~interior
    if np.any(boundary):
        cross = boundary_crossing_time(coef.speed, t, centers[boundary], t0,
                                       n_sub=n_sub)
        _, factor_b, src_b = backward_transport(ren, w, t, cross,
                                                centers[boundary], n_sub,
                                                target.dx)
        vals[boundary] = coef.inflow(cross) * factor_b + src_b

    return target.with_values(vals)


def _right_clearance(u: GridFunction) -> float:
    nz = np.nonzero(u.values)[0]
    if nz.size == 0:
        return math.inf
    return (u.values.shape[0] - 1 - int(nz.max())) * u.dx[0]


# --------------------------------------------------------------------------
# Invariant domain and process moduli
# --------------------------------------------------------------------------

def ibvp_domain_bounds(t: float, radius: float, horizon: float,
                       coef: IbvpCoefficients
                       ) -> tuple[float, float, float]:
    """Envelope (alpha_1, alpha_inf, alpha_tv) of the invariant domain at t.

    The variation component also controls the boundary mismatch
    ``TV(u) + |b(t) - u(0+)|`` and subtracts the remaining variation of the
    boundary series on ``[t, horizon]``.
    """
    if not 0 <= t <= horizon * (1 + 1e-12):
        raise ValueError("t must lie in [0, horizon]")
    m = coef.m_sup_tv
    vl = coef.v_slope
    qi, q1 = coef.q_sup_tv, coef.q_l1
    b_sup = coef.b_sup_tv
    rem = horizon - t
    a1 = (radius * math.exp(-m * rem)
          - (coef.speed_max * b_sup + q1) * rem * math.exp(m * t))
    ai = radius * math.exp(-m * rem) - qi * rem
    atv = (radius * (1.0 - (m + vl) * rem) * math.exp((m + vl) * rem)
           - 2.0 * qi * (1.0 + (m + vl) * t) * rem * math.exp((m + vl) * t)
           - b_sup * (m + vl) * rem * math.exp((m + vl) * t)
           - coef.inflow.tv(t, horizon) * math.exp((m + vl) * t))
    if min(a1, ai, atv) <= 0:
        raise InadmissibleHorizon(
            f"domain envelope non-positive at t={t}: "
            f"({a1:.3g}, {ai:.3g}, {atv:.3g})")
    return a1, ai, atv


def ibvp_lipschitz_constants(coef: IbvpCoefficients, horizon: float,
                             radius: float) -> ProcessConstants:
    """Process moduli (data, time, parameter) over ``horizon``."""
    m, vl = coef.m_sup_tv, coef.v_slope
    vmax = coef.speed_max
    c_t = ((vmax * (coef.b_l1 + 2 * radius + radius * (m + vl) * horizon)
            + m * radius + coef.q_l1) * math.exp(m * horizon))
    c_w = ((coef.b_sup_tv * coef.m_param_lip
            + vmax * coef.q_param_lip
            + 0.5 * vmax * coef.q_sup_tv * coef.m_param_lip * horizon
            + coef.m_param_lip * radius
            + coef.q_param_lip
            + 0.5 * coef.m_param_lip * coef.q_sup_tv * horizon)
           * math.exp(m * horizon))
    return ProcessConstants(c_u=m, c_t=c_t, c_w=c_w, horizon=horizon)


def make_ibvp_process(coef: IbvpCoefficients, radius: float, horizon: float,
                      n_sub_per_unit: float = 32.0, min_sub: int = 2,
                      domain_slack: float = 1e-6,
                      enforce_domain: bool = True,
                      outflow_edge: bool = False) -> Process:
    """Wrap the solver as a process handle with the envelope domain."""

    def solve(t, t0, u, w):
        n = max(min_sub, int(math.ceil((t - t0) * n_sub_per_unit - 1e-12)))
        return ibvp_solve(coef, u, w, t0, t, n_sub=n,
                          outflow_edge=outflow_edge)

    def domain(t, u: GridFunction):
        if not enforce_domain:
            return True
        tc = min(max(t, 0.0), horizon)
        try:
            a1, ai, atv = ibvp_domain_bounds(tc, radius, horizon, coef)
        except InadmissibleHorizon:
            return False
        slack = 1.0 + domain_slack
        trace_gap = abs(float(coef.inflow(tc)) - float(u.values[0]))
        return (u.l1() <= a1 * slack and u.linf() <= ai * slack
                and u.tv() + trace_gap <= atv * slack)

    return Process(solve=solve,
                   constants=ibvp_lipschitz_constants(coef, horizon, radius),
                   space=GridFunctionSpace(), domain=domain,
                   interval=(0.0, horizon))
