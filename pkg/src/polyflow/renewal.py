"""Linear continuity equation with growth and source, solved on characteristics.

Solves ``du/dt + div(v(t,x,w) u) = m(t,x,w) u + q(t,x,w)`` on a truncated
grid (1D or 2D) by evaluating the exact representation formula per cell: the
datum is carried along the backward characteristic and multiplied by the
exponential of the accumulated ``m - div v``, plus the matching source
convolution.  Discretization error enters only through characteristic
integration (RK4), midpoint quadrature, and the piecewise-constant lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import InadmissibleHorizon, SupportClearanceViolated
from .metric import GridFunctionSpace, Process, ProcessConstants
from .spaces import GridFunction


@dataclass(frozen=True)
class RenewalCoefficients:
    """Coefficient fields with certified bounds.

    The callables must be elementwise-vectorized: ``velocity(t, x, w)``
    returns an array shaped like ``x`` (1D positions ``(n,)`` or 2D points
    ``(n, 2)``); ``growth`` and ``source`` return ``(n,)``.  ``t`` may be a
    scalar or an ``(n,)`` array.

    Certificates (never inferred, optionally audited): ``v_sup`` bounds
    ``|v|``, ``v_lip`` bounds the space gradient and the parameter modulus of
    v, ``v_div_lip`` the L1 norm of the divergence gradient; ``m_sup_tv``
    bounds ``|m| + TV(m)``, ``q_sup_tv`` bounds ``|q| + TV(q)``, ``q_l1`` the
    L1 norm of q; ``m_param_lip`` / ``q_param_lip`` the parameter moduli.
    """

    velocity: Callable[[Any, np.ndarray, Any], np.ndarray]
    growth: Callable[[Any, np.ndarray, Any], np.ndarray]
    source: Callable[[Any, np.ndarray, Any], np.ndarray]
    v_sup: float = 0.0
    v_lip: float = 0.0
    v_div_lip: float = 0.0
    m_sup_tv: float = 0.0
    m_param_lip: float = 0.0
    q_sup_tv: float = 0.0
    q_l1: float = 0.0
    q_param_lip: float = 0.0


def audit_coefficients(coef: RenewalCoefficients, grid: GridFunction, w,
                       rng: np.random.Generator, n: int = 16,
                       t_range: tuple[float, float] = (0.0, 1.0)) -> float:
    """Randomized certificate audit on grid samples (worst violation, <=0 ok).

    Checks sup bounds of the velocity, the sup+variation bound of the growth
    rate, and the L1 plus sup+variation bounds of the source, with the
    variation taken on the supplied grid.  Evidence, not proof.
    """
    worst = -math.inf
    pts = grid.centers()
    for _ in range(n):
        t = float(rng.uniform(*t_range))
        v = np.asarray(coef.velocity(t, pts, w), dtype=float)
        speeds = np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=1)
        worst = max(worst, float(np.max(speeds)) - coef.v_sup)
        m = grid.with_values(np.asarray(coef.growth(t, pts, w), dtype=float)
                             .reshape(grid.values.shape))
        worst = max(worst, m.linf() + m.tv() - coef.m_sup_tv)
        q = grid.with_values(np.asarray(coef.source(t, pts, w), dtype=float)
                             .reshape(grid.values.shape))
        worst = max(worst, q.l1() - coef.q_l1)
        worst = max(worst, q.linf() + q.tv() - coef.q_sup_tv)
    return worst


def characteristic(velocity, t_bar: float, x_bar, t: float, w,
                   n_sub: int = 16) -> np.ndarray:
    """Integrate ``dx/ds = velocity(s, x, w)`` from ``t_bar`` to ``t`` (RK4).

    Backward integration (``t < t_bar``) is supported; velocity stays
    bounded, so no domain bookkeeping is needed.
    """
    x = np.asarray(x_bar, dtype=float).copy()
    if t == t_bar:
        return x
    h = (t - t_bar) / n_sub
    s = t_bar
    for _ in range(n_sub):
        k1 = np.asarray(velocity(s, x, w), dtype=float)
        k2 = np.asarray(velocity(s + 0.5 * h, x + 0.5 * h * k1, w), dtype=float)
        k3 = np.asarray(velocity(s + 0.5 * h, x + 0.5 * h * k2, w), dtype=float)
        k4 = np.asarray(velocity(s + h, x + h * k3, w), dtype=float)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += h
    return x


def _divergence(velocity, t, pts: np.ndarray, dx: tuple[float, ...], w
                ) -> np.ndarray:
    """Central-difference divergence of the analytic field, step dx/2."""
    if pts.ndim == 1:
        h = 0.5 * dx[0]
        vp = np.asarray(velocity(t, pts + h, w), dtype=float)
        vm = np.asarray(velocity(t, pts - h, w), dtype=float)
        return (vp - vm) / (2.0 * h)
    div = np.zeros(pts.shape[0])
    for a in range(pts.shape[1]):
        h = 0.5 * dx[a]
        e = np.zeros(pts.shape[1])
        e[a] = h
        vp = np.asarray(velocity(t, pts + e, w), dtype=float)
        vm = np.asarray(velocity(t, pts - e, w), dtype=float)
        div = div + (vp[:, a] - vm[:, a]) / (2.0 * h)
    return div


def backward_transport(coef: RenewalCoefficients, w, t: float, t_lo,
                       x: np.ndarray, n_sub: int, dx: tuple[float, ...]
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feet, growth factors and source integrals of backward characteristics.

    Integrates from ``(t, x)`` down to ``t_lo`` (scalar, or per-point array
    in 1D) in ``n_sub`` RK4 steps, accumulating by the midpoint rule the
    exponent ``int (m - div v) ds`` and the source convolution
    ``int q * exp(int_s^t (m - div v)) ds``.

    Returns ``(foot, growth, source_integral)``.
    """
    pts = np.asarray(x, dtype=float).copy()
    scalar_lo = np.ndim(t_lo) == 0
    if pts.ndim == 2 and not scalar_lo:
        raise ValueError("per-point end times only supported in 1D")
    lo = float(t_lo) if scalar_lo else np.asarray(t_lo, dtype=float)
    ds = (t - lo) / n_sub
    n_pts = pts.shape[0]
    exponent = np.zeros(n_pts)
    source_acc = np.zeros(n_pts)
    for j in range(n_sub):
        s_hi = t - j * ds
        h = -ds
        k1 = np.asarray(coef.velocity(s_hi, pts, w), dtype=float)
        k2 = np.asarray(coef.velocity(s_hi + 0.5 * h, pts + 0.5 * h * k1, w),
                        dtype=float)
        k3 = np.asarray(coef.velocity(s_hi + 0.5 * h, pts + 0.5 * h * k2, w),
                        dtype=float)
        k4 = np.asarray(coef.velocity(s_hi + h, pts + h * k3, w), dtype=float)
        nxt = pts + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s_mid = s_hi + 0.5 * h
        p_mid = 0.5 * (pts + nxt)
        contrib = (np.asarray(coef.growth(s_mid, p_mid, w), dtype=float)
                   - _divergence(coef.velocity, s_mid, p_mid, dx, w)) * ds
        factor_mid = np.exp(exponent + 0.5 * contrib)
        source_acc = source_acc + (np.asarray(coef.source(s_mid, p_mid, w),
                                              dtype=float)
                                   * factor_mid * ds)
        exponent = exponent + contrib
        pts = nxt
    return pts, np.exp(exponent), source_acc


def renewal_solve(coef: RenewalCoefficients, u0: GridFunction, w,
                  t0: float, t: float, n_sub: int = 10,
                  grid: GridFunction | None = None) -> GridFunction:
    """Advance the datum from ``t0`` to ``t`` with the parameter frozen.

    Requires the datum's support to keep ``v_sup * (t - t0)`` clearance from
    the box edge, so no mass reaches the truncation boundary.
    """
    if t < t0:
        raise ValueError("t must be >= t0")
    target = grid if grid is not None else u0
    needed = coef.v_sup * (t - t0)
    if u0.support_clearance() < needed - 1e-12:
        raise SupportClearanceViolated(
            f"support clearance {u0.support_clearance():.3g} below "
            f"required {needed:.3g}")
    if t == t0 and target.same_grid(u0):
        return u0
    centers = target.centers()
    foot, factor, src = backward_transport(coef, w, t, t0, centers, n_sub,
                                           target.dx)
    vals = u0.lookup(foot, outside="zero") * factor + src
    return target.with_values(vals.reshape(target.values.shape))


# --------------------------------------------------------------------------
# Invariant domain and process moduli
# --------------------------------------------------------------------------

def ivp_domain_bounds(t: float, radius: float, horizon: float,
                      coef: RenewalCoefficients
                      ) -> tuple[float, float, float]:
    """Envelope (alpha_1, alpha_inf, alpha_tv) of the invariant domain at t.

    Raises ``InadmissibleHorizon`` when any component is non-positive (the
    configured radius/horizon pair admits no invariant domain there).
    """
    if not 0 <= t <= horizon * (1 + 1e-12):
        raise ValueError("t must lie in [0, horizon]")
    m, vl, v1 = coef.m_sup_tv, coef.v_lip, coef.v_div_lip
    q1, qi = coef.q_l1, coef.q_sup_tv
    rem = horizon - t
    a1 = radius * math.exp(-m * rem) - q1 * rem * math.exp(m * t)
    ai = (radius * math.exp(-(m + vl) * rem)
          - qi * math.exp((m + vl) * t) * rem)
    atv = (radius * math.exp(-(m + vl) * rem) * (1.0 - (m + v1) * rem)
           - qi * math.exp((m + vl) * t) * (1.0 + (m + v1) * t) * rem)
    if min(a1, ai, atv) <= 0:
        raise InadmissibleHorizon(
            f"domain envelope non-positive at t={t}: "
            f"({a1:.3g}, {ai:.3g}, {atv:.3g})")
    return a1, ai, atv


def ivp_lipschitz_constants(coef: RenewalCoefficients, horizon: float,
                            radius: float) -> ProcessConstants:
    """Process moduli (data, time, parameter) over ``horizon``."""
    m, vl, v1, vs = coef.m_sup_tv, coef.v_lip, coef.v_div_lip, coef.v_sup
    c_t = (vs * radius * math.exp((m + 2 * vl) * horizon)
           + coef.q_l1 * math.exp(m * horizon)
           + (m + vl) * radius * math.exp((m + vl) * horizon))
    c_w = ((vl * (2 * radius + coef.q_sup_tv) * (1 + (v1 + m) * horizon)
            + (coef.q_param_lip
               + (coef.m_param_lip + vl) * (radius + coef.q_sup_tv * horizon)))
           * math.exp((m + vl) * horizon))
    return ProcessConstants(c_u=m, c_t=c_t, c_w=c_w, horizon=horizon)


def make_renewal_process(coef: RenewalCoefficients, radius: float,
                         horizon: float, n_sub_per_unit: float = 32.0,
                         min_sub: int = 2, domain_slack: float = 1e-6,
                         enforce_domain: bool = True) -> Process:
    """Wrap the solver as a process handle with the envelope domain."""

    def solve(t, t0, u, w):
        n = max(min_sub, int(math.ceil((t - t0) * n_sub_per_unit - 1e-12)))
        return renewal_solve(coef, u, w, t0, t, n_sub=n)

    def domain(t, u: GridFunction):
        if not enforce_domain:
            return True
        tc = min(max(t, 0.0), horizon)
        try:
            a1, ai, atv = ivp_domain_bounds(tc, radius, horizon, coef)
        except InadmissibleHorizon:
            return False
        slack = 1.0 + domain_slack
        return (u.l1() <= a1 * slack and u.linf() <= ai * slack
                and u.tv() <= atv * slack)

    return Process(solve=solve,
                   constants=ivp_lipschitz_constants(coef, horizon, radius),
                   space=GridFunctionSpace(), domain=domain,
                   interval=(0.0, horizon))
