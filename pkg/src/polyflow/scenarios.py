"""Coupled application models: pursuit on a density, and staged vaccination.

Both models pair two of the concrete solvers through the product-space
coupler: the pursuit model couples the transported prey density (continuity
equation with a predator-driven velocity and a feeding sink) with the
predator's ODE; the vaccination model couples the susceptible/infective ODE
block with the transport of the vaccinated cohort along its immunization
age, fed by the vaccination-rate boundary series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, InadmissibleHorizon, KernelOutOfBox
from .ibvp import (IbvpCoefficients, ibvp_domain_bounds,
                   make_ibvp_process)
from .metric import (EuclideanSpace, GridFunctionSpace, Process,
                     couple, refine_to_process)
from .ode import OdeField, make_ode_process, ode_domain_radius
from .renewal import (RenewalCoefficients, ivp_domain_bounds,
                      make_renewal_process)
from .spaces import BvTimeSeries, GridFunction
from .trajectory import Trajectory


@dataclass(frozen=True)
class RefineSchedule:
    """Dyadic refinement schedule for the coupled polygonals."""

    j0: int = 0
    j_max: int = 8
    tol: float = 1e-5


# --------------------------------------------------------------------------
# Compactly supported polynomial bumps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Bump:
    """Profile ``s -> amp * (1 - (s / radius)^2)^4`` on ``|s| < radius``."""

    radius: float
    amp: float = 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        y = s / self.radius
        inside = np.abs(y) < 1.0
        return np.where(inside, self.amp * (1.0 - y * y) ** 4, 0.0)

    def slope(self, s):
        s = np.asarray(s, dtype=float)
        y = s / self.radius
        inside = np.abs(y) < 1.0
        return np.where(
            inside,
            self.amp * 4.0 * (1.0 - y * y) ** 3 * (-2.0 * y / self.radius),
            0.0)


def spatial_bump_norm(radius: float, dim: int) -> float:
    """Integral of ``(1 - (|x| / radius)^2)^4`` over R^dim."""
    if dim == 1:
        return radius * 256.0 / 315.0
    if dim == 2:
        return math.pi * radius ** 2 / 5.0
    raise ValueError("dim must be 1 or 2")


# --------------------------------------------------------------------------
# Pursuit model (prey density + predator position)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PredatorPreyParams:
    """Configuration of the pursuit model.

    The prey flees with speed ``-(p - x) / (alpha + |p - x|^2)`` weighted by
    a unit-integral bump of the squared distance (spatial support radius
    ``escape_radius``); the predator climbs the density averaged by a
    unit-integral spatial bump of radius ``search_radius``; feeding removes
    prey at rate ``feeding_rate`` within ``feeding_radius`` of the predator.
    """

    dim: int
    alpha: float
    escape_radius: float
    search_radius: float
    feeding_radius: float
    feeding_rate: float
    box: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    horizon: float
    macro_step: float
    prey_center: tuple[float, ...]
    prey_radius: float
    prey_amp: float
    predator_start: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def grid(self) -> GridFunction:
        return GridFunction.uniform(list(self.box), list(self.cells))

    def initial_density(self) -> GridFunction:
        g = self.grid()
        c = np.asarray(self.prey_center, dtype=float)
        bump = Bump(self.prey_radius, self.prey_amp)
        if self.dim == 1:
            return GridFunction.from_callable(
                lambda x: bump(np.abs(x - c[0])), g.origin, g.dx,
                g.values.shape)
        return GridFunction.from_callable(
            lambda x, y: bump(np.hypot(x - c[0], y - c[1])),
            g.origin, g.dx, g.values.shape)


@dataclass(frozen=True)
class PredatorPreyFields:
    prey: RenewalCoefficients
    predator: OdeField
    escape: Bump
    search: Bump
    feeding: Bump


def _sampled_sup(f: Callable[[np.ndarray], np.ndarray], lo: float,
                 hi: float, n: int = 4001) -> float:
    xs = np.linspace(lo, hi, n)
    return float(np.max(np.abs(f(xs))))


def predator_prey_fields(params: PredatorPreyParams) -> PredatorPreyFields:
    """Build the two coefficient sets with sampled certificates."""
    dim = params.dim
    for a in range(dim):
        span = params.box[a][1] - params.box[a][0]
        widest = 2.0 * max(params.escape_radius, params.search_radius,
                           params.feeding_radius)
        if widest > span:
            raise KernelOutOfBox(
                f"kernel diameter {widest:.3g} exceeds box span {span:.3g} "
                f"on axis {a}")

    # weight of the squared distance; evaluating the spatial profile at the
    # plain distance realizes exactly the same function
    escape = Bump(params.escape_radius,
                  1.0 / spatial_bump_norm(params.escape_radius, dim))
    search = Bump(params.search_radius,
                  1.0 / spatial_bump_norm(params.search_radius, dim))
    feeding = Bump(params.feeding_radius, params.feeding_rate)
    alpha = params.alpha

    def prey_velocity(t, x, p):
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        d = p - x  # (n,) in 1D, (n,2) in 2D with p (2,)
        if dim == 1:
            dist_sq = d * d
            return -d / (alpha + dist_sq) * escape(np.abs(d))
        dist_sq = np.sum(d * d, axis=-1)
        w = escape(np.sqrt(dist_sq)) / (alpha + dist_sq)
        return -d * w[..., None]

    def prey_sink(t, x, p):
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        if dim == 1:
            dist = np.abs(p - x)
        else:
            dist = np.linalg.norm(p - x, axis=-1)
        return -feeding(dist)

    def zero_source(t, x, p):
        return np.zeros(np.shape(x)[0] if np.ndim(x) else 1)

    # speed certificates from the 1D radial profile g(s) = s/(a+s^2) w(s)
    radial = lambda s: s / (alpha + s * s) * escape(s)
    reach = params.escape_radius
    v_sup = _sampled_sup(radial, 0.0, reach) * 1.0000001
    h = reach / 4000.0
    radial_slope = lambda s: (radial(s + h) - radial(s - h)) / (2 * h)
    v_lip = _sampled_sup(radial_slope, h, reach - h) * (2.0 if dim == 2 else 1.0)
    v_lip = max(v_lip, v_sup / math.sqrt(alpha)) * 1.05
    # div-gradient L1 bound, sampled on the kernel support
    xs = np.linspace(-reach, reach, 2001)
    if dim == 1:
        # the 1D speed is odd around the predator, so its divergence is the
        # even extension of the radial slope
        div = radial_slope(np.abs(xs))
        grad_div = np.gradient(div, xs)
        v_div_lip = float(np.trapezoid(np.abs(grad_div), xs)) * 1.1
    else:
        n2 = 201
        g1 = np.linspace(-reach, reach, n2)
        X, Y = np.meshgrid(g1, g1, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        dd = g1[1] - g1[0]
        divv = _numeric_div(lambda q: prey_velocity(0.0, q, np.zeros(2)),
                            pts, dd).reshape(n2, n2)
        gx, gy = np.gradient(divv, dd, dd)
        v_div_lip = float(np.sum(np.hypot(gx, gy)) * dd * dd) * 1.1

    m_sup = params.feeding_rate
    if dim == 1:
        m_tv = 2.0 * params.feeding_rate
    else:
        rr = np.linspace(0, params.feeding_radius, 2001)
        m_tv = float(np.trapezoid(np.abs(feeding.slope(rr)) * 2 * np.pi * rr,
                                  rr)) * 1.05
    m_param_lip = m_tv  # same gradient integral controls the p-shift

    prey = RenewalCoefficients(
        velocity=prey_velocity, growth=prey_sink, source=zero_source,
        v_sup=v_sup, v_lip=v_lip, v_div_lip=v_div_lip,
        m_sup_tv=m_sup + m_tv, m_param_lip=m_param_lip,
        q_sup_tv=0.0, q_l1=0.0, q_param_lip=0.0)

    # predator field: gradient-of-average drift
    grad_sup = _sampled_sup(search.slope, 0.0, params.search_radius) * 1.05
    hess_sup = grad_sup / params.search_radius * 8.0  # coarse curvature bound
    rho0 = params.initial_density()
    mass_bound = rho0.l1() * 1.5 + 1e-9

    def predator_velocity(t, p, rho: GridFunction):
        pts = rho.centers()
        p = np.asarray(p, dtype=float)
        if dim == 1:
            diff = p[0] - pts
            # gradient of the radial bump: slope(|z|) * z/|z|
            grad = search.slope(np.abs(diff)) * np.sign(diff)
            val = np.sum(grad * rho.values) * rho.cell_volume
            return np.array([val])
        diff = p[None, :] - pts
        dist = np.linalg.norm(diff, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            safe = np.maximum(dist, 1e-300)[:, None]
            unit = np.where(dist[:, None] > 0, diff / safe, 0.0)
        grad = search.slope(dist)[:, None] * unit
        val = np.sum(grad * rho.values.reshape(-1, 1), axis=0) * rho.cell_volume
        return val

    predator = OdeField(
        f=predator_velocity,
        lip=max(hess_sup * mass_bound, grad_sup) * 1.1,
        sup=grad_sup * mass_bound,
        radius=1.0,  # placeholder; sized in run_predator_prey
    )
    return PredatorPreyFields(prey=prey, predator=predator, escape=escape,
                              search=search, feeding=feeding)


def _numeric_div(vfun, pts: np.ndarray, h: float) -> np.ndarray:
    div = np.zeros(pts.shape[0])
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        div += (vfun(pts + e)[:, a] - vfun(pts - e)[:, a]) / (2 * h)
    return div


def _fit_density_radius(coef: RenewalCoefficients, u0: GridFunction,
                        horizon: float) -> float:
    """Smallest doubling radius whose envelope admits the datum at t=0."""
    norms = (u0.l1(), u0.linf(), u0.tv())
    radius = max(max(norms), 1e-6) * 2.0
    for _ in range(60):
        try:
            a = ivp_domain_bounds(0.0, radius, horizon, coef)
            if all(n <= b for n, b in zip(norms, a)):
                return radius
        except InadmissibleHorizon:
            pass
        radius *= 2.0
    raise InadmissibleHorizon(
        "no admissible radius: horizon too long for the coefficient bounds")


def run_predator_prey(params: PredatorPreyParams,
                      schedule: RefineSchedule = RefineSchedule(),
                      n_sub_per_unit: float = 16.0,
                      initial: tuple[GridFunction, np.ndarray] | None = None,
                      ) -> Trajectory:
    """Run the coupled pursuit model over macro steps.

    Each macro step advances the pair (density, position) by the dyadic
    refinement of the frozen-parameter coupling; diagnostics record mass,
    norms, variation, the invariant-envelope margins of the density and the
    ball margin of the predator.  ``initial`` overrides the configured
    initial pair (used for restarts).
    """
    fields = predator_prey_fields(params)
    if initial is None:
        rho0 = params.initial_density()
        p0 = np.asarray(params.predator_start, dtype=float)
    else:
        rho0 = initial[0]
        p0 = np.asarray(initial[1], dtype=float)

    horizon = params.horizon
    macro = params.macro_step

    sup_p = fields.predator.sup
    radius_p = max(2.0 * (np.linalg.norm(p0) + 1.0),
                   2.2 * sup_p * macro)
    predator = OdeField(f=fields.predator.f, lip=fields.predator.lip,
                        sup=sup_p, radius=radius_p)

    # beyond the density grid's crossing time the cell lookup quantizes
    # transport away, so clamp the refinement depth accordingly
    dx_min = min(rho0.dx)
    if fields.prey.v_sup > 0:
        j_floor = max(0, int(math.floor(
            math.log2(max(macro * fields.prey.v_sup / dx_min, 1.0)) + 1e-9)))
    else:
        j_floor = schedule.j_max
    j_max = min(schedule.j_max, j_floor)
    j0 = min(schedule.j0, j_max)

    times = [0.0]
    states = [(rho0, p0)]
    diag = {name: [] for name in
            ("mass", "l1", "linf", "tv", "alpha1_margin", "alphainf_margin",
             "alphatv_margin", "p_ball_margin", "refine_gap")}
    # samples sit at macro boundaries, i.e. at the end of each per-macro
    # invariant envelope; sharp kernels can make the variation envelope
    # inadmissible at this macro length, in which case margins are NaN
    try:
        radius_rho = _fit_density_radius(fields.prey, rho0, macro)
        a1, ai, atv = ivp_domain_bounds(macro, radius_rho, macro, fields.prey)
        envelope = "admissible"
    except InadmissibleHorizon:
        radius_rho = math.nan
        a1 = ai = atv = math.nan
        envelope = "inadmissible-at-macro-length"
    ball = ode_domain_radius(macro, macro, radius_p, sup_p)
    # moduli bookkeeping needs a finite radius even without an envelope
    radius_const = (radius_rho if math.isfinite(radius_rho)
                    else 2.0 * max(rho0.l1(), rho0.linf(), rho0.tv(), 1.0))

    def record(t, state, gap):
        rho, p = state
        diag["mass"].append(rho.mass())
        diag["l1"].append(rho.l1())
        diag["linf"].append(rho.linf())
        diag["tv"].append(rho.tv())
        diag["alpha1_margin"].append(a1 - rho.l1())
        diag["alphainf_margin"].append(ai - rho.linf())
        diag["alphatv_margin"].append(atv - rho.tv())
        diag["p_ball_margin"].append(ball - float(np.linalg.norm(p)))
        diag["refine_gap"].append(gap)

    record(0.0, states[0], 0.0)
    state = states[0]
    t = 0.0
    n_macro = int(round(horizon / macro))
    for k in range(n_macro):
        prey_proc = make_renewal_process(
            fields.prey, radius_const, macro, n_sub_per_unit=n_sub_per_unit,
            enforce_domain=False)
        pred_proc = make_ode_process(predator, macro,
                                     steps_per_unit=n_sub_per_unit * 4)
        prey_proc = Process(solve=prey_proc.solve,
                            constants=prey_proc.constants,
                            space=prey_proc.space, domain=prey_proc.domain,
                            interval=(t, t + macro))
        pred_proc = Process(solve=pred_proc.solve,
                            constants=pred_proc.constants,
                            space=pred_proc.space,
                            domain=lambda s, x: True,
                            interval=(t, t + macro))
        flow = couple(prey_proc, pred_proc)
        res = refine_to_process(flow, macro, t, state, schedule.tol,
                                j0, j_max)
        state = res.point
        t += macro
        times.append(t)
        states.append(state)
        record(t, state, res.gap)

    return Trajectory(times=times, states=states, diagnostics=diag,
                      meta={"radius_rho": radius_rho, "radius_p": radius_p,
                            "macro_step": macro, "envelope": envelope,
                            "j0": j0, "j_max": j_max})


# --------------------------------------------------------------------------
# Vaccination model (S/I ODE + immunization-age transport)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EpidemicParams:
    """Configuration of the staged-vaccination model.

    The vaccinated cohort ``V(t, tau)`` is transported in its time since
    dose ``tau`` on ``[0, immunization_lag]``, damped by the infections it
    still incurs at reduced rate ``vaccinated_infectivity(tau) * I``, and fed
    at ``tau = 0`` by the vaccination rate; at ``tau = immunization_lag``
    individuals exit into the recovered compartment.
    """

    infection_rate: float                    # susceptible infectivity
    recovery_rate: float
    mortality_rate: float
    vaccination_rate: BvTimeSeries           # inflow series p(t) >= 0
    immunization_lag: float
    vaccinated_infectivity: GridFunction     # rate vs time since dose
    s0: float
    i0: float
    r0: float
    v0: GridFunction                         # initial cohort on [0, lag]
    admissible_radius: float                 # bound r in the data condition
    horizon: float
    macro_step: float

    def __post_init__(self):
        r = self.admissible_radius
        for name in ("s0", "i0", "r0"):
            v = getattr(self, name)
            if not 0 <= v <= r:
                raise ValueError(f"{name} must lie in [0, {r}]")
        if self.v0.tv() + self.v0.linf() > r * (1 + 1e-12):
            raise ValueError("initial cohort violates the data bound: "
                             "TV(V0) + sup|V0| must not exceed the radius")
        if np.any(self.v0.values < 0):
            raise ValueError("initial cohort must be nonnegative")
        if np.any(self.vaccination_rate.vals < 0):
            raise ValueError("vaccination rate must be nonnegative")
        if not self.v0.same_grid(self.vaccinated_infectivity):
            raise ValueError("v0 and vaccinated_infectivity must share a grid")


@dataclass
class EpidemicRun:
    trajectory: Trajectory
    recovered: list[float]
    exit_trace: list[float]
    warnings: list[str] = field(default_factory=list)

    def final_cohort(self) -> GridFunction:
        return self.trajectory.states[-1][1]


def _epidemic_ode_field(params: EpidemicParams, ball_radius: float,
                        cohort_mass_bound: float) -> OdeField:
    rho_s = params.infection_rate
    theta, mu = params.recovery_rate, params.mortality_rate
    rho_v = params.vaccinated_infectivity
    rate_fn = params.vaccination_rate
    cell = rho_v.cell_volume

    def f(t, u, cohort: GridFunction):
        exposure = float(np.sum(rho_v.values * cohort.values) * cell)
        s, i = float(u[0]), float(u[1])
        ds = -rho_s * s * i - float(rate_fn(t))
        di = (rho_s * s + exposure - theta - mu) * i
        return np.array([ds, di])

    rho_v_sup = rho_v.linf()
    lip = (2.0 * rho_s * ball_radius + rho_v_sup * cohort_mass_bound
           + theta + mu + ball_radius * rho_v_sup)
    sup = (rho_s * ball_radius ** 2 + rate_fn.sup()
           + ball_radius * (rho_s * ball_radius
                            + rho_v_sup * cohort_mass_bound + theta + mu))
    return OdeField(f=f, lip=lip, sup=sup, radius=ball_radius)


def _epidemic_ibvp(params: EpidemicParams, i_bound: float
                   ) -> IbvpCoefficients:
    rho_v = params.vaccinated_infectivity

    def growth(t, x, w):
        return -rho_v.lookup(np.asarray(x, dtype=float), outside="clamp") \
            * float(np.asarray(w, dtype=float).reshape(-1)[1])

    def source(t, x, w):
        return np.zeros(np.shape(np.asarray(x))[0])

    p = params.vaccination_rate
    horizon = params.horizon
    return IbvpCoefficients(
        speed=lambda t, x: np.ones(np.shape(np.asarray(x))[0]),
        growth=growth, source=source, inflow=p,
        speed_min=1.0, speed_max=1.0, v_var=0.0, v_slope=0.0,
        m_sup_tv=(rho_v.linf() + rho_v.tv()) * i_bound,
        m_param_lip=rho_v.l1(),
        q_l1=0.0, q_sup_tv=0.0, q_param_lip=0.0,
        b_l1=p.l1(0.0, horizon), b_sup_tv=p.sup() + p.tv())


def _fit_cohort_radius(coef: IbvpCoefficients, v0: GridFunction,
                       span: float) -> float:
    trace_gap = abs(float(coef.inflow(0.0)) - float(v0.values[0]))
    norms = (v0.l1(), v0.linf(), v0.tv() + trace_gap)
    radius = max(max(norms), 1e-6) * 2.0
    for _ in range(60):
        try:
            a = ibvp_domain_bounds(0.0, radius, span, coef)
            if all(n <= b for n, b in zip(norms, a)):
                return radius
        except InadmissibleHorizon:
            pass
        radius *= 2.0
    raise InadmissibleHorizon(
        "no admissible cohort radius: macro step too long for the bounds")


def run_epidemic(params: EpidemicParams,
                 schedule: RefineSchedule = RefineSchedule(),
                 n_sub_per_unit: float = 32.0) -> EpidemicRun:
    """Run the coupled vaccination model over macro steps.

    The (S, I) block and the cohort transport advance together through the
    coupler; the recovered compartment is integrated afterwards by the
    trapezoid rule from ``recovery_rate * I`` plus the cohort's exit trace,
    reflecting the model's triangular structure.  States dipping below
    ``-1e-9`` are reported as warnings, never clamped.
    """
    macro = params.macro_step
    horizon = params.horizon
    n_macro = int(round(horizon / macro))
    if abs(n_macro * macro - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigError("time.horizon must be a multiple of time.macro_step")

    pop0 = params.s0 + params.i0 + params.r0 + params.v0.l1()
    ball = 2.0 * (math.hypot(params.s0, params.i0) + 0.5)
    cohort_mass_bound = (params.v0.l1()
                         + params.vaccination_rate.sup() * horizon + 1.0)
    ode_field = _epidemic_ode_field(params, ball, cohort_mass_bound)
    # shrink the macro horizon if the certified ball segment is shorter
    seg_cap = ball / (2.0 * ode_field.sup) if ode_field.sup > 0 else macro
    if macro > seg_cap * (1 + 1e-12):
        raise ConfigError(
            f"time.macro_step {macro} exceeds the certified segment "
            f"{seg_cap:.3g}; reduce it or the ball radius")
    ibvp_coef = _epidemic_ibvp(params, i_bound=ball)
    radius_v = _fit_cohort_radius(ibvp_coef, params.v0, macro)

    # polygonal steps below the cohort grid's crossing time quantize the
    # age transport to zero (cell lookup), so clamp the refinement depth
    dx_tau = params.v0.dx[0]
    j_floor = max(0, int(math.floor(math.log2(macro / dx_tau) + 1e-9)))
    j_max = min(schedule.j_max, j_floor)
    j0 = min(schedule.j0, j_max)

    u = np.array([params.s0, params.i0])
    cohort = params.v0
    last_cell = cohort.values.shape[0] - 1

    times = [0.0]
    states = [(u.copy(), cohort)]
    warnings: list[str] = []
    diag = {name: [] for name in
            ("S", "I", "l1", "linf", "tv", "alpha1_margin",
             "alphainf_margin", "alphatv_margin", "population",
             "refine_gap")}

    def record(t, state, gap):
        uu, vv = state
        try:
            a1, ai, atv = ibvp_domain_bounds(macro, radius_v, macro,
                                             ibvp_coef)
        except InadmissibleHorizon:
            a1 = ai = atv = math.nan
        trace_gap = abs(float(params.vaccination_rate(t))
                        - float(vv.values[0]))
        diag["S"].append(float(uu[0]))
        diag["I"].append(float(uu[1]))
        diag["l1"].append(vv.l1())
        diag["linf"].append(vv.linf())
        diag["tv"].append(vv.tv())
        diag["alpha1_margin"].append(a1 - vv.l1())
        diag["alphainf_margin"].append(ai - vv.linf())
        diag["alphatv_margin"].append(atv - (vv.tv() + trace_gap))
        diag["population"].append(float(uu[0]) + float(uu[1]) + vv.l1())
        diag["refine_gap"].append(gap)

    record(0.0, states[0], 0.0)
    t = 0.0
    state = states[0]
    for k in range(n_macro):
        ode_proc = make_ode_process(ode_field, macro,
                                    steps_per_unit=n_sub_per_unit)
        ode_proc = Process(solve=ode_proc.solve, constants=ode_proc.constants,
                           space=EuclideanSpace(),
                           domain=lambda s, x: True,
                           interval=(t, t + macro))
        v_proc = make_ibvp_process(ibvp_coef, radius_v, macro,
                                   n_sub_per_unit=n_sub_per_unit,
                                   enforce_domain=False, outflow_edge=True)
        v_proc = Process(solve=v_proc.solve, constants=v_proc.constants,
                         space=GridFunctionSpace(),
                         domain=lambda s, x: True,
                         interval=(t, t + macro))
        flow = couple(ode_proc, v_proc)
        res = refine_to_process(flow, macro, t, state, schedule.tol,
                                j0, j_max)
        state = res.point
        t += macro
        times.append(t)
        states.append(state)
        record(t, state, res.gap)
        if min(state[0]) < -1e-9:
            warnings.append(
                f"negative state at t={t:.6g}: S={state[0][0]:.3g} "
                f"I={state[0][1]:.3g}")

    # triangular tail: recovered compartment by the trapezoid rule
    exit_trace = [float(st[1].values[last_cell]) for st in states]
    integrand = [params.recovery_rate * float(st[0][1]) + ex
                 for st, ex in zip(states, exit_trace)]
    recovered = [params.r0]
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        recovered.append(recovered[-1]
                         + 0.5 * dt * (integrand[k] + integrand[k + 1]))

    diag["R"] = recovered
    diag["population"] = [p + r for p, r in zip(diag["population"], recovered)]
    traj = Trajectory(times=times, states=states, diagnostics=diag,
                      meta={"radius_v": radius_v, "ball": ball,
                            "macro_step": macro, "population0": pop0,
                            "j0": j0, "j_max": j_max})
    return EpidemicRun(trajectory=traj, recovered=recovered,
                       exit_trace=exit_trace, warnings=warnings)


def epidemic_cohort_reference(params: EpidemicParams, times: list[float],
                              i_values: list[float], t_query: float,
                              n_time: int = 2000) -> GridFunction:
    """Closed-form cohort profile at ``t_query`` from a sampled I history.

    Along the age characteristic through ``(t, tau)`` the damping rate is
    ``vaccinated_infectivity(s - t + tau) * I(s)``; the profile is seeded by
    the initial cohort where the characteristic predates the start, by the
    vaccination-rate series once it enters through ``tau = 0``.  ``I`` is
    interpolated linearly between the given samples.
    """
    rho_v = params.vaccinated_infectivity
    v0 = params.v0
    p = params.vaccination_rate
    taus = v0.axis_centers(0)
    t_arr = np.asarray(times, dtype=float)
    i_arr = np.asarray(i_values, dtype=float)
    out = np.zeros(taus.shape[0])
    for idx, tau in enumerate(taus):
        if t_query <= tau:  # characteristic reaches back to the start
            s = np.linspace(0.0, t_query, n_time)
            base = float(v0.lookup(np.array([tau - t_query]),
                                   outside="clamp")[0])
        else:
            s = np.linspace(t_query - tau, t_query, n_time)
            base = float(p(t_query - tau))
        ages = s - t_query + tau
        rates = rho_v.lookup(ages, outside="clamp") * np.interp(s, t_arr, i_arr)
        expo = float(np.trapezoid(rates, s))
        out[idx] = base * math.exp(-expo)
    return v0.with_values(out)
