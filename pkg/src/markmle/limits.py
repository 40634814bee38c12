"""Population limits of the mass estimator under a known model.

A model carries the joint CDF F0 of (event time, mark), the per-inspection
marginal measures G_j and the consecutive-pair measures G_{j-1,j} of the
inspection times. From those the module builds

    V(x, y)  = sum_j int_{[0,x]} F0(t, y) dG_j(t)
               - sum_{j>=2} int int_{0<=s<=t<=x} F0(s, y) dG_{j-1,j}(s, t)
    H(x)     = V(x, inf) + int_{[0,x]} (1 - F0X(s)) dG_k(s)

the cumulative hazards Lambda(x, y) = int V(ds, y) / (1 - H(s-)), and the
almost-sure limits of the lower-bound estimator via the survival product of
the X-hazard. Continuous components integrate by adaptive quadrature; atomic
components sum over atoms. All evaluation happens on a window whose right
edge tau keeps H(tau) < 1.

The hazard integrands sit inside other integrals, so the module keeps two
evaluation paths: exact adaptive quadrature for the public functions, and
cumulative knot tables with monotone interpolation for the inner loops. The
tables are built once per model and quadrature config and introduce errors
far below the quadrature tolerance on any window with H bounded away from 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np
from scipy.integrate import quad as _scipy_quad
from scipy.interpolate import PchipInterpolator


class QuadratureFailure(RuntimeError):
    """Adaptive quadrature did not converge to the requested tolerance."""


class WindowViolation(ValueError):
    """Evaluation point or tau lies outside the H < 1 window."""


class DivisionByZeroMeasure(ArithmeticError):
    """V_X(ds) vanishes on a region where V(ds, y) does not."""


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_subdivisions: int = 2000
    table_knots: int = 768

    def key(self) -> tuple:
        return (self.abs_tol, self.rel_tol, self.max_subdivisions, self.table_knots)


DEFAULT_QUADRATURE = QuadratureConfig()

# continuous hazard tables stop once H exceeds this; beyond it the code
# falls back to pointwise quadrature against the exact H
_TABLE_H_CUTOFF = 0.998


def _quad(f, a, b, config: QuadratureConfig, breakpoints=()) -> float:
    if b <= a:
        return 0.0
    pts = sorted({p for p in breakpoints if a < p < b})
    out = _scipy_quad(
        f,
        a,
        b,
        epsabs=config.abs_tol,
        epsrel=config.rel_tol,
        limit=config.max_subdivisions,
        points=pts or None,
        full_output=True,
    )
    if len(out) > 3:
        raise QuadratureFailure(f"quadrature on [{a}, {b}] failed: {out[3]}")
    return out[0]


@dataclass(frozen=True, eq=False)
class Measure1D:
    """Nonnegative measure on [0, inf): a density on [lo, hi] plus atoms."""

    density: Callable[[float], float] | None = None
    lo: float = 0.0
    hi: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()  # (location, weight)

    @property
    def kind(self) -> str:
        return "continuous" if self.density is not None else "atomic"

    def dens(self, t: float) -> float:
        if self.density is None or not self.lo <= t <= self.hi:
            return 0.0
        return self.density(t)


@dataclass(frozen=True, eq=False)
class Measure2D:
    """Measure on {0 <= s <= t}: a density on a box plus atoms (s, t, w)."""

    density: Callable[[float, float], float] | None = None
    s_lo: float = 0.0
    s_hi: float = 0.0
    t_lo: float = 0.0
    t_hi: float = 0.0
    atoms: tuple[tuple[float, float, float], ...] = ()

    @property
    def kind(self) -> str:
        return "continuous" if self.density is not None else "atomic"

    def dens(self, s: float, t: float) -> float:
        if (
            self.density is None
            or s > t
            or not self.s_lo <= s <= self.s_hi
            or not self.t_lo <= t <= self.t_hi
        ):
            return 0.0
        return self.density(s, t)


@dataclass(frozen=True)
class OrderStatKernel:
    """Aggregated inspection-time measures of k uniform order statistics.

    sum_j g_j(t) = (k/theta) on [0, theta] and
    sum_{j>=2} g_{j-1,j}(s, t) = k(k-1)/theta^2 (1-(t-s)/theta)^{k-2},
    which collapse V into a single weighted integral against the kernel
    density q_x(s) = (k/theta)(1-(x-s)/theta)^{k-1} on [0, x].
    """

    k: int
    theta: float

    def q_density(self, s: float, x: float) -> float:
        if not 0.0 <= s <= x or s > self.theta:
            return 0.0
        return (self.k / self.theta) * (1.0 - (x - s) / self.theta) ** (self.k - 1)

    def marginal_sum(self, t: float) -> float:
        return self.k / self.theta if 0.0 <= t <= self.theta else 0.0

    def pair_sum(self, s: float, t: float) -> float:
        if self.k < 2 or not 0.0 <= s <= t <= self.theta:
            return 0.0
        return (
            self.k
            * (self.k - 1)
            / self.theta**2
            * (1.0 - (t - s) / self.theta) ** (self.k - 2)
        )


@dataclass(frozen=True)
class JointDistribution:
    """CDF evaluators of (event time, mark); x_partial is d/dx F0(x, y)."""

    joint: Callable[[float, float], float]
    marg_x: Callable[[float], float]
    marg_y: Callable[[float], float]
    x_partial: Callable[[float, float], float] | None = None


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """Everything the limit computations need, with analytic inspection laws."""

    f0_joint: Callable[[float, float], float]
    f0_marg_x: Callable[[float], float]
    f0_marg_y: Callable[[float], float]
    g_marginals: tuple[Measure1D, ...]
    g_consecutive: tuple[Measure2D, ...]
    support_hint: tuple[float, str]
    f0_x_partial: Callable[[float, float], float] | None = None
    direct_kernel: OrderStatKernel | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if len(self.g_marginals) < 1:
            raise ValueError("at least one inspection-time marginal is required")
        if len(self.g_consecutive) != len(self.g_marginals) - 1:
            raise ValueError(
                "need exactly k-1 consecutive-pair measures for k marginals"
            )

    @property
    def k(self) -> int:
        return len(self.g_marginals)

    def breakpoints(self) -> tuple[float, ...]:
        pts = {0.0, self.support_hint[0]}
        for g in self.g_marginals:
            if g.density is not None:
                pts.update((g.lo, g.hi))
            pts.update(loc for loc, _ in g.atoms)
        for g in self.g_consecutive:
            if g.density is not None:
                pts.update((g.s_lo, g.s_hi, g.t_lo, g.t_hi))
            pts.update(t for _, t, _ in g.atoms)
        return tuple(sorted(pts))

    def has_continuous_part(self) -> bool:
        return any(g.density is not None for g in self.g_marginals)


@dataclass(frozen=True)
class EvaluationWindow:
    """Right edge tau (with H(tau) < 1, checked at construction) and x grid."""

    tau: float
    grid: tuple[float, ...]


def make_evaluation_window(
    model: PopulationModel,
    tau: float | None = None,
    grid=None,
    grid_step: float = 0.02,
    config: QuadratureConfig = DEFAULT_QUADRATURE,
) -> EvaluationWindow:
    """Build a window, defaulting tau to the largest point with H <= 0.995."""
    if tau is None:
        x_max = model.support_hint[0]
        for i in range(400, 0, -1):
            cand = x_max * i / 400.0
            if pop_H(model, cand, config) <= 0.995:
                tau = cand
                break
        if tau is None:
            raise WindowViolation("no candidate tau keeps H below 0.995")
    h_tau = pop_H(model, tau, config)
    if h_tau > 1.0 - 1e-6:
        raise WindowViolation(f"H({tau}) = {h_tau} leaves no margin below 1")
    if grid is None:
        grid = []
        i = 1
        while i * grid_step <= tau + 1e-12:
            grid.append(i * grid_step)
            i += 1
    if not grid:
        raise WindowViolation(f"window [0, {tau}] admits no grid points")
    return EvaluationWindow(tau=tau, grid=tuple(grid))


def _check_window(window: EvaluationWindow, x: float) -> None:
    if x > window.tau + 1e-12:
        raise WindowViolation(f"x = {x} exceeds tau = {window.tau}")


# ---------------------------------------------------------------------------
# V, V_X, H


def _v_atoms(model: PopulationModel, y: float | None):
    """Jumps of V(., y) by atom location; y=None means the marginal in x."""
    if y is None:
        cached = model._cache.get("vx_atoms")
        if cached is not None:
            return cached
    f0 = model.f0_marg_x if y is None else (lambda t: model.f0_joint(t, y))
    jumps: dict[float, float] = {}
    for g in model.g_marginals:
        for loc, w in g.atoms:
            jumps[loc] = jumps.get(loc, 0.0) + f0(loc) * w
    for g in model.g_consecutive:
        for s, t, w in g.atoms:
            jumps[t] = jumps.get(t, 0.0) - f0(s) * w
    out = sorted(jumps.items())
    if y is None:
        model._cache["vx_atoms"] = out
    return out


def _h_atoms(model: PopulationModel):
    cached = model._cache.get("h_atoms")
    if cached is not None:
        return cached
    jumps = dict(_v_atoms(model, None))
    for loc, w in model.g_marginals[-1].atoms:
        jumps[loc] = jumps.get(loc, 0.0) + (1.0 - model.f0_marg_x(loc)) * w
    out = sorted(jumps.items())
    model._cache["h_atoms"] = out
    return out


def _v_continuous(model, x, y, config) -> float:
    """Continuous part of V(x, y) as the two-part sum of integrals."""
    f0 = model.f0_marg_x if y is None else (lambda t: model.f0_joint(t, y))
    kern = model.direct_kernel
    if kern is not None:
        hi = min(x, kern.theta)
        return _quad(lambda s: f0(s) * kern.q_density(s, hi), 0.0, hi, config)
    bps = model.breakpoints()
    total = 0.0
    for g in model.g_marginals:
        if g.density is not None:
            total += _quad(
                lambda t: f0(t) * g.dens(t), 0.0, min(x, g.hi), config, bps
            )
    for g in model.g_consecutive:
        if g.density is not None:

            def outer(t, g=g):
                return _quad(
                    lambda s: f0(s) * g.dens(s, t), g.s_lo, min(t, g.s_hi), config
                )

            total -= _quad(outer, max(0.0, g.t_lo), min(x, g.t_hi), config, bps)
    return total


def pop_V(model: PopulationModel, x: float, y: float,
          config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Sub-distribution of (u, mark) restricted to observed events."""
    val = _v_continuous(model, x, y, config) if model.has_continuous_part() else 0.0
    return val + sum(w for loc, w in _v_atoms(model, y) if loc <= x)


def pop_VX(model: PopulationModel, x: float,
           config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    val = _v_continuous(model, x, None, config) if model.has_continuous_part() else 0.0
    return val + sum(w for loc, w in _v_atoms(model, None) if loc <= x)


def _v_density(model: PopulationModel, s: float, y: float | None,
               config: QuadratureConfig) -> float:
    """Density (in s) of the continuous part of V(., y)."""
    f0 = model.f0_marg_x if y is None else (lambda t: model.f0_joint(t, y))
    kern = model.direct_kernel
    if kern is not None:
        val = f0(s) * kern.marginal_sum(s)
        if kern.k >= 2 and 0.0 <= s <= kern.theta:
            val -= _quad(lambda u: f0(u) * kern.pair_sum(u, s), 0.0, s, config)
        return val
    val = 0.0
    for g in model.g_marginals:
        if g.density is not None:
            val += f0(s) * g.dens(s)
    for g in model.g_consecutive:
        if g.density is not None and g.t_lo <= s <= g.t_hi:
            val -= _quad(
                lambda u: f0(u) * g.dens(u, s), g.s_lo, min(s, g.s_hi), config
            )
    return val


def _h_density(model: PopulationModel, s: float, config: QuadratureConfig) -> float:
    val = _v_density(model, s, None, config)
    g_last = model.g_marginals[-1]
    if g_last.density is not None:
        val += (1.0 - model.f0_marg_x(s)) * g_last.dens(s)
    return val


def pop_H(model: PopulationModel, x: float,
          config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """CDF of the ordering statistic: H(x) = V_X(x) + P(no event, T_k <= x)."""
    key = ("H", x, config.key())
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    val = 0.0
    if model.has_continuous_part():
        hi = min(x, model.support_hint[0])
        val = _quad(
            lambda s: _h_density(model, s, config),
            0.0,
            hi,
            config,
            model.breakpoints(),
        )
    val += sum(w for loc, w in _h_atoms(model) if loc <= x)
    model._cache[key] = val
    return val


def _h_minus(model, s, config) -> float:
    h = pop_H(model, s, config)
    for loc, w in _h_atoms(model):
        if loc == s:
            h -= w
    return h


# ---------------------------------------------------------------------------
# cumulative tables for the inner loops


def _tables(model: PopulationModel, config: QuadratureConfig):
    """(knots, H-continuous interpolant, Lambda_X cutoff, interpolant)."""
    key = ("tables", config.key())
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    x_max = model.support_hint[0]
    knots = np.union1d(
        np.linspace(0.0, x_max, config.table_knots + 1),
        np.asarray([p for p in model.breakpoints() if 0.0 <= p <= x_max]),
    )
    vals = [0.0]
    for a, b in zip(knots[:-1], knots[1:]):
        vals.append(
            vals[-1] + _quad(lambda s: _h_density(model, s, config), a, b, config)
        )
    h_interp = PchipInterpolator(knots, np.asarray(vals))
    entry = (knots, h_interp, 0.0, None)
    model._cache[key] = entry  # lets _h_fast work while the hazard table builds

    lam_knots = [float(knots[0])]
    lam_vals = [0.0]
    for a, b in zip(knots[:-1], knots[1:]):
        if _h_fast(model, float(b), config) > _TABLE_H_CUTOFF:
            break
        step = _quad(
            lambda s: _v_density(model, s, None, config)
            / (1.0 - _h_fast(model, s, config)),
            a,
            b,
            config,
        )
        lam_knots.append(float(b))
        lam_vals.append(lam_vals[-1] + step)
    if len(lam_knots) >= 2:
        lx_interp = PchipInterpolator(np.asarray(lam_knots), np.asarray(lam_vals))
        lx_hi = lam_knots[-1]
    else:
        lx_interp, lx_hi = None, 0.0
    entry = (knots, h_interp, lx_hi, lx_interp)
    model._cache[key] = entry
    return entry


def _h_fast(model: PopulationModel, s: float, config: QuadratureConfig) -> float:
    val = 0.0
    if model.has_continuous_part():
        knots, h_interp, _, _ = _tables(model, config)
        clamped = min(max(s, float(knots[0])), float(knots[-1]))
        val = float(h_interp(clamped))
    return val + sum(w for loc, w in _h_atoms(model) if loc <= s)


def _lambda_x_cont_fast(model: PopulationModel, s: float,
                        config: QuadratureConfig) -> float:
    """Continuous part of Lambda_X(s) from the table, exact beyond it."""
    if not model.has_continuous_part() or s <= 0.0:
        return 0.0
    _, _, lx_hi, lx_interp = _tables(model, config)
    if lx_interp is not None and s <= lx_hi:
        return float(lx_interp(s))
    key = ("LXc_tail", s, config.key())
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    base = float(lx_interp(lx_hi)) if lx_interp is not None else 0.0
    tail = _quad(
        lambda t: _v_density(model, t, None, config)
        / (1.0 - pop_H(model, t, config)),
        lx_hi,
        s,
        config,
    )
    val = base + tail
    model._cache[key] = val
    return val


# ---------------------------------------------------------------------------
# hazards


def _lambda_parts(model, window, x, y, config):
    """(continuous integral, [(loc, jump), ...]) of Lambda(., y) up to x."""
    _check_window(window, x)
    cont = 0.0
    if model.has_continuous_part():

        def integrand(s):
            return _v_density(model, s, y, config) / (
                1.0 - _h_fast(model, s, config)
            )

        cont = _quad(integrand, 0.0, min(x, model.support_hint[0]), config,
                     model.breakpoints())
    jumps = []
    for loc, dv in _v_atoms(model, y):
        if loc <= x:
            denom = 1.0 - _h_minus(model, loc, config)
            jumps.append((loc, dv / denom))
    return cont, jumps


def _lambda_x_parts(model, window, x, config):
    key = ("LXparts", x, config.key())
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    parts = _lambda_parts(model, window, x, None, config)
    model._cache[key] = parts
    return parts


def pop_Lambda(model: PopulationModel, window: EvaluationWindow, x: float,
               y: float, config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Mark-specific cumulative hazard Lambda(x, y)."""
    cont, jumps = _lambda_parts(model, window, x, y, config)
    return cont + sum(j for _, j in jumps)


def pop_LambdaX(model: PopulationModel, window: EvaluationWindow, x: float,
                config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Marginal cumulative hazard Lambda_X(x)."""
    cont, jumps = _lambda_x_parts(model, window, x, config)
    return cont + sum(j for _, j in jumps)


def _lambda_x_atom_jumps(model, config):
    cached = model._cache.get(("LXatoms", config.key()))
    if cached is not None:
        return cached
    jumps = []
    for loc, dv in _v_atoms(model, None):
        denom = 1.0 - _h_minus(model, loc, config)
        jumps.append((loc, dv / denom))
    model._cache[("LXatoms", config.key())] = jumps
    return jumps


def _survival_before(model, s, config, inclusive=False) -> float:
    """Product limit over the X-hazard: atoms < s, or <= s when inclusive."""
    val = math.exp(-_lambda_x_cont_fast(model, s, config))
    for loc, jump in _lambda_x_atom_jumps(model, config):
        if loc < s or (inclusive and loc == s):
            val *= 1.0 - jump
    return val


# ---------------------------------------------------------------------------
# limits of the lower-bound estimator


def pop_FXlim(model: PopulationModel, window: EvaluationWindow, x: float,
              config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Marginal limit: 1 - prod_{s <= x} (1 - Lambda_X(ds)), exact route."""
    _check_window(window, x)
    if x < 0.0:
        return 0.0
    cont, jumps = _lambda_x_parts(model, window, x, config)
    surv = math.exp(-cont)
    for _, jump in jumps:
        surv *= 1.0 - jump
    return 1.0 - surv


def pop_Flim(model: PopulationModel, window: EvaluationWindow, x: float,
             y: float, config: QuadratureConfig = DEFAULT_QUADRATURE,
             route: str = "ratio") -> float:
    """Joint limit F_inf(x, y).

    route='ratio' integrates (V(ds, y) / V_X(ds)) dF_Xlim(s) with
    dF_Xlim(s) = survival(s-) Lambda_X(ds); route='product' integrates
    survival(s-) Lambda(ds, y) directly. The two agree analytically; the
    ratio route raises DivisionByZeroMeasure where the ratio is undefined.
    """
    _check_window(window, x)
    if route not in ("ratio", "product"):
        raise ValueError(f"unknown route {route!r}")
    total = 0.0
    if model.has_continuous_part():

        def integrand(s):
            v = _v_density(model, s, y, config)
            surv = _survival_before(model, s, config)
            one_minus_h = 1.0 - _h_fast(model, s, config)
            if route == "product":
                return surv * v / one_minus_h
            vx = _v_density(model, s, None, config)
            if vx <= 0.0:
                if abs(v) < 1e-13:
                    return 0.0
                raise DivisionByZeroMeasure(
                    f"V_X(ds) = 0 but V(ds, y) = {v} at s = {s}"
                )
            return (v / vx) * surv * vx / one_minus_h

        total = _quad(integrand, 0.0, min(x, model.support_hint[0]), config,
                      model.breakpoints())
    vx_atoms = dict(_v_atoms(model, None))
    for loc, dv in _v_atoms(model, y):
        if loc > x:
            continue
        surv = _survival_before(model, loc, config)
        denom = 1.0 - _h_minus(model, loc, config)
        if route == "ratio":
            dvx = vx_atoms.get(loc, 0.0)
            if dvx <= 0.0:
                if abs(dv) < 1e-13:
                    continue
                raise DivisionByZeroMeasure(
                    f"V_X jump is 0 but V(., y) jumps by {dv} at {loc}"
                )
            total += (dv / dvx) * surv * (dvx / denom)
        else:
            total += surv * dv / denom
    return total


def pop_Flim_current_status(model: PopulationModel, window: EvaluationWindow,
                            x: float, y: float,
                            config: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """k = 1 shortcut: integrate P(mark <= y | event by s) dF_Xlim(s)."""
    if model.k != 1:
        raise ValueError("current-status route requires k = 1")
    _check_window(window, x)

    def cond(s):
        fx = model.f0_marg_x(s)
        if fx <= 0.0:
            return 0.0  # the 0/0 region carries no F_Xlim mass
        return model.f0_joint(s, y) / fx

    total = 0.0
    if model.has_continuous_part():

        def integrand(s):
            surv = _survival_before(model, s, config)
            vx = _v_density(model, s, None, config)
            return cond(s) * surv * vx / (1.0 - _h_fast(model, s, config))

        total = _quad(integrand, 0.0, min(x, model.support_hint[0]), config,
                      model.breakpoints())
    for loc, dvx in _v_atoms(model, None):
        if loc > x:
            continue
        surv = _survival_before(model, loc, config)
        denom = 1.0 - _h_minus(model, loc, config)
        total += cond(loc) * surv * (dvx / denom)
    return total


# ---------------------------------------------------------------------------
# uniform order-statistic inspection times


def order_stat_uniform_model(k: int, theta: float, f0) -> PopulationModel:
    """Inspection times = k order statistics of Unif(0, theta).

    ``f0`` is a JointDistribution, or a bare callable taken as the marginal
    CDF of the event time (mark-free studies). The per-order-statistic
    marginals are Beta laws; their sums match the aggregated kernel forms.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    if callable(f0):
        f0 = JointDistribution(
            joint=lambda x, y, _f=f0: _f(x), marg_x=f0, marg_y=lambda y: 1.0
        )

    def marginal(j: int) -> Measure1D:
        c = k * comb(k - 1, j - 1)

        def dens(t, c=c, j=j):
            p = t / theta
            return c * p ** (j - 1) * (1.0 - p) ** (k - j) / theta

        return Measure1D(density=dens, lo=0.0, hi=theta)

    def pair(j: int) -> Measure2D:
        c = k * (k - 1) * comb(k - 2, j - 2)

        def dens(s, t, c=c, j=j):
            return c * (s / theta) ** (j - 2) * (1.0 - t / theta) ** (k - j) / theta**2

        return Measure2D(density=dens, s_lo=0.0, s_hi=theta, t_lo=0.0, t_hi=theta)

    return PopulationModel(
        f0_joint=f0.joint,
        f0_marg_x=f0.marg_x,
        f0_marg_y=f0.marg_y,
        g_marginals=tuple(marginal(j) for j in range(1, k + 1)),
        g_consecutive=tuple(pair(j) for j in range(2, k + 1)),
        support_hint=(theta, f"k uniform order statistics on [0, {theta}]"),
        f0_x_partial=f0.x_partial,
        direct_kernel=OrderStatKernel(k=k, theta=theta),
    )
