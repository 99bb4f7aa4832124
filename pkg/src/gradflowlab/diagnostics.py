"""Certificates along trajectories.

Energy-dissipation balance in R + R* form, per-step discrete
energy-dissipation inequalities, chain-rule residuals, the variational
sub-step identity and its discrete inequality, the quantitative Young
estimate, the modulus-of-continuity bound, and curve-of-maximal-slope
residuals.

Two integrand conventions coexist.  Scheme-produced trajectories carry
piecewise-constant dissipation integrands (the state dependence is frozen at
the left node and the force at the right node), so their integrals are nodal
sums and exact; externally sampled trajectories are integrated by composite
trapezoid along the affine interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from ._compat import trapezoid
from . import potentials as pot
from .energies import EnergyFunctional, eval_energy, metric_slope, power_of_energy
from .errors import MissingForces, OutOfRange, SlopeUnavailable, UnknownLambda
from .mms import (
    BanachDissipation,
    GradientSystem,
    MetricDissipation,
    Trajectory,
    interpolate,
    value_function_probe,
)
from .potentials import DissipationPotential, ScalarPotential

__all__ = [
    "EdbReport",
    "SpeedAndSlopeSeries",
    "edb_report",
    "discrete_edi_check",
    "chain_rule_residual",
    "quantitative_young_check",
    "modulus_bound",
    "speed_and_slope_series",
    "cms_residual",
    "de_giorgi_identity_residual",
    "discrete_de_giorgi_edi",
    "summed_increment_check",
    "equicontinuity_check",
    "slope_estimate_check",
]


@dataclass
class EdbReport:
    interval: tuple[float, float]
    energy_drop: float
    rate_integral: float
    slope_integral: float
    work_integral: float
    residual: float
    quadrature_nodes: int
    rule: str


def _scalar_psi_of(sys: GradientSystem) -> ScalarPotential:
    d = sys.dissipation
    if isinstance(d, MetricDissipation):
        return d.psi
    R = d.R
    if R.form == "norm_composed":
        return R.psi
    if R.form == "onsager_quadratic":
        return pot.quadratic()
    raise SlopeUnavailable("separable dissipation has no single scalar potential")


def _step_range(traj: Trajectory, s: float, t: float) -> tuple[int, int]:
    lo, hi = traj.span
    if s < lo - 1e-12 or t > hi + 1e-12 or s >= t:
        raise OutOfRange(f"[{s}, {t}] not inside trajectory span [{lo}, {hi}]")
    return (int(np.searchsorted(traj.times, s, side="left")),
            int(np.searchsorted(traj.times, t, side="right") - 1))


def _node_force(sys: GradientSystem, traj: Trajectory, k: int) -> np.ndarray:
    xi = traj.force_at_node(k)
    if xi is None:
        xi = sys.energy.force(float(traj.times[k]), traj.states[k])
    if xi is None:
        raise MissingForces(f"no force available at node {k} (t={traj.times[k]:g})")
    return np.asarray(xi, dtype=float)


def _work_integral(sys: GradientSystem, traj: Trajectory, s: float, t: float,
                   n_nodes: int) -> float:
    if sys.energy.power is None:
        return 0.0
    ts = np.linspace(s, t, max(n_nodes, 3))
    vals = [power_of_energy(sys.energy, float(r), interpolate(traj, "affine", float(r)))
            for r in ts]
    return float(trapezoid(vals, ts))


def edb_report(sys: GradientSystem, traj: Trajectory, s: float, t: float,
               quad_nodes: int) -> EdbReport:
    """Energy-dissipation balance report on [s, t] in R + R* form.

    residual = F(s, u(s)) - F(t, u(t)) + work - rate_integral - slope_integral.
    For scheme trajectories the rate/slope integrands are piecewise constant
    (semi-implicit convention), so the nodal sums are their exact integrals.
    """
    F = sys.energy
    d = sys.dissipation
    if isinstance(d, MetricDissipation) and d.weight is None:
        raise SlopeUnavailable(
            "R + R* balance needs a linear dissipation; use cms_residual for "
            "purely metric systems")
    us, ut = interpolate(traj, "affine", s), interpolate(traj, "affine", t)
    energy_drop = eval_energy(F, s, us) - eval_energy(F, t, ut)
    work = _work_integral(sys, traj, s, t, quad_nodes)

    produced = len(traj.step_records) == len(traj.times) - 1
    rate = slope = 0.0
    n_used = 0
    if produced:
        for k in range(1, len(traj.times)):
            a, b = float(traj.times[k - 1]), float(traj.times[k])
            overlap = min(b, t) - max(a, s)
            if overlap <= 0.0:
                continue
            tau = b - a
            u_prev = traj.states[k - 1]
            v = (traj.states[k] - u_prev) / tau
            if isinstance(d, BanachDissipation):
                rate += overlap * pot.eval_dissipation(d.R, u_prev, v)
                xi = _node_force(sys, traj, k)
                slope += overlap * pot.eval_dual_dissipation(d.R, u_prev, -xi)
            else:
                r = sys.dist(u_prev, traj.states[k]) / tau
                rate += overlap * d.psi(r)
                xi = _node_force(sys, traj, k)
                geo = sys.geometry_at(u_prev)
                slope += overlap * d.psi.conjugate(geo.dual_norm(xi))
            n_used += 2
        rule = "nodal (piecewise-constant integrands)"
    else:
        ts = np.linspace(s, t, max(quad_nodes, len(traj.times)))
        vals = np.empty(len(ts))
        for j, r in enumerate(ts):
            u = interpolate(traj, "affine", float(r))
            # piecewise slope of the affine interpolant at r
            k = min(int(np.searchsorted(traj.times, r, side="right")), len(traj.times) - 1)
            k = max(k, 1)
            tau = float(traj.times[k] - traj.times[k - 1])
            v = (traj.states[k] - traj.states[k - 1]) / tau
            xi = F.force(float(r), u)
            if xi is None:
                raise MissingForces(f"no force along sampled trajectory at t={r:g}")
            if isinstance(d, BanachDissipation):
                vals[j] = (pot.eval_dissipation(d.R, u, v)
                           + pot.eval_dual_dissipation(d.R, u, -np.asarray(xi)))
            else:
                geo = sys.geometry_at(u)
                vals[j] = d.psi(geo.norm(v)) + d.psi.conjugate(geo.dual_norm(np.asarray(xi)))
        both = float(trapezoid(vals, ts))
        # split not meaningful for the sampled convention; report halves
        rate = slope = 0.5 * both
        n_used = len(ts)
        rule = "trapezoid (affine interpolant)"
    residual = energy_drop + work - rate - slope
    return EdbReport(interval=(s, t), energy_drop=float(energy_drop),
                     rate_integral=float(rate), slope_integral=float(slope),
                     work_integral=float(work), residual=float(residual),
                     quadrature_nodes=n_used, rule=rule)


def discrete_edi_check(sys: GradientSystem, traj: Trajectory) -> np.ndarray:
    """Per-step residuals of the discrete energy-dissipation inequality.

    residual_k = F(u_{k-1}) - F(u_k) - lam/2 ||u_k - u_{k-1}||^2
                 - tau [R(u_{k-1}, v_k) + R*(u_{k-1}, -xi_k)]  >= -tol.
    """
    lam = sys.energy.lam
    if not math.isfinite(lam):
        raise UnknownLambda("discrete EDI needs a declared convexity modulus")
    d = sys.dissipation
    out = np.empty(len(traj.times) - 1)
    for k in range(1, len(traj.times)):
        t_k = float(traj.times[k])
        tau = t_k - float(traj.times[k - 1])
        u_prev, u_k = traj.states[k - 1], traj.states[k]
        geo = sys.geometry_at(u_prev)
        xi = _node_force(sys, traj, k)
        if isinstance(d, BanachDissipation):
            diss = (pot.eval_dissipation(d.R, u_prev, (u_k - u_prev) / tau)
                    + pot.eval_dual_dissipation(d.R, u_prev, -xi))
        else:
            diss = (d.psi(sys.dist(u_prev, u_k) / tau)
                    + d.psi.conjugate(geo.dual_norm(xi)))
        dn = geo.norm(u_k - u_prev)
        out[k - 1] = (eval_energy(sys.energy, t_k, u_prev)
                      - eval_energy(sys.energy, t_k, u_k)
                      - 0.5 * lam * dn * dn - tau * diss)
    return out


def chain_rule_residual(sys: GradientSystem, traj: Trajectory, t: float,
                        h: float = 1e-4) -> float:
    """|d/dt F(t, u(t)) - <xi, u_dot> - dF/dt_explicit| by symmetric stencil."""
    lo, hi = traj.span
    if not (lo + h <= t <= hi - h):
        raise OutOfRange("stencil leaves the trajectory span")
    F = sys.energy

    def val(r: float) -> float:
        return eval_energy(F, r, interpolate(traj, "affine", r))

    dF = (val(t + h) - val(t - h)) / (2.0 * h)
    # symmetric velocity quotient, matching the stencil of the energy rate
    v = (interpolate(traj, "affine", t + h) - interpolate(traj, "affine", t - h)) / (2.0 * h)
    k = int(np.searchsorted(traj.times, t, side="right"))
    k = min(max(k, 1), len(traj.times) - 1)
    xi = traj.force_at_node(k)
    if xi is None:
        xi = F.force(t, interpolate(traj, "affine", t))
    if xi is None:
        raise MissingForces(f"no force at t={t:g}")
    pw = power_of_energy(F, t, interpolate(traj, "affine", t))
    return float(abs(dF - float(np.dot(xi, v)) - pw))


def quantitative_young_check(R: DissipationPotential, u: np.ndarray, v: np.ndarray,
                             xi: np.ndarray, c_Y: float, C_Y: float) -> bool:
    """R(u, v) + R*(u, xi) >= c_Y ||v|| ||xi|| - C_Y in the weighted norms."""
    lhs = pot.eval_dissipation(R, u, v) + pot.eval_dual_dissipation(R, u, xi)
    if R.form == "norm_composed":
        nv, nxi = R.weighted_norm(np.asarray(v, float)), R.dual_weighted_norm(np.asarray(xi, float))
    else:
        nv, nxi = float(np.linalg.norm(v)), float(np.linalg.norm(xi))
    return bool(lhs >= c_Y * nv * nxi - C_Y - 1e-12 * (1.0 + abs(lhs)))


def modulus_bound(psi: ScalarPotential, B: float, r: float,
                  mu_grid: Optional[np.ndarray] = None) -> float:
    """omega_psi^B(r) = inf_mu (r psi*(mu) + B)/mu on a log grid with refinement."""
    if B < 0.0 or r < 0.0:
        raise ValueError("need B >= 0 and r >= 0")
    mus = mu_grid if mu_grid is not None else np.logspace(-8.0, 8.0, 321)

    def h(mu: float) -> float:
        ps = psi.conjugate(mu)
        return math.inf if not math.isfinite(ps) and r > 0.0 else (r * ps + B) / mu

    vals = np.array([h(m) for m in mus])
    j = int(np.argmin(vals))
    lo, hi = mus[max(j - 1, 0)], mus[min(j + 1, len(mus) - 1)]
    best = vals[j]
    if hi > lo:
        x, fneg = pot._golden_max(lambda m: -h(m), lo, hi)
        best = min(best, -fneg)
    return float(best)


@dataclass
class SpeedAndSlopeSeries:
    times: np.ndarray
    speed: np.ndarray
    slope: np.ndarray
    approximate_slope: bool


def speed_and_slope_series(sys: GradientSystem, traj: Trajectory,
                           slope_mode: str = "auto",
                           probe_radius: float = 1e-3) -> SpeedAndSlopeSeries:
    """Metric speed by symmetric difference quotients and slope per node.

    ``slope_mode='estimate'`` replaces the slope by the scheme bound
    psi'(D(u_{k-1}, u_k)/tau_k), the substitution used when no usable slope
    formula exists for the metric (recorded as approximate).
    """
    times, states = traj.times, traj.states
    n = len(times)
    speed = np.empty(n)
    for k in range(n):
        if 0 < k < n - 1:
            speed[k] = sys.dist(states[k - 1], states[k + 1]) / float(times[k + 1] - times[k - 1])
        elif k == 0:
            speed[k] = sys.dist(states[0], states[1]) / float(times[1] - times[0])
        else:
            speed[k] = sys.dist(states[-2], states[-1]) / float(times[-1] - times[-2])
    slope = np.empty(n)
    approx = False
    if slope_mode == "estimate":
        psi = _scalar_psi_of(sys)
        approx = True
        for k in range(n):
            j = max(k, 1)
            tau = float(times[j] - times[j - 1])
            slope[k] = psi.prime(sys.dist(states[j - 1], states[j]) / tau)
    else:
        for k in range(n):
            geo = sys.geometry_at(states[k])
            slope[k] = metric_slope(sys.energy, float(times[k]), states[k],
                                    probe_radius=probe_radius, geometry=geo)
            approx = approx or (sys.energy.slope is None
                                and sys.energy.differential(float(times[k]), states[k]) is None)
    return SpeedAndSlopeSeries(times=times.copy(), speed=speed, slope=slope,
                               approximate_slope=approx)


def cms_residual(sys: GradientSystem, traj: Trajectory, s: float, t: float,
                 slope_mode: str = "auto") -> float:
    """Curve-of-maximal-slope residual on [s, t]:

    F(t, u(t)) + int [psi(speed) + psi*(slope)] dr - F(s, u(s)) - work.
    """
    psi = _scalar_psi_of(sys)
    series = speed_and_slope_series(sys, traj, slope_mode=slope_mode)
    k0, k1 = _step_range(traj, s, t)
    ts = traj.times[k0:k1 + 1]
    vals = np.array([psi(series.speed[k]) + psi.conjugate(series.slope[k])
                     for k in range(k0, k1 + 1)])
    integral = float(trapezoid(vals, ts))
    F = sys.energy
    drop = (eval_energy(F, float(ts[0]), traj.states[k0])
            - eval_energy(F, float(ts[-1]), traj.states[k1]))
    work = _work_integral(sys, traj, float(ts[0]), float(ts[-1]), 4 * (k1 - k0 + 1))
    return float(integral - drop - work)


def de_giorgi_identity_residual(sys: GradientSystem, u_base: np.ndarray, tau: float,
                                r_nodes: Optional[np.ndarray] = None,
                                t_base: float = 0.0, seed: int = 0,
                                details: bool = False):
    """Signed residual of the sub-step value-function identity.

    phi(tau, u*) + int_0^tau psi*(psi'(d+(r, u*)/r)) dr  - F(u*).

    The r-grid defaults to a geometric ladder from tau * 2^-20 up to tau: the
    integrand can only blow up as r -> 0 where d+ -> 0 tames it.  The head
    piece [0, r_min] is added as a rectangle and charged to the error bar.
    """
    psi = _scalar_psi_of(sys)
    if not psi.strictly_convex:
        raise ValueError("identity requires a strictly convex C1 potential")
    if r_nodes is None:
        r_nodes = np.geomspace(tau * 2.0 ** -20, tau, 64)
    r_nodes = np.asarray(r_nodes, dtype=float)
    if abs(r_nodes[-1] - tau) > 1e-12 * tau:
        r_nodes = np.append(r_nodes, tau)
    probe = value_function_probe(sys, u_base, r_nodes, t_base=t_base, seed=seed)
    if len(probe.radii) != len(r_nodes):
        raise SlopeUnavailable(f"value-function probe failed at radii {probe.failures!r}")
    g = np.array([psi.conjugate(psi.prime(dp / r)) for dp, r in zip(probe.d_plus, probe.radii)])
    integral = float(simpson(g, x=probe.radii))
    trap = float(trapezoid(g, probe.radii))
    head = float(probe.radii[0] * g[0])
    integral += head
    F_base = eval_energy(sys.energy, t_base, np.asarray(u_base, dtype=float))
    residual = float(probe.phi[-1] + integral - F_base)
    if details:
        return residual, {"phi_tau": float(probe.phi[-1]), "integral": integral,
                          "quad_error_estimate": abs(integral - head - trap) + head,
                          "probe": probe}
    return residual


def discrete_de_giorgi_edi(sys: GradientSystem, u_base: np.ndarray, tau: float,
                           r_nodes: Optional[np.ndarray] = None,
                           t_base: float = 0.0, seed: int = 0,
                           details: bool = False):
    """Residual of the discrete sub-step inequality (>= -tol expected):

    F(u*) - tau psi(D(u*, u~(tau))/tau) - int_0^tau psi*(slope(u~(r))) dr.

    The slope uses the energy's registered/smooth form when available and the
    scheme estimate psi'(D(u*, u~(r))/r) otherwise.  ``tight_residual`` in the
    details adds F(u~(tau)), turning the inequality into the identity when the
    slope estimate is an equality.
    """
    psi = _scalar_psi_of(sys)
    if r_nodes is None:
        r_nodes = np.geomspace(tau * 2.0 ** -20, tau, 64)
    r_nodes = np.asarray(r_nodes, dtype=float)
    if abs(r_nodes[-1] - tau) > 1e-12 * tau:
        r_nodes = np.append(r_nodes, tau)
    rng = np.random.default_rng(seed)
    from .mms import mms_step  # local import to avoid cycle confusion

    g = np.empty(len(r_nodes))
    u_tau = None
    incr_tau = 0.0
    for j, r in enumerate(r_nodes):
        u_r, _, rec = mms_step(sys, np.asarray(u_base, float), t_base, float(r), rng=rng)
        has_slope = (sys.energy.slope is not None
                     or sys.energy.differential(t_base, u_r) is not None)
        if has_slope:
            geo = sys.geometry_at(u_r)
            sl = metric_slope(sys.energy, t_base, u_r, probe_radius=1e-3, geometry=geo)
        else:
            sl = psi.prime(rec.increment_norm / float(r))
        g[j] = psi.conjugate(sl)
        if j == len(r_nodes) - 1:
            u_tau = u_r
            incr_tau = rec.increment_norm
    integral = float(simpson(g, x=r_nodes)) + float(r_nodes[0] * g[0])
    F_base = eval_energy(sys.energy, t_base, np.asarray(u_base, float))
    diss = tau * psi(incr_tau / tau)
    residual = float(F_base - diss - integral)
    if details:
        tight = residual - eval_energy(sys.energy, t_base, u_tau)
        return residual, {"tight_residual": float(tight), "u_tau": u_tau,
                          "integral": integral}
    return residual


def summed_increment_check(sys: GradientSystem, traj: Trajectory) -> tuple[float, float]:
    """(sum of tau psi(D_k/tau), energy drop): the sum must not exceed the drop."""
    psi = _scalar_psi_of(sys)
    total = 0.0
    for k in range(1, len(traj.times)):
        tau = float(traj.times[k] - traj.times[k - 1])
        total += tau * psi(sys.dist(traj.states[k - 1], traj.states[k]) / tau)
    drop = (eval_energy(sys.energy, float(traj.times[0]), traj.states[0])
            - eval_energy(sys.energy, float(traj.times[-1]), traj.states[-1]))
    return float(total), float(drop)


def _chain_distance(sys: GradientSystem, traj: Trajectory, s: float, t: float) -> float:
    """Upper bound on D(u(s), u(t)) along the interpolated path (triangle chain)."""
    total = 0.0
    for k in range(1, len(traj.times)):
        a, b = float(traj.times[k - 1]), float(traj.times[k])
        overlap = min(b, t) - max(a, s)
        if overlap <= 0.0:
            continue
        frac = overlap / (b - a)
        total += frac * sys.dist(traj.states[k - 1], traj.states[k])
    return total


def equicontinuity_check(sys: GradientSystem, traj: Trajectory,
                         pairs: Sequence[tuple[float, float]],
                         tol: float = 1e-9) -> float:
    """Worst violation of D(u(s), u(t)) <= omega_psi^B(|t - s|) over the pairs.

    B is the summed increment bound of the trajectory itself.  Nonpositive
    return means the modulus bound holds everywhere.
    """
    psi = _scalar_psi_of(sys)
    B, _ = summed_increment_check(sys, traj)
    worst = -math.inf
    for s, t in pairs:
        if s > t:
            s, t = t, s
        if s == t:
            continue
        d = _chain_distance(sys, traj, s, t)
        omega = modulus_bound(psi, B, t - s)
        worst = max(worst, d - omega - tol * (1.0 + omega))
    return float(worst)


def slope_estimate_check(sys: GradientSystem, traj: Trajectory,
                         candidates: Optional[Sequence[np.ndarray]] = None,
                         probe_radius: float = 1e-3) -> np.ndarray:
    """Per-step margins psi'(D_k/tau_k) - slope(u_k)  (>= -tol expected).

    When the energy has no usable slope at a node, the slope is replaced by a
    candidate-probe lower bound sup_w [F(u_k) - F(w)]_+ / D(u_k, w), which
    still makes the inequality falsifiable.
    """
    psi = _scalar_psi_of(sys)
    F = sys.energy
    out = np.empty(len(traj.times) - 1)
    for k in range(1, len(traj.times)):
        tau = float(traj.times[k] - traj.times[k - 1])
        u_k = traj.states[k]
        t_k = float(traj.times[k])
        bound = psi.prime(sys.dist(traj.states[k - 1], u_k) / tau)
        if F.slope is not None or F.differential(t_k, u_k) is not None:
            # the step freezes a state-dependent metric at the pre-step
            # state, so the estimate controls the slope in that geometry
            geo = sys.geometry_at(traj.states[k - 1])
            sl = metric_slope(F, t_k, u_k, probe_radius=probe_radius, geometry=geo)
        elif candidates is not None:
            Fu = eval_energy(F, t_k, u_k)
            sl = 0.0
            for w in candidates:
                d = sys.dist(u_k, np.asarray(w, float))
                if d > 0.0:
                    Fw = eval_energy(F, t_k, np.asarray(w, float))
                    if math.isfinite(Fw):
                        sl = max(sl, max(Fu - Fw, 0.0) / d)
        else:
            raise SlopeUnavailable(f"no slope available at node {k}")
        out[k - 1] = bound - sl
    return out
