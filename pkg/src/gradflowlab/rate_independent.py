"""Energetic rate-independent systems.

States evolve by the incremental scheme

    u_k  minimizes  u |-> D(u_{k-1}, u) + F(t_k, u)

over a time partition; no time step appears in the objective, which is the
signature of rate independence.  ``D`` is an extended quasi-distance (possibly
asymmetric, possibly +inf) evaluated in the order D(u_old, u_new).  Solutions
are certified against global stability (S), the energy balance (E) with the
variation dissipation Var_D, the chain-rule lower estimate, and the a-priori
exponential bound driven by the power-control constants (C_E, c_E).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .energies import EnergyFunctional, eval_energy, power_of_energy
from .errors import InnerSolveFailed, OutOfRange, OutsideDomain

__all__ = [
    "QuasiDistance",
    "Eris",
    "ErisTrajectory",
    "tims_step",
    "run_tims",
    "var_dissipation",
    "stability_check",
    "quasi_global_slope",
    "energetic_solution_residuals",
    "rate_independence_check",
    "chain_rule_lower_estimate",
    "apriori_bound_margins",
    "per_step_descent_margins",
]


@dataclass(frozen=True)
class QuasiDistance:
    """Extended quasi-distance D(u_old, u_new) with a comparison metric.

    ``eval`` may return +inf (forbidden transitions).  ``comparison_metric``
    is a true metric D_0 <= D used for limits and jump bookkeeping.
    """

    eval: Callable[[np.ndarray, np.ndarray], float]
    symmetric: bool
    comparison_metric: Callable[[np.ndarray, np.ndarray], float]

    def __call__(self, u_old: np.ndarray, u_new: np.ndarray) -> float:
        return float(self.eval(np.asarray(u_old, float), np.asarray(u_new, float)))

    def check_axioms(self, samples: Sequence[np.ndarray], tol: float = 1e-9) -> None:
        pts = [np.asarray(p, float) for p in samples]
        for p in pts:
            if abs(self(p, p)) > tol:
                raise ValueError("quasi-distance violates D(u, u) = 0")
        for a in pts:
            for b in pts:
                dab = self(a, b)
                if dab < -tol:
                    raise ValueError("quasi-distance must be nonnegative")
                if self.comparison_metric(a, b) > dab + tol * (1.0 + abs(dab)):
                    raise ValueError("comparison metric must satisfy D_0 <= D")
                for c in pts:
                    dac, dbc = self(a, c), self(b, c)
                    if math.isfinite(dab) and math.isfinite(dbc):
                        if dac > dab + dbc + tol * (1.0 + dab + dbc):
                            raise ValueError("quasi-distance violates the triangle inequality")


@dataclass
class Eris:
    """Energetic rate-independent system with power-control constants."""

    dim: int
    energy: EnergyFunctional
    dist: QuasiDistance
    C_E: float
    c_E: float
    # closed-form incremental minimizer, when the model admits one
    exact_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    # closed-form stable set as membership bounds (1d: t -> (lo, hi))
    stable_set: Optional[Callable[[float], tuple[float, float]]] = None
    name: str = "eris"

    def check_power_bound(self, ts: Sequence[float], us: Sequence[np.ndarray],
                          tol: float = 1e-9) -> None:
        """|dF/dt(t, u)| <= C_E (F(t, u) + c_E) on the given samples."""
        for t in ts:
            for u in us:
                f = eval_energy(self.energy, float(t), np.asarray(u, float))
                if not math.isfinite(f):
                    continue
                p = power_of_energy(self.energy, float(t), np.asarray(u, float))
                if abs(p) > self.C_E * (f + self.c_E) + tol * (1.0 + abs(p)):
                    raise ValueError(
                        f"power bound violated at t={t}, u={u!r}: |{p}| > "
                        f"{self.C_E} * ({f} + {self.c_E})")


@dataclass
class ErisTrajectory:
    times: np.ndarray
    states: np.ndarray
    stability_residuals: np.ndarray
    var_cumulative: np.ndarray           # sum_{j<=k} D(u_{j-1}, u_j)
    jumps: list = field(default_factory=list)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def state_at(self, t: float) -> np.ndarray:
        """Right-continuous piecewise-constant interpolant value."""
        lo, hi = self.span
        if t < lo - 1e-12 or t > hi + 1e-12:
            raise OutOfRange(f"t={t} outside [{lo}, {hi}]")
        k = int(np.searchsorted(self.times, min(max(t, lo), hi), side="right") - 1)
        return self.states[min(k, len(self.times) - 1)].copy()


def _incremental_objective(sys: Eris, u_prev: np.ndarray, t_k: float):
    def obj(u: np.ndarray) -> float:
        return sys.dist(u_prev, u) + eval_energy(sys.energy, t_k, u)
    return obj


def tims_step(sys: Eris, u_prev: np.ndarray, t_k: float,
              grid_radius: float = 10.0, n_grid: int = 2001) -> np.ndarray:
    """Minimize D(u_prev, .) + F(t_k, .); exact model solver when registered.

    The generic fallback is a dense scan around u_prev with local refinement
    (1d only); it is probe-based, like every global minimization here.
    """
    u_prev = np.asarray(u_prev, dtype=float)
    if sys.exact_step is not None:
        return np.asarray(sys.exact_step(t_k, u_prev), dtype=float)
    if sys.dim != 1:
        raise InnerSolveFailed(
            f"system {sys.name!r}: generic incremental solver only covers 1d; "
            "register an exact_step")
    obj = _incremental_objective(sys, u_prev, t_k)
    span = grid_radius * (1.0 + abs(float(u_prev[0])))
    grid = np.linspace(float(u_prev[0]) - span, float(u_prev[0]) + span, n_grid)
    vals = np.array([obj(np.array([g])) for g in grid])
    if not np.any(np.isfinite(vals)):
        raise InnerSolveFailed("incremental objective infinite on the whole scan")
    j = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, n_grid - 1)]
    res = minimize_scalar(lambda x: obj(np.array([x])), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    best = np.array([res.x]) if res.fun <= vals[j] else np.array([grid[j]])
    # the kink at u_prev is always a candidate
    if obj(u_prev) <= obj(best):
        best = u_prev.copy()
    return best


def run_tims(sys: Eris, u0: np.ndarray, partition: Sequence[float],
             stability_candidates: Optional[Sequence[np.ndarray]] = None,
             warn_unstable_start: bool = True,
             jump_factor: float = 10.0) -> ErisTrajectory:
    """Incremental minimization over the partition with per-node certificates."""
    times = np.asarray(partition, dtype=float)
    if len(times) < 2 or np.any(np.diff(times) <= 0.0):
        raise ValueError("partition must be strictly increasing")
    u0 = np.asarray(u0, dtype=float)
    s0 = stability_check(sys, float(times[0]), u0, stability_candidates or [])
    if warn_unstable_start and s0 < -1e-9:
        import warnings
        warnings.warn(f"initial state unstable at t0 (residual {s0:.3g}); the "
                      "incremental scheme expects u0 in the stable set")
    states = [u0]
    stabs = [s0]
    var = [0.0]
    for k in range(1, len(times)):
        u_k = tims_step(sys, states[-1], float(times[k]))
        var.append(var[-1] + sys.dist(states[-1], u_k))
        stabs.append(stability_check(sys, float(times[k]), u_k, stability_candidates or []))
        states.append(u_k)
    incs = np.array([sys.dist.comparison_metric(states[k - 1], states[k])
                     for k in range(1, len(states))])
    jumps = []
    if len(incs) > 2:
        med = float(np.median(incs))
        for k, d in enumerate(incs, start=1):
            if d > jump_factor * max(med, 1e-14):
                jumps.append((float(times[k]), states[k - 1].copy(), states[k].copy(),
                              states[k].copy()))
    return ErisTrajectory(times=times, states=np.asarray(states),
                          stability_residuals=np.asarray(stabs),
                          var_cumulative=np.asarray(var), jumps=jumps)


def var_dissipation(sys: Eris, traj: ErisTrajectory, s: float, t: float,
                    refine_check: bool = True, tol: float = 1e-8) -> float:
    """Var_D(u, [s, t]) over the trajectory nodes (exact for node curves).

    For curves sampled from a continuous evolution a refinement-stability
    check is run: doubling the partition (by right-continuous interpolation)
    must not change the value beyond tol.
    """
    lo, hi = traj.span
    if s < lo - 1e-12 or t > hi + 1e-12 or s > t:
        raise OutOfRange(f"[{s}, {t}] outside span")

    def partition_sum(ts: np.ndarray) -> float:
        total = 0.0
        prev = traj.state_at(float(ts[0]))
        for r in ts[1:]:
            cur = traj.state_at(float(r))
            total += sys.dist(prev, cur)
            prev = cur
        return total

    nodes = [s] + [float(r) for r in traj.times if s < r < t] + [t]
    base = partition_sum(np.asarray(nodes))
    if refine_check:
        doubled = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            doubled += [a, 0.5 * (a + b)]
        doubled.append(nodes[-1])
        d = partition_sum(np.asarray(doubled))
        if abs(d - base) > tol * (1.0 + abs(base)):
            base = max(base, d)
    return float(base)


def stability_check(sys: Eris, t: float, u: np.ndarray,
                    candidates: Sequence[np.ndarray],
                    grid_radius: float = 10.0, n_grid: int = 2001) -> float:
    """min_w [F(t, w) + D(u, w) - F(t, u)] over candidates + a default grid.

    Nonnegative (up to tolerance) means u passes the probe-based global
    stability test at this resolution.
    """
    u = np.asarray(u, dtype=float)
    Fu = eval_energy(sys.energy, t, u)
    if not math.isfinite(Fu):
        raise OutsideDomain("stability requested outside dom F")

    def excess(w: np.ndarray) -> float:
        return eval_energy(sys.energy, t, w) + sys.dist(u, w) - Fu

    best = 0.0  # w = u is always admissible
    cands = [np.asarray(w, float) for w in candidates]
    if sys.dim == 1:
        span = grid_radius * (1.0 + abs(float(u[0])))
        grid = np.linspace(float(u[0]) - span, float(u[0]) + span, n_grid)
        vals = np.array([excess(np.array([g])) for g in grid])
        j = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
        lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, n_grid - 1)]
        res = minimize_scalar(lambda x: excess(np.array([x])), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        best = min(best, float(res.fun), float(vals[j]))
    for w in cands:
        val = excess(w)
        if math.isfinite(val):
            best = min(best, float(val))
    return float(best)


def quasi_global_slope(sys: Eris, t: float, u: np.ndarray,
                       candidates: Sequence[np.ndarray],
                       grid_radius: float = 10.0, n_grid: int = 2001) -> float:
    """sup_w [F(t, u) - F(t, w)]_+ / D(u, w) over probes (order D(u, w)).

    Stability of u is equivalent to this global slope being <= 1.
    """
    u = np.asarray(u, dtype=float)
    Fu = eval_energy(sys.energy, t, u)
    if not math.isfinite(Fu):
        raise OutsideDomain("slope requested outside dom F")
    ws = [np.asarray(w, float) for w in candidates]
    if sys.dim == 1:
        span = grid_radius * (1.0 + abs(float(u[0])))
        radii = np.geomspace(1e-7 * (1.0 + abs(float(u[0]))), span, n_grid // 2)
        ws += [np.array([float(u[0]) + s * r]) for r in radii for s in (-1.0, 1.0)]
    # within rounding distance of u the energy difference is pure noise
    floor = 1e-9 * (1.0 + float(np.linalg.norm(u)))
    best = 0.0
    for w in ws:
        d = sys.dist(u, w)
        if d <= floor or not math.isfinite(d):
            continue
        Fw = eval_energy(sys.energy, t, w)
        if math.isfinite(Fw):
            best = max(best, max(Fu - Fw, 0.0) / d)
    return float(best)


def _work_integral_nodes(sys: Eris, traj: ErisTrajectory, s: float, t: float) -> float:
    """int ds dF/ds(s, u(s)) by trapezoid on the nodes within [s, t]."""
    ts = [s] + [float(r) for r in traj.times if s < r < t] + [t]
    total = 0.0
    for a, b in zip(ts[:-1], ts[1:]):
        pa = power_of_energy(sys.energy, a, traj.state_at(a))
        pb = power_of_energy(sys.energy, b, traj.state_at(b))
        total += 0.5 * (b - a) * (pa + pb)
    return total


def energetic_solution_residuals(sys: Eris, traj: ErisTrajectory,
                                 power_quadrature: int = 0,
                                 candidates: Optional[Sequence[np.ndarray]] = None
                                 ) -> tuple[float, float]:
    """(worst stability residual, energy-balance residual) over the span.

    (E) residual = F(T, u(T)) + Var_D(u, [0, T]) - F(0, u(0)) - work.
    """
    s, t = traj.span
    worst_s = float(np.min(traj.stability_residuals)) if candidates is None else min(
        float(np.min(traj.stability_residuals)),
        min(stability_check(sys, float(tk), traj.states[k], candidates)
            for k, tk in enumerate(traj.times)))
    var = var_dissipation(sys, traj, s, t, refine_check=False)
    work = _work_integral_nodes(sys, traj, s, t)
    FT = eval_energy(sys.energy, t, traj.states[-1])
    F0 = eval_energy(sys.energy, s, traj.states[0])
    return worst_s, float(FT + var - F0 - work)


def rate_independence_check(sys: Eris, u0: np.ndarray, partition: Sequence[float],
                            time_rescale: Callable[[float], float],
                            rescale_inverse: Optional[Callable[[float], float]] = None
                            ) -> float:
    """Max node discrepancy between the run and its time-rescaled twin.

    The rescaled system F~(s, u) = F(phi(s), u) is solved on the pulled-back
    partition phi^{-1}(t_k); node states must agree because the incremental
    problems coincide.
    """
    times = np.asarray(partition, dtype=float)
    phi = time_rescale
    if rescale_inverse is not None:
        s_nodes = np.array([rescale_inverse(t) for t in times])
    else:
        from scipy.optimize import brentq
        lo, hi = float(times[0]) - 1.0, float(times[-1]) + 1.0
        s_nodes = np.array([brentq(lambda s, tt=t: phi(s) - tt, lo, hi + abs(hi))
                            for t in times])
    if np.any(np.diff(s_nodes) <= 0.0):
        raise ValueError("time rescaling must be strictly increasing")

    base = run_tims(sys, u0, times, warn_unstable_start=False)

    F = sys.energy
    resc_energy = EnergyFunctional(
        dim=F.dim,
        eval_fn=lambda s, u: F.eval_fn(phi(s), u),
        differential=lambda s, u: F.differential(phi(s), u),
        power=None,
        lam=F.lam,
        domain_indicator=F.domain_indicator,
        name=F.name + "_rescaled")
    resc_exact = None
    if sys.exact_step is not None:
        resc_exact = lambda s, u_prev: sys.exact_step(phi(s), u_prev)
    resc = Eris(dim=sys.dim, energy=resc_energy, dist=sys.dist, C_E=sys.C_E,
                c_E=sys.c_E, exact_step=resc_exact, name=sys.name + "_rescaled")
    twin = run_tims(resc, u0, s_nodes, warn_unstable_start=False)
    return float(np.max(np.linalg.norm(base.states - twin.states, axis=1)))


def chain_rule_lower_estimate(sys: Eris, traj: ErisTrajectory, r: float, s: float) -> float:
    """LHS - RHS of the chain-rule lower bound (>= -tol expected):

    F(s, u(s)) + Var_D(u, [r, s]) - F(r, u(r)) - int_r^s dF/dt(t, u(t)) dt.
    """
    if r >= s:
        raise ValueError("need r < s")
    var = var_dissipation(sys, traj, r, s, refine_check=False)
    work = _work_integral_nodes(sys, traj, r, s)
    return float(eval_energy(sys.energy, s, traj.state_at(s)) + var
                 - eval_energy(sys.energy, r, traj.state_at(r)) - work)


def per_step_descent_margins(sys: Eris, traj: ErisTrajectory) -> np.ndarray:
    """Margins of the per-step descent F(t_k,u_k) + D <= F(t_k,u_{k-1})."""
    out = np.empty(len(traj.times) - 1)
    for k in range(1, len(traj.times)):
        t_k = float(traj.times[k])
        lhs = (eval_energy(sys.energy, t_k, traj.states[k])
               + sys.dist(traj.states[k - 1], traj.states[k]))
        out[k - 1] = eval_energy(sys.energy, t_k, traj.states[k - 1]) - lhs
    return out


def apriori_bound_margins(sys: Eris, traj: ErisTrajectory) -> np.ndarray:
    """Margins of F(t_k, u_k) + sum_j D_j <= e^{C_E t_k}(F(0,u_0) + c_E) - c_E."""
    F0 = eval_energy(sys.energy, float(traj.times[0]), traj.states[0])
    out = np.empty(len(traj.times))
    for k, t_k in enumerate(traj.times):
        lhs = eval_energy(sys.energy, float(t_k), traj.states[k]) + traj.var_cumulative[k]
        rhs = math.exp(sys.C_E * (float(t_k) - float(traj.times[0]))) * (F0 + sys.c_E) - sys.c_E
        out[k] = rhs - lhs
    return out
