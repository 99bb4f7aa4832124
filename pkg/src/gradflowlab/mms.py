"""Gradient systems and minimizing-movement stepping.

A gradient system couples an energy with a dissipation structure, either a
vector dissipation potential R(u, v) on a linear state space or a metric
``D`` composed with a scalar potential ``psi``.  One incremental step
minimizes

    tau R(u_prev, (u - u_prev)/tau) + F(t_k, u)        (linear form)
    tau psi(D(u_prev, u)/tau)       + F(t_k, u)        (metric form)

with the state dependence of R frozen at u_prev (semi-implicit).  The
module also provides the trajectory interpolants, the variational
sub-step interpolant and its value function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import potentials as pot
from .energies import EnergyFunctional, Geometry, euclidean_geometry, eval_energy, weighted_geometry
from .errors import (
    DimensionMismatch,
    InfeasibleStart,
    InnerSolveFailed,
    OutOfRange,
)
from .potentials import DissipationPotential, ScalarPotential
from .solvers import minimize_smooth

__all__ = [
    "BanachDissipation",
    "MetricDissipation",
    "GradientSystem",
    "StepRecord",
    "Trajectory",
    "ValueFunctionProbe",
    "mms_step",
    "run_mms",
    "run_mms_partition",
    "interpolate",
    "de_giorgi_interpolant",
    "value_function_probe",
]


@dataclass(frozen=True)
class BanachDissipation:
    R: DissipationPotential


@dataclass(frozen=True)
class MetricDissipation:
    dist: Callable[[np.ndarray, np.ndarray], float]
    psi: ScalarPotential
    # set when dist is the weighted Euclidean distance; enables generic solves
    weight: Optional[np.ndarray] = None


Dissipation = Union[BanachDissipation, MetricDissipation]

# custom stepper signature: (t_k, u_prev, tau, rng, tol) ->
#     (u_k, xi_k or None, dict with phi_value/iterations/el_residual)
Stepper = Callable[[float, np.ndarray, float, np.random.Generator, float], tuple]


@dataclass
class GradientSystem:
    dim: int
    energy: EnergyFunctional
    dissipation: Dissipation
    metric_weight: Optional[np.ndarray] = None
    stepper: Optional[Stepper] = None
    # exact incremental solve, bypassing the generic minimizer (closed forms)
    prox: Optional[Callable[[float, np.ndarray, float], tuple]] = None
    name: str = "system"
    sample_states: Optional[Sequence[np.ndarray]] = None
    multistarts: int = 8

    def __post_init__(self) -> None:
        if isinstance(self.dissipation, MetricDissipation):
            if not self.dissipation.psi.superlinear:
                raise ValueError(
                    "metric minimizing movements need a superlinear psi; "
                    "rate-independent systems use the quasi-distance scheme")
            if self.sample_states is not None:
                self._check_metric_axioms()

    def _check_metric_axioms(self, tol: float = 1e-9) -> None:
        D = self.dissipation.dist
        pts = [np.asarray(p, dtype=float) for p in self.sample_states]
        for p in pts:
            if abs(D(p, p)) > tol:
                raise ValueError("distance violates D(u, u) = 0 on samples")
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                dij, dji = D(pts[i], pts[j]), D(pts[j], pts[i])
                scale = 1.0 + abs(dij)
                if dij < -tol or abs(dij - dji) > tol * scale:
                    raise ValueError("distance violates symmetry on samples")
                for k in range(len(pts)):
                    if D(pts[i], pts[k]) > dij + D(pts[j], pts[k]) + tol * scale:
                        raise ValueError("distance violates triangle inequality on samples")

    # -- geometry ---------------------------------------------------------
    def geometry_at(self, u: np.ndarray) -> Geometry:
        """Norm/distance pair of the dissipation, frozen at the state u."""
        d = self.dissipation
        if isinstance(d, BanachDissipation):
            R = d.R
            if R.form == "norm_composed":
                w = R.weight if R.weight is not None else np.ones(self.dim)
                return weighted_geometry(w)
            if R.form == "onsager_quadratic":
                return self._onsager_geometry(u)
            return euclidean_geometry()
        if d.weight is not None:
            return weighted_geometry(d.weight)
        norm = euclidean_geometry().norm
        return Geometry(dist=d.dist, norm=norm, dual_norm=norm)

    def _onsager_geometry(self, u: np.ndarray) -> Geometry:
        R = self.dissipation.R
        if R.onsager_inverse is not None:
            K = np.asarray(R.onsager_inverse(u), dtype=float)
            G = np.linalg.pinv(K, hermitian=True)
        else:
            G = np.asarray(R.metric(u), dtype=float)
            K = np.linalg.inv(G)

        def norm(v: np.ndarray) -> float:
            v = np.asarray(v, dtype=float)
            return float(np.sqrt(max(v @ G @ v, 0.0)))

        def dual(xi: np.ndarray) -> float:
            xi = np.asarray(xi, dtype=float)
            return float(np.sqrt(max(xi @ K @ xi, 0.0)))

        return Geometry(dist=lambda a, b: norm(np.asarray(b) - np.asarray(a)),
                        norm=norm, dual_norm=dual)

    def dist(self, a: np.ndarray, b: np.ndarray) -> float:
        if isinstance(self.dissipation, MetricDissipation):
            return float(self.dissipation.dist(a, b))
        return self.geometry_at(a).dist(a, b)


@dataclass
class StepRecord:
    increment_norm: float
    phi_value: float
    iterations: int
    el_residual: float
    multiplicity: int = 1
    converged_starts: int = 1
    minimizers: Optional[list] = None
    minimizer_increment_norms: Optional[list] = None


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray                       # (N+1, n)
    forces: Optional[list] = None            # per node, entries may be None
    step_records: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")
        if self.states.shape[0] != len(self.times):
            raise ValueError("one state per time node required")

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def force_at_node(self, k: int) -> Optional[np.ndarray]:
        if self.forces is None:
            return None
        return self.forces[k]


# ---------------------------------------------------------------------------
# incremental objective assembly


def _banach_objective(sys: GradientSystem, u_prev: np.ndarray, t_k: float, tau: float):
    """Incremental objective in increment coordinates d = u - u_prev.

    Working with the increment avoids catastrophic cancellation in
    (u - u_prev)/tau for very small steps (the sub-step interpolant probes
    radii down to tau * 2^-20).
    """
    R = sys.dissipation.R
    F = sys.energy

    def phi(d: np.ndarray) -> float:
        return tau * pot.eval_dissipation(R, u_prev, d / tau) + eval_energy(F, t_k, u_prev + d)

    def grad(d: np.ndarray) -> np.ndarray:
        g_F = F.differential(t_k, u_prev + d)
        if g_F is None:
            raise InnerSolveFailed(
                f"system {sys.name!r}: energy not differentiable along the generic "
                "solve; register a prox or selector")
        return _grad_R_v(R, u_prev, d / tau) + g_F

    hess = None
    if F.hessian is not None:
        HR = _hess_R_v(R, u_prev)
        if HR is not None:
            def hess(d: np.ndarray) -> np.ndarray:
                return HR / tau + F.hessian(t_k, u_prev + d)
    return phi, grad, hess


def _grad_R_v(R: DissipationPotential, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """d/dv R(u, v) for the smooth forms used in generic stepping."""
    if R.form == "onsager_quadratic":
        if R.onsager_inverse is not None:
            K = np.asarray(R.onsager_inverse(u), dtype=float)
            Gv, *_ = np.linalg.lstsq(K, v, rcond=None)
            return Gv
        return np.asarray(R.metric(u), dtype=float) @ v
    if R.form == "norm_composed":
        w = R.weight if R.weight is not None else np.ones_like(v)
        nv = float(np.sqrt(np.sum(w * v * v)))
        if nv == 0.0:
            return np.zeros_like(v)
        return R.psi.prime(nv) * (w * v) / nv
    a = np.asarray(R.coeffs(u), dtype=float)
    return np.array([ai * psi_i.prime(abs(vi)) * np.sign(vi)
                     for ai, psi_i, vi in zip(a, R.psis, v)])


def _hess_R_v(R: DissipationPotential, u: np.ndarray) -> Optional[np.ndarray]:
    """d^2/dv^2 R(u, v) when constant in v (quadratic forms only)."""
    if R.form == "onsager_quadratic":
        if R.onsager_inverse is not None:
            K = np.asarray(R.onsager_inverse(u), dtype=float)
            return np.linalg.pinv(K, hermitian=True)
        return np.asarray(R.metric(u), dtype=float)
    if R.form == "norm_composed" and R.psi.kind == "quadratic":
        w = R.weight if R.weight is not None else np.ones(len(u))
        return R.psi.scale * np.diag(w)
    if R.form == "separable" and all(p.kind == "quadratic" for p in R.psis):
        a = np.asarray(R.coeffs(u), dtype=float)
        return np.diag([ai * p.scale for ai, p in zip(a, R.psis)])
    return None


def _metric_objective(sys: GradientSystem, u_prev: np.ndarray, t_k: float, tau: float):
    """Incremental objective in increment coordinates for norm-type metrics."""
    d = sys.dissipation
    if d.weight is None:
        raise InnerSolveFailed(
            f"system {sys.name!r}: metric dissipation without norm structure "
            "needs a registered stepper")
    psi, w = d.psi, d.weight
    F = sys.energy

    def phi(dv: np.ndarray) -> float:
        r = float(np.sqrt(np.sum(w * dv * dv)))
        return tau * psi(r / tau) + eval_energy(F, t_k, u_prev + dv)

    def grad(dv: np.ndarray) -> np.ndarray:
        r = float(np.sqrt(np.sum(w * dv * dv)))
        g_F = F.differential(t_k, u_prev + dv)
        if g_F is None:
            raise InnerSolveFailed(
                f"system {sys.name!r}: energy not differentiable along the generic "
                "solve; register a prox or selector")
        if r == 0.0:
            return g_F.copy()
        return psi.prime(r / tau) * (w * dv) / r + g_F

    hess = None
    if F.hessian is not None and psi.kind == "quadratic":
        W = psi.scale * np.diag(w)

        def hess(dv: np.ndarray) -> np.ndarray:
            return W / tau + F.hessian(t_k, u_prev + dv)
    return phi, grad, hess


def _multistart_points(u_prev: np.ndarray, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Start increments: zero plus randomly scaled perturbations around u_prev."""
    starts = [np.zeros_like(u_prev)]
    base = 1.0 + float(np.linalg.norm(u_prev))
    scales = [1e-3, 1e-2, 1e-1]
    for j in range(n - 1):
        z = rng.standard_normal(len(u_prev))
        starts.append(scales[j % len(scales)] * base * z)
    return starts


def mms_step(sys: GradientSystem, u_prev: np.ndarray, t_k: float, tau: float,
             rng: Optional[np.random.Generator] = None, tol: float = 1e-9,
             tol_phi: Optional[float] = None,
             collect_minimizers: bool = False):
    """One incremental minimization step; returns (u_k, xi_k, record).

    ``xi_k`` is the force selected by the energy at the minimizer (None at
    genuinely nonsmooth points without a registered selector).  With
    ``collect_minimizers`` the record gains the list of near-optimal
    minimizers found by the multi-start (used by the value-function probe).
    """
    if tau <= 0.0:
        raise ValueError("time step must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != (sys.dim,):
        raise DimensionMismatch(f"state shape {u_prev.shape}, system dim {sys.dim}")
    rng = rng or np.random.default_rng(0)

    if sys.prox is not None:
        u_k, xi_k, info = sys.prox(t_k, u_prev, tau)
        rec = StepRecord(increment_norm=sys.dist(u_prev, u_k),
                         phi_value=info.get("phi_value", math.nan),
                         iterations=info.get("iterations", 0),
                         el_residual=info.get("el_residual", 0.0))
        if collect_minimizers:
            rec.minimizers = [u_k]
            rec.minimizer_increment_norms = [rec.increment_norm]
        return u_k, xi_k, rec

    if sys.stepper is not None:
        u_k, xi_k, info = sys.stepper(t_k, u_prev, tau, rng, tol)
        rec = StepRecord(increment_norm=sys.dist(u_prev, u_k),
                         phi_value=info.get("phi_value", math.nan),
                         iterations=info.get("iterations", 0),
                         el_residual=info.get("el_residual", math.nan))
        if collect_minimizers:
            rec.minimizers = info.get("minimizers", [u_k])
            rec.minimizer_increment_norms = [sys.dist(u_prev, m) for m in rec.minimizers]
        return u_k, xi_k, rec

    if isinstance(sys.dissipation, BanachDissipation):
        phi, grad, hess = _banach_objective(sys, u_prev, t_k, tau)
    else:
        phi, grad, hess = _metric_objective(sys, u_prev, t_k, tau)

    F = sys.energy

    def feasible(d: np.ndarray) -> bool:
        return F.in_domain(u_prev + d)

    def tol_scale(d: np.ndarray) -> float:
        xi = F.differential(t_k, u_prev + d)
        return 1.0 + (float(np.linalg.norm(xi)) if xi is not None else 0.0)

    def increment_norm(d: np.ndarray) -> float:
        if isinstance(sys.dissipation, MetricDissipation):
            w = sys.dissipation.weight
            return float(np.sqrt(np.sum(w * d * d)))
        return sys.geometry_at(u_prev).norm(d)

    starts = [s for s in _multistart_points(u_prev, sys.multistarts, rng) if feasible(s)]
    starts = [s for s in starts if math.isfinite(eval_energy(F, t_k, u_prev + s))]
    if not starts:
        raise InfeasibleStart(f"system {sys.name!r}: no feasible start at t={t_k}")

    results = []
    for s in starts:
        res = minimize_smooth(phi, grad, s, hess=hess, feasible=feasible,
                              tol=tol, tol_scale=tol_scale)
        if res.converged and math.isfinite(res.value):
            results.append(res)
    if not results:
        raise InnerSolveFailed(f"system {sys.name!r}: no start converged at t={t_k}")

    best = min(r.value for r in results)
    band = tol_phi if tol_phi is not None else 1e-8 * (1.0 + abs(best))
    near = [r for r in results if r.value <= best + band]
    near.sort(key=lambda r: increment_norm(r.x))
    chosen = near[0]

    # count distinct near-optimal minimizers
    distinct: list[np.ndarray] = []
    for r in near:
        if all(np.linalg.norm(r.x - q) > 1e-6 * (1.0 + np.linalg.norm(q)) for q in distinct):
            distinct.append(r.x)

    u_k = u_prev + chosen.x
    xi_k = F.force(t_k, u_k)
    rec = StepRecord(increment_norm=increment_norm(chosen.x),
                     phi_value=chosen.value,
                     iterations=chosen.iterations,
                     el_residual=chosen.grad_norm,
                     multiplicity=len(distinct),
                     converged_starts=len(results))
    if collect_minimizers:
        rec.minimizers = [u_prev + d for d in distinct]
        rec.minimizer_increment_norms = [increment_norm(d) for d in distinct]
    return u_k, xi_k, rec


def run_mms_partition(sys: GradientSystem, u0: np.ndarray, times: Sequence[float],
                      seed: int = 0, tol: float = 1e-9) -> Trajectory:
    """Run the scheme on an explicit increasing partition of time nodes."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2 or np.any(np.diff(times) <= 0.0):
        raise ValueError("need at least two strictly increasing time nodes")
    u0 = np.asarray(u0, dtype=float)
    F = sys.energy
    if not (F.in_domain(u0) and math.isfinite(eval_energy(F, times[0], u0))):
        raise InfeasibleStart("initial state outside dom F")
    rng = np.random.default_rng(seed)
    states = [u0]
    forces = [F.force(times[0], u0)]
    records = []
    autonomous = F.power is None
    for k in range(1, len(times)):
        tau = float(times[k] - times[k - 1])
        try:
            u_k, xi_k, rec = mms_step(sys, states[-1], float(times[k]), tau, rng=rng, tol=tol)
        except (InnerSolveFailed, InfeasibleStart) as exc:
            raise type(exc)(f"step {k} (t={times[k]:g}): {exc}") from exc
        if autonomous:
            f_prev = eval_energy(F, times[k], states[-1])
            f_new = eval_energy(F, times[k], u_k)
            if f_new > f_prev + 1e-12 * (1.0 + abs(f_prev)):
                raise InnerSolveFailed(
                    f"step {k}: energy increased ({f_prev!r} -> {f_new!r}); "
                    "inner minimizer is not trustworthy")
        states.append(u_k)
        forces.append(xi_k)
        records.append(rec)
    return Trajectory(times=times, states=np.asarray(states), forces=forces,
                      step_records=records)


def run_mms(sys: GradientSystem, u0: np.ndarray, t0: float, T: float, N: int,
            seed: int = 0, tol: float = 1e-9) -> Trajectory:
    """Uniform-step minimizing movements with tau = (T - t0)/N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return run_mms_partition(sys, u0, np.linspace(t0, T, N + 1), seed=seed, tol=tol)


def interpolate(traj: Trajectory, kind: str, t: float) -> np.ndarray:
    """Evaluate one of the three standard interpolants at time t.

    ``affine`` is the piecewise-linear interpolant, ``const_left`` the
    left-continuous piecewise-constant one (value u_k on ](k-1)tau, k tau]),
    ``const_right`` the right-continuous one.
    """
    lo, hi = traj.span
    if t < lo - 1e-12 * (1 + abs(lo)) or t > hi + 1e-12 * (1 + abs(hi)):
        raise OutOfRange(f"t={t!r} outside trajectory span [{lo}, {hi}]")
    t = min(max(t, lo), hi)
    times, states = traj.times, traj.states
    k = int(np.searchsorted(times, t, side="left"))
    if k == 0:
        return states[0].copy()
    if kind == "affine":
        th = (t - times[k - 1]) / (times[k] - times[k - 1])
        return (1.0 - th) * states[k - 1] + th * states[k]
    if kind == "const_left":
        return states[k].copy()
    if kind == "const_right":
        if t == times[k]:
            return states[k].copy()
        return states[k - 1].copy()
    raise ValueError(f"unknown interpolant kind {kind!r}")


def de_giorgi_interpolant(sys: GradientSystem, u_base: np.ndarray, t_base: float,
                          r: float, rng: Optional[np.random.Generator] = None,
                          tol: float = 1e-9):
    """Sub-step variational interpolant: minimize r psi(D/r) + F; returns (u, value)."""
    if r <= 0.0:
        raise ValueError("interpolation radius r must be positive")
    u, _, rec = mms_step(sys, u_base, t_base, r, rng=rng, tol=tol)
    return u, float(rec.phi_value)


@dataclass
class ValueFunctionProbe:
    base_state: np.ndarray
    radii: np.ndarray
    phi: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray
    phi_nonincreasing: bool
    intertwined: bool
    failures: list = field(default_factory=list)


def value_function_probe(sys: GradientSystem, u_base: np.ndarray,
                         r_grid: Sequence[float], t_base: float = 0.0,
                         seed: int = 0, tol: float = 1e-9,
                         tol_phi: Optional[float] = None) -> ValueFunctionProbe:
    """Sample the sub-step value function and its minimizer distances.

    Per radius the multi-start collects near-optimal minimizers (within the
    optimizer band) and reports the extreme distances d+ and d- to the base
    state.  Failed radii are recorded and skipped.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0.0) or np.any(r_grid <= 0.0):
        raise ValueError("r_grid must be positive and increasing")
    u_base = np.asarray(u_base, dtype=float)
    rng = np.random.default_rng(seed)
    phis, dps, dms, radii, failures = [], [], [], [], []
    for r in r_grid:
        try:
            _, _, rec = mms_step(sys, u_base, t_base, float(r), rng=rng, tol=tol,
                                 tol_phi=tol_phi, collect_minimizers=True)
        except InnerSolveFailed as exc:
            failures.append((float(r), str(exc)))
            continue
        dists = rec.minimizer_increment_norms
        if dists is None:
            dists = [sys.dist(u_base, m) for m in rec.minimizers]
        radii.append(float(r))
        phis.append(float(rec.phi_value))
        dps.append(max(dists))
        dms.append(min(dists))
    phis_a = np.asarray(phis)
    dps_a, dms_a = np.asarray(dps), np.asarray(dms)
    mono = bool(np.all(np.diff(phis_a) <= 1e-9 * (1.0 + np.abs(phis_a[:-1]))) if len(phis_a) > 1 else True)
    inter = bool(np.all(dms_a[1:] >= dps_a[:-1] - 1e-7 * (1.0 + dps_a[:-1])) if len(dps_a) > 1 else True)
    return ValueFunctionProbe(base_state=u_base, radii=np.asarray(radii), phi=phis_a,
                              d_plus=dps_a, d_minus=dms_a,
                              phi_nonincreasing=mono, intertwined=inter,
                              failures=failures)
