"""Energy functionals with differentials, power, convexity metadata, slopes.

An energy is a map F(t, u) on [0, T] x R^n taking extended-real values,
together with a selector for its differential, the explicit time derivative
(the power of external forces), a declared convexity modulus ``lam`` (with
``-inf`` meaning "unknown"), and an optional closed-form metric slope for
nonsmooth functionals.  The metric-slope operations measure steepness in a
caller-supplied geometry so the same energy can be probed under different
dissipation metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, OutsideDomain

__all__ = [
    "EnergyFunctional",
    "SlopeRecord",
    "Geometry",
    "euclidean_geometry",
    "weighted_geometry",
    "eval_energy",
    "metric_slope",
    "global_lambda_slope",
    "lower_bound_inequality_check",
    "power_of_energy",
    "central_difference",
    "lambda_convexity_residual",
]

UNKNOWN_LAMBDA = -math.inf


@dataclass(frozen=True)
class Geometry:
    """Distance plus norm pair used by slope and contraction computations."""

    dist: Callable[[np.ndarray, np.ndarray], float]
    norm: Callable[[np.ndarray], float]
    dual_norm: Callable[[np.ndarray], float]


def euclidean_geometry() -> Geometry:
    n = np.linalg.norm
    return Geometry(dist=lambda u, w: float(n(np.asarray(w) - np.asarray(u))),
                    norm=lambda v: float(n(v)),
                    dual_norm=lambda xi: float(n(xi)))


def weighted_geometry(weight: Sequence[float]) -> Geometry:
    """Geometry of the norm ||v||_w^2 = sum_i w_i v_i^2 (w_i > 0)."""
    w = np.asarray(weight, dtype=float)
    if np.any(w <= 0.0):
        raise ValueError("geometry weights must be positive")

    def norm(v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(np.sum(w * v * v)))

    def dual(xi: np.ndarray) -> float:
        xi = np.asarray(xi, dtype=float)
        return float(np.sqrt(np.sum(xi * xi / w)))

    return Geometry(dist=lambda u, ww: norm(np.asarray(ww) - np.asarray(u)),
                    norm=norm, dual_norm=dual)


@dataclass
class EnergyFunctional:
    """F(t, u) with differential selector, power, and convexity metadata.

    ``differential`` returns the force xi at smooth points and ``None`` where
    F is not differentiable; ``selector`` may then provide a distinguished
    subdifferential element (how to choose one is a modeling decision made
    per example).  ``lam`` is the convexity modulus of F(t, .) in the system
    norm; ``-inf`` encodes "unknown" and disables convexity-based
    diagnostics.  ``slope`` is an optional registered closed-form metric
    slope for nonsmooth energies.
    """

    dim: int
    eval_fn: Callable[[float, np.ndarray], float]
    differential: Callable[[float, np.ndarray], Optional[np.ndarray]]
    power: Optional[Callable[[float, np.ndarray], float]] = None
    lam: float = UNKNOWN_LAMBDA
    domain_indicator: Optional[Callable[[np.ndarray], bool]] = None
    hessian: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    selector: Optional[Callable[[float, np.ndarray], Optional[np.ndarray]]] = None
    slope: Optional[Callable[[float, np.ndarray], float]] = None
    name: str = "energy"

    def in_domain(self, u: np.ndarray) -> bool:
        return True if self.domain_indicator is None else bool(self.domain_indicator(u))

    def __call__(self, t: float, u: np.ndarray) -> float:
        return eval_energy(self, t, u)

    def force(self, t: float, u: np.ndarray) -> Optional[np.ndarray]:
        """Differential where smooth, else the registered selector's choice."""
        xi = self.differential(t, u)
        if xi is None and self.selector is not None:
            xi = self.selector(t, u)
        return None if xi is None else np.asarray(xi, dtype=float)


@dataclass(frozen=True)
class SlopeRecord:
    local_slope: float
    global_lambda_slope: float
    lambda_used: float
    candidate_count: int
    approximate: bool = False


def eval_energy(F: EnergyFunctional, t: float, u: np.ndarray) -> float:
    """F(t, u); +inf outside the declared domain."""
    u = np.asarray(u, dtype=float)
    if u.shape != (F.dim,):
        raise DimensionMismatch(f"energy dim {F.dim}, state shape {u.shape}")
    if not F.in_domain(u):
        return math.inf
    return float(F.eval_fn(t, u))


def central_difference(F: EnergyFunctional, t: float, u: np.ndarray,
                       h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of F(t, .) at an interior point."""
    u = np.asarray(u, dtype=float)
    g = np.zeros_like(u)
    for i in range(len(u)):
        up, um = u.copy(), u.copy()
        step = h * (1.0 + abs(u[i]))
        up[i] += step
        um[i] -= step
        g[i] = (eval_energy(F, t, up) - eval_energy(F, t, um)) / (2.0 * step)
    return g


def metric_slope(F: EnergyFunctional, t: float, u: np.ndarray,
                 probe_radius: float, geometry: Optional[Geometry] = None,
                 n_directions: int = 64, n_levels: int = 9,
                 rng: Optional[np.random.Generator] = None) -> float:
    """Local metric slope limsup_{w->u} [F(u) - F(w)]_+ / D(u, w).

    Smooth points use the dual norm of the differential; declared nonsmooth
    energies use their registered closed form; the generic fallback samples
    shrinking spheres of radii probe_radius * 2^{-j} and applies a monotone
    extrapolation correction (such values are approximations).
    """
    if probe_radius <= 0.0:
        raise ValueError("probe_radius must be positive")
    geo = geometry or euclidean_geometry()
    u = np.asarray(u, dtype=float)
    if not F.in_domain(u) or not math.isfinite(eval_energy(F, t, u)):
        raise OutsideDomain(f"metric slope requested outside dom F at u={u!r}")

    if F.slope is not None:
        return float(F.slope(t, u))
    xi = F.differential(t, u)
    if xi is not None:
        return geo.dual_norm(np.asarray(xi, dtype=float))

    # generic limsup estimate over shrinking sampled spheres
    rng = rng or np.random.default_rng(0)
    dirs = rng.standard_normal((n_directions, len(u)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    Fu = eval_energy(F, t, u)
    estimates = []
    for j in range(n_levels):
        rho = probe_radius * 0.5 ** j
        best = 0.0
        for d in dirs:
            w = u + rho * d
            Fw = eval_energy(F, t, w)
            if not math.isfinite(Fw):
                continue
            dw = geo.dist(u, w)
            if dw > 0.0:
                best = max(best, max(Fu - Fw, 0.0) / dw)
        estimates.append(best)
    s = max(estimates)
    if len(estimates) >= 3 and estimates[-1] >= estimates[-2] >= estimates[-3]:
        s = estimates[-1] + (estimates[-1] - estimates[-2])
    return float(s)


def _default_candidates(u: np.ndarray, geometry: Geometry,
                        n_radii: int = 32, n_directions: int = 64,
                        r_min: float = 1e-6, r_max: float = 10.0,
                        rng: Optional[np.random.Generator] = None) -> list[np.ndarray]:
    rng = rng or np.random.default_rng(1)
    dirs = rng.standard_normal((n_directions, len(u)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.geomspace(r_min, r_max * (1.0 + np.linalg.norm(u)), n_radii)
    return [u + r * d for r in radii for d in dirs]


def global_lambda_slope(F: EnergyFunctional, t: float, u: np.ndarray, lam: float,
                        candidates: Sequence[np.ndarray],
                        geometry: Optional[Geometry] = None,
                        dist: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
                        with_default_grid: bool = True,
                        rng: Optional[np.random.Generator] = None) -> SlopeRecord:
    """Global lambda-slope: sup_w [ (F(u)-F(w))/D(u,w) + lam/2 D(u,w) ]_+ .

    The supremum runs over the provided candidates, optionally augmented by a
    log-radial default grid.  ``dist`` overrides the geometry's distance (it
    may be a quasi-distance evaluated in the order D(u, w)).
    """
    geo = geometry or euclidean_geometry()
    D = dist if dist is not None else geo.dist
    u = np.asarray(u, dtype=float)
    Fu = eval_energy(F, t, u)
    if not math.isfinite(Fu):
        raise OutsideDomain(f"global slope requested outside dom F at u={u!r}")
    cands = [np.asarray(w, dtype=float) for w in candidates]
    if with_default_grid:
        cands += _default_candidates(u, geo, rng=rng)
    best = 0.0
    used = 0
    for w in cands:
        d = D(u, w)
        if d <= 0.0:
            continue
        Fw = eval_energy(F, t, w)
        if not math.isfinite(Fw):
            continue
        used += 1
        val = (Fu - Fw) / d + 0.5 * lam * d
        best = max(best, val)
    local = metric_slope(F, t, u, probe_radius=1e-3 * (1.0 + float(np.linalg.norm(u))),
                         geometry=geo) if dist is None else best
    return SlopeRecord(local_slope=float(local), global_lambda_slope=float(best),
                       lambda_used=float(lam), candidate_count=used,
                       approximate=F.slope is None and F.differential(t, u) is None)


def lower_bound_inequality_check(F: EnergyFunctional, t: float, u: np.ndarray,
                                 slope: float, lam: float, w: np.ndarray,
                                 geometry: Optional[Geometry] = None) -> float:
    """Residual of F(w) >= F(u) - slope * D(u,w) + lam/2 D(u,w)^2."""
    geo = geometry or euclidean_geometry()
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    Fu = eval_energy(F, t, u)
    if not math.isfinite(Fu):
        raise OutsideDomain("lower-bound check requires u in dom F")
    d = geo.dist(u, w)
    return float(eval_energy(F, t, w) - Fu + slope * d - 0.5 * lam * d * d)


def power_of_energy(F: EnergyFunctional, t: float, u: np.ndarray) -> float:
    """Explicit time derivative d/dt F(t, u) at frozen state (the power)."""
    u = np.asarray(u, dtype=float)
    if not math.isfinite(eval_energy(F, t, u)):
        raise OutsideDomain("power requested outside dom F")
    if F.power is None:
        return 0.0
    return float(F.power(t, u))


def lambda_convexity_residual(F: EnergyFunctional, t: float, lam: float,
                              u0: np.ndarray, u1: np.ndarray, theta: float,
                              geometry: Optional[Geometry] = None) -> float:
    """Residual of the lambda-convexity inequality on one triple (>= 0 passes).

    Returns (1-th) F(u0) + th F(u1) - lam/2 th (1-th) ||u1-u0||^2 - F(u_th).
    """
    geo = geometry or euclidean_geometry()
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    um = (1.0 - theta) * u0 + theta * u1
    d = geo.dist(u0, u1)
    return float((1.0 - theta) * eval_energy(F, t, u0) + theta * eval_energy(F, t, u1)
                 - 0.5 * lam * theta * (1.0 - theta) * d * d - eval_energy(F, t, um))
