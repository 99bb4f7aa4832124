"""Evolutionary variational inequality residuals and contraction checks.

The pointwise inequality tested here controls squared distances to arbitrary
test states w:

    1/2 D(u(t), w)^2 <= 1/2 e^{-lam (t-s)} D(u(s), w)^2
                        + M_lam(t-s) (F(w) - F(t, u(t))),

with M_lam(r) = (1 - e^{-lam r})/lam.  Any probe-based check of it is a
falsification test: the inequality quantifies over all of dom F, so passing
probes never certifies it, while one failing probe refutes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .energies import eval_energy
from .errors import GridMismatch, OutsideDomain
from .mms import GradientSystem, Trajectory, interpolate, run_mms, run_mms_partition

__all__ = [
    "EviReport",
    "m_lambda",
    "evi_residual",
    "evi_probe_report",
    "contractivity_check",
    "semigroup_check",
    "default_probe_points",
]


def m_lambda(lam: float, tau: float) -> float:
    """M_lam(tau) = int_0^tau e^{-lam (tau - s)} ds, continuous at lam = 0."""
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if abs(lam) <= 1e-12:
        return tau
    return (1.0 - math.exp(-lam * tau)) / lam


def evi_residual(sys: GradientSystem, traj: Trajectory, w: np.ndarray, lam: float,
                 s: float, t: float) -> float:
    """RHS - LHS of the inequality at (w, s, t); >= -tol expected for flows."""
    if not (s < t):
        raise ValueError("need s < t")
    w = np.asarray(w, dtype=float)
    F = sys.energy
    Fw = eval_energy(F, t, w)
    if not math.isfinite(Fw):
        raise OutsideDomain("test state w outside dom F")
    us = interpolate(traj, "affine", s)
    ut = interpolate(traj, "affine", t)
    d_s = sys.dist(us, w)
    d_t = sys.dist(ut, w)
    lhs = 0.5 * d_t * d_t
    rhs = (0.5 * math.exp(-lam * (t - s)) * d_s * d_s
           + m_lambda(lam, t - s) * (Fw - eval_energy(F, t, ut)))
    return float(rhs - lhs)


@dataclass
class EviReport:
    lam: float
    n_probes: int
    worst_violation: float          # most negative residual (0 if none negative)
    worst_case: Optional[tuple] = None
    residuals: list = field(default_factory=list)


def default_probe_points(traj: Trajectory, radius: float, n_lattice: int = 20,
                         partner: Optional[Trajectory] = None,
                         seed: int = 0) -> list[np.ndarray]:
    """Probe states: partner nodes plus a seeded lattice in a ball around u(0)."""
    pts = []
    if partner is not None:
        stride = max(len(partner.times) // 50, 1)
        pts += [partner.states[k].copy() for k in range(0, len(partner.times), stride)]
    u0 = traj.states[0]
    n = traj.states.shape[1]
    if n == 1:
        offsets = np.linspace(-radius, radius, n_lattice)
        pts += [u0 + np.array([o]) for o in offsets if o != 0.0]
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_lattice, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = np.linspace(radius / n_lattice, radius, n_lattice)
        pts += [u0 + r * d for r, d in zip(radii, dirs)]
    return pts


def evi_probe_report(sys: GradientSystem, traj: Trajectory, lam: float,
                     probes: Sequence[np.ndarray],
                     pairs: Optional[Sequence[tuple[float, float]]] = None,
                     max_pairs: int = 10_000, seed: int = 0) -> EviReport:
    """Evaluate the residual over probes x ordered node pairs (subsampled)."""
    times = traj.times
    if pairs is None:
        all_pairs = [(float(times[i]), float(times[j]))
                     for i in range(len(times)) for j in range(i + 1, len(times))]
        if len(all_pairs) > max_pairs:
            rng = np.random.default_rng(seed)
            idx = rng.choice(len(all_pairs), size=max_pairs, replace=False)
            all_pairs = [all_pairs[int(i)] for i in idx]
        pairs = all_pairs
    worst = 0.0
    worst_case = None
    residuals = []
    for w in probes:
        Fw = eval_energy(sys.energy, float(times[-1]), np.asarray(w, float))
        if not math.isfinite(Fw):
            continue
        for (s, t) in pairs:
            r = evi_residual(sys, traj, w, lam, s, t)
            residuals.append(r)
            if r < worst:
                worst = r
                worst_case = (np.asarray(w, float), s, t)
    return EviReport(lam=lam, n_probes=len(probes), worst_violation=float(worst),
                     worst_case=worst_case, residuals=residuals)


def contractivity_check(traj_a: Trajectory, traj_b: Trajectory, lam: float,
                        sample_times: Optional[Sequence[float]] = None,
                        sys: Optional[GradientSystem] = None) -> float:
    """Worst ratio D(delta(t)) / (e^{-lam (t-s)} D(delta(s))) over ordered pairs.

    The two trajectories must share the time grid.  Coinciding states give
    0/0; such pairs are reported as ratio 1.
    """
    if len(traj_a.times) != len(traj_b.times) or not np.allclose(traj_a.times, traj_b.times):
        raise GridMismatch("trajectories do not share a time grid")
    if sample_times is None:
        sample_times = traj_a.times
    dist = (lambda a, b: sys.dist(a, b)) if sys is not None else (
        lambda a, b: float(np.linalg.norm(np.asarray(b) - np.asarray(a))))
    ds = []
    for t in sample_times:
        ua = interpolate(traj_a, "affine", float(t))
        ub = interpolate(traj_b, "affine", float(t))
        ds.append(dist(ua, ub))
    worst = 0.0
    for i in range(len(sample_times)):
        for j in range(i + 1, len(sample_times)):
            decay = math.exp(-lam * (float(sample_times[j]) - float(sample_times[i])))
            denom = decay * ds[i]
            if denom == 0.0:
                ratio = 1.0 if ds[j] == 0.0 else math.inf
            else:
                ratio = ds[j] / denom
            worst = max(worst, ratio)
    return float(worst)


def semigroup_check(sys: GradientSystem, u0: np.ndarray, t_split: float,
                    T: float, N: int, seed: int = 0) -> float:
    """||full run - restarted run|| at matching nodes (autonomous systems)."""
    if sys.energy.power is not None:
        raise ValueError("semigroup property is checked for autonomous systems")
    if not (0.0 <= t_split <= T):
        raise ValueError("t_split must lie in [0, T]")
    full = run_mms(sys, u0, 0.0, T, N, seed=seed)
    if t_split in (0.0, T):
        return 0.0
    k = int(round(t_split / T * N))
    k = min(max(k, 1), N - 1)
    times = full.times
    first = run_mms_partition(sys, u0, times[:k + 1], seed=seed)
    second = run_mms_partition(sys, first.states[-1], times[k:], seed=seed + 1)
    err = 0.0
    for j in range(len(times) - k):
        err = max(err, float(np.linalg.norm(second.states[j] - full.states[k + j])))
    return err
