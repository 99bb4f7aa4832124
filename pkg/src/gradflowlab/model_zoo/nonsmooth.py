"""Max-of-coordinates energy on R^2 with a weighted Hilbert metric.

F(u) = max{|u_1|, |u_2|} under the norm ||v||^2 = v_1^2/a + v_2^2/b.  Flows
first slide the larger coordinate, then travel along the diagonal with speed
ab/(a+b), then stop at the origin; the closed form is exposed as an oracle.
The incremental step is solved exactly through the dual problem, a 2d
quadratic program over the l1 ball, so step states and forces are accurate to
rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..energies import EnergyFunctional
from ..mms import GradientSystem, MetricDissipation
from ..potentials import quadratic

__all__ = ["nonsmooth_r2_system", "NonsmoothOracle"]


def _dual_qp(w: np.ndarray, tau: float, a: float, b: float) -> np.ndarray:
    """argmin over |xi_1|+|xi_2| <= 1 of tau/2 xi^T K xi - <xi, w>, K = diag(a, b)."""
    xi0 = np.array([w[0] / (tau * a), w[1] / (tau * b)])
    if abs(xi0[0]) + abs(xi0[1]) <= 1.0:
        return xi0

    def edge_min(s1: float, s2: float) -> tuple[float, np.ndarray]:
        # xi = (s1 th, s2 (1 - th)), th in [0, 1]
        th = (tau * b + s1 * w[0] - s2 * w[1]) / (tau * (a + b))
        th = min(max(th, 0.0), 1.0)
        xi = np.array([s1 * th, s2 * (1.0 - th)])
        val = 0.5 * tau * (a * xi[0] ** 2 + b * xi[1] ** 2) - float(w @ xi)
        return val, xi

    best_val, best_xi = math.inf, None
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            val, xi = edge_min(s1, s2)
            if val < best_val:
                best_val, best_xi = val, xi
    return best_xi


@dataclass
class NonsmoothOracle:
    """Closed-form flow from u0 with u0_1 > u0_2 > 0."""

    a: float
    b: float
    u0: np.ndarray

    @property
    def t1(self) -> float:
        return (self.u0[0] - self.u0[1]) / self.a

    @property
    def t2(self) -> float:
        return self.t1 + (self.a + self.b) / (self.a * self.b) * self.u0[1]

    def __call__(self, t: float) -> np.ndarray:
        if t <= self.t1:
            return self.u0 - np.array([self.a * t, 0.0])
        if t <= self.t2:
            level = self.u0[1] - self.a * self.b / (self.a + self.b) * (t - self.t1)
            return np.array([level, level])
        return np.zeros(2)


def nonsmooth_r2_system(a: float, b: float) -> tuple[GradientSystem, type]:
    """System plus the oracle class (instantiate with the initial state)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("metric weights a, b must be positive")
    weight = np.array([1.0 / a, 1.0 / b])
    theta_diag = b / (a + b)

    def eval_fn(t: float, u: np.ndarray) -> float:
        return float(max(abs(u[0]), abs(u[1])))

    def classify(u: np.ndarray, tol: float = 1e-11) -> str:
        """Robust region dispatch: scheme states sit on the nonsmooth sets up
        to rounding, so membership must not be read off exact equality."""
        a1, a2 = abs(u[0]), abs(u[1])
        scale = a1 + a2
        if scale <= tol:
            return "origin"
        if abs(u[0] - u[1]) <= tol * (1.0 + scale):
            return "diag"
        if abs(u[0] + u[1]) <= tol * (1.0 + scale):
            return "anti"
        return "first" if a1 > a2 else "second"

    def differential(t: float, u: np.ndarray):
        region = classify(u)
        if region == "first":
            return np.array([math.copysign(1.0, u[0]), 0.0])
        if region == "second":
            return np.array([0.0, math.copysign(1.0, u[1])])
        return None  # diagonals and the origin

    def selector(t: float, u: np.ndarray):
        # distinguished subdifferential element along the nonsmooth sets
        region = classify(u)
        if region == "origin":
            return np.zeros(2)
        if region == "diag":
            return math.copysign(1.0, u[0]) * np.array([theta_diag, 1.0 - theta_diag])
        if region == "anti":
            return math.copysign(1.0, u[1]) * np.array([-theta_diag, 1.0 - theta_diag])
        return differential(t, u)

    diag_slope = math.sqrt(a * b / (a + b))

    def slope(t: float, u: np.ndarray) -> float:
        region = classify(u)
        if region == "first":
            return math.sqrt(a)
        if region == "second":
            return math.sqrt(b)
        if region == "origin":
            return 0.0
        return diag_slope

    energy = EnergyFunctional(dim=2, eval_fn=eval_fn, differential=differential,
                              selector=selector, slope=slope, lam=0.0,
                              name="max_abs")

    def prox(t_k: float, u_prev: np.ndarray, tau: float):
        xi = _dual_qp(u_prev, tau, a, b)
        u_new = u_prev - tau * np.array([a * xi[0], b * xi[1]])
        # snap the exactly-absorbed state to the origin
        if abs(xi[0]) + abs(xi[1]) < 1.0 - 1e-14:
            u_new = np.zeros(2)
        # keep states that land on a sliding set exactly there (the update
        # drifts off by an ulp per step otherwise)
        scale = abs(u_new[0]) + abs(u_new[1])
        if 0.0 < abs(u_new[0] - u_new[1]) <= 1e-12 * (1.0 + scale):
            mid = 0.5 * (u_new[0] + u_new[1])
            u_new = np.array([mid, mid])
        elif 0.0 < abs(u_new[0] + u_new[1]) <= 1e-12 * (1.0 + scale):
            mid = 0.5 * (u_new[0] - u_new[1])
            u_new = np.array([mid, -mid])
        phi_val = (0.5 / tau * float(np.sum(weight * (u_new - u_prev) ** 2))
                   + eval_fn(t_k, u_new))
        return u_new, xi, {"phi_value": phi_val, "iterations": 1, "el_residual": 0.0}

    def dist(x: np.ndarray, y: np.ndarray) -> float:
        d = np.asarray(y, float) - np.asarray(x, float)
        return float(np.sqrt(np.sum(weight * d * d)))

    system = GradientSystem(
        dim=2, energy=energy,
        dissipation=MetricDissipation(dist=dist, psi=quadratic(), weight=weight),
        prox=prox, name="nonsmooth_r2")
    return system, NonsmoothOracle
