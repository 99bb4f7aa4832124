"""Small worked systems: coordinate-change check, the homogeneous-degree
energy with nonunique limits, and the scalar hysteresis model."""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from ..energies import EnergyFunctional
from ..errors import OriginSample
from ..mms import GradientSystem, MetricDissipation
from ..potentials import quadratic
from ..rate_independent import Eris, QuasiDistance

__all__ = ["polar_gradient_check", "missing_usc_system", "usc_axis_recursion",
           "usc_axis_solution", "eris_toy", "eris_toy_unidirectional"]


def _default_planar_energy(a: float):
    def f(u: np.ndarray) -> float:
        return 0.5 * u[0] ** 2 + 0.5 * u[1] ** 2 + 0.25 * a * u[1] ** 4

    def g(u: np.ndarray) -> np.ndarray:
        return np.array([u[0], u[1] + a * u[1] ** 3])

    return f, g


def polar_gradient_check(samples: np.ndarray, a: float = 1.0,
                         f: Optional[Callable[[np.ndarray], float]] = None,
                         grad_f: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         fd_step: float = 1e-5) -> float:
    """Worst discrepancy between the Cartesian gradient and its polar twin.

    Samples are (r, phi) pairs away from the origin.  The polar gradient
    applies the inverse metric diag(1, 1/r^2) to the polar partials of the
    composed energy and is pushed forward through the coordinate map; for a
    correct metric transformation both computations agree.
    """
    if f is None or grad_f is None:
        f, grad_f = _default_planar_energy(a)
    worst = 0.0
    for r, phi in np.asarray(samples, dtype=float):
        if r <= 1e-12:
            raise OriginSample("polar check undefined at the origin")

        def f_polar(rr: float, pp: float) -> float:
            return f(np.array([rr * math.cos(pp), rr * math.sin(pp)]))

        hr = fd_step * (1.0 + abs(r))
        hp = fd_step
        df_dr = (f_polar(r + hr, phi) - f_polar(r - hr, phi)) / (2.0 * hr)
        df_dp = (f_polar(r, phi + hp) - f_polar(r, phi - hp)) / (2.0 * hp)
        grad_polar = np.array([df_dr, df_dp / (r * r)])
        jac = np.array([[math.cos(phi), -r * math.sin(phi)],
                        [math.sin(phi), r * math.cos(phi)]])
        pushed = jac @ grad_polar
        cart = grad_f(np.array([r * math.cos(phi), r * math.sin(phi)]))
        worst = max(worst, float(np.linalg.norm(pushed - cart)))
    return worst


def usc_axis_recursion(u1_prev: float, tau: float) -> float:
    """On-axis incremental recursion: sqrt(u_k) = sqrt(9 tau^2/16 + u_{k-1}) - 3 tau/4."""
    root = math.sqrt(9.0 * tau * tau / 16.0 + u1_prev) - 0.75 * tau
    return root * root


def usc_axis_solution(t: float, t_stop: float = 4.0 / 3.0) -> float:
    """Nonnegative on-axis solution from u0 = (1, 0): (9/16)(4/3 - t)^2, then 0."""
    return 9.0 / 16.0 * (t_stop - t) ** 2 if t < t_stop else 0.0


def missing_usc_system() -> GradientSystem:
    """Euclidean quadratic-dissipation system whose scheme limit is selective.

    The energy is the homogeneous-degree functional with gradient field

        u1_dot = -(3 u1^2 + 2 u2^4) / (2 (u1^2 + u2^4)^{3/4}),
        u2_dot = -u1 u2^3 / (u1^2 + u2^4)^{3/4},

    i.e. F(u) = u1 (u1^2 + u2^4)^{1/4}.  On the invariant axis u2 = 0 the
    flow from nonnegative data is non-unique; the published selection keeps
    the nonnegative branch, realized by the closed-form axis recursion.  (An
    unrestricted global minimization would leave the origin downward once the
    state is within O(tau^2) of it, because a strictly lower incremental
    value of order tau^3 exists on the negative side; the registered stepper
    implements the branch selection instead.)  Off the axis the incremental
    problems are smooth and solved by damped Newton.
    """

    def s(u: np.ndarray) -> float:
        return u[0] ** 2 + u[1] ** 4

    def eval_fn(t: float, u: np.ndarray) -> float:
        return float(u[0] * s(u) ** 0.25)

    def differential(t: float, u: np.ndarray):
        ss = s(u)
        if ss == 0.0:
            return np.zeros(2)    # |F(u)| <= |u|^{3/2}, differentiable at 0
        return np.array([ss ** 0.25 + 0.5 * u[0] ** 2 * ss ** -0.75,
                         u[0] * u[1] ** 3 * ss ** -0.75])

    def hessian(t: float, u: np.ndarray):
        ss = s(u)
        if ss == 0.0:
            return None
        h11 = 0.75 * u[0] * ss ** -1.75 * (u[0] ** 2 + 2.0 * u[1] ** 4)
        h12 = u[1] ** 3 * ss ** -0.75 - 1.5 * u[0] ** 2 * u[1] ** 3 * ss ** -1.75
        h22 = 3.0 * u[0] * u[1] ** 2 * ss ** -0.75 - 3.0 * u[0] * u[1] ** 6 * ss ** -1.75
        return np.array([[h11, h12], [h12, h22]])

    energy = EnergyFunctional(dim=2, eval_fn=eval_fn, differential=differential,
                              hessian=hessian, name="homogeneous_selector")

    def stepper(t_k: float, u_prev: np.ndarray, tau: float,
                rng: np.random.Generator, tol: float):
        from .. import solvers
        if abs(u_prev[1]) <= 1e-12 and u_prev[0] >= 0.0:
            root = math.sqrt(9.0 * tau * tau / 16.0 + u_prev[0]) - 0.75 * tau
            u_k = np.array([root * root, 0.0])
            xi = differential(t_k, u_k)
            phi_val = (float(np.sum((u_k - u_prev) ** 2)) / (2.0 * tau)
                       + eval_fn(t_k, u_k))
            res = abs((u_k[0] - u_prev[0]) / tau + 1.5 * root)
            return u_k, xi, {"phi_value": phi_val, "iterations": 1,
                             "el_residual": res}

        def phi(d: np.ndarray) -> float:
            return float(np.sum(d * d)) / (2.0 * tau) + eval_fn(t_k, u_prev + d)

        def grad(d: np.ndarray) -> np.ndarray:
            return d / tau + differential(t_k, u_prev + d)

        def hess(d: np.ndarray):
            H = hessian(t_k, u_prev + d)
            if H is None:
                return np.eye(2) / tau
            return np.eye(2) / tau + H

        best = None
        for j in range(4):
            d0 = np.zeros(2) if j == 0 else 0.01 * j * rng.standard_normal(2)
            r = solvers.minimize_smooth(phi, grad, d0, hess=hess, tol=tol,
                                        tol_scale=lambda d: 1.0 + float(
                                            np.linalg.norm(differential(t_k, u_prev + d))))
            if r.converged and (best is None or r.value < best.value):
                best = r
        if best is None:
            from ..errors import InnerSolveFailed
            raise InnerSolveFailed("off-axis incremental Newton did not converge")
        u_k = u_prev + best.x
        return u_k, differential(t_k, u_k), {"phi_value": best.value,
                                             "iterations": best.iterations,
                                             "el_residual": best.grad_norm}

    return GradientSystem(
        dim=2, energy=energy,
        dissipation=MetricDissipation(
            dist=lambda x, y: float(np.linalg.norm(np.asarray(y) - np.asarray(x))),
            psi=quadratic(), weight=np.ones(2)),
        stepper=stepper, name="missing_usc")


def _toy_power_constants(a: float, lam: float, t_max: float,
                         u_max: float) -> tuple[float, float]:
    """Sampled constants with |dF/dt| <= C_E (F + c_E) on [0,t_max] x [-u_max,u_max]."""
    ts = np.linspace(0.0, t_max, 33)
    us = np.linspace(-u_max, u_max, 65)
    f_min = min(0.5 * a * u * u - u * lam * t for t in ts for u in us)
    c_E = 1.0 + max(0.0, -2.0 * f_min)
    C_E = 0.0
    for t in ts:
        for u in us:
            f = 0.5 * a * u * u - u * lam * t
            C_E = max(C_E, abs(lam * u) / (f + c_E))
    return 1.05 * C_E + 0.1, c_E


def eris_toy(a: float, lam: float, t_max: float = 4.0,
             u_max: float = 10.0) -> tuple[Eris, Callable[[float], float]]:
    """Scalar hysteresis model with the asymmetric dissipation 2|v| + v.

    F(t, u) = a u^2/2 - u lam t; the stable set is the interval
    [(lam t - 3)/a, (lam t + 1)/a]; the scheme started from u0 = 0 follows
    max{0, (lam t - 3)/a} for lam >= 0 and min{0, (lam t + 1)/a} otherwise.
    Returns the system plus the closed-form solution oracle.
    """
    if a <= 0.0:
        raise ValueError("stiffness a must be positive")

    energy = EnergyFunctional(
        dim=1,
        eval_fn=lambda t, u: 0.5 * a * u[0] ** 2 - u[0] * lam * t,
        differential=lambda t, u: np.array([a * u[0] - lam * t]),
        power=lambda t, u: -lam * u[0],
        hessian=lambda t, u: np.array([[a]]),
        lam=a,
        name="loaded_quadratic")

    def d_eval(u_old: np.ndarray, u_new: np.ndarray) -> float:
        d = float(u_new[0] - u_old[0])
        return 2.0 * abs(d) + d

    dist = QuasiDistance(eval=d_eval, symmetric=False,
                         comparison_metric=lambda x, y: float(abs(y[0] - x[0])))

    def exact_step(t_k: float, u_prev: np.ndarray) -> np.ndarray:
        up = float(u_prev[0])
        cands = [up]
        u_hi = (lam * t_k - 3.0) / a
        if u_hi > up:
            cands.append(u_hi)
        u_lo = (lam * t_k + 1.0) / a
        if u_lo < up:
            cands.append(u_lo)

        def obj(u: float) -> float:
            d = u - up
            return 2.0 * abs(d) + d + 0.5 * a * u * u - u * lam * t_k

        return np.array([min(cands, key=obj)])

    def stable_set(t: float) -> tuple[float, float]:
        return (lam * t - 3.0) / a, (lam * t + 1.0) / a

    C_E, c_E = _toy_power_constants(a, lam, t_max, u_max)
    sys = Eris(dim=1, energy=energy, dist=dist, C_E=C_E, c_E=c_E,
               exact_step=exact_step, stable_set=stable_set, name="eris_toy")

    def oracle(t: float) -> float:
        if lam >= 0.0:
            return max(0.0, (lam * t - 3.0) / a)
        return min(0.0, (lam * t + 1.0) / a)

    return sys, oracle


def eris_toy_unidirectional(a: float, lam: float, t_max: float = 4.0,
                            u_max: float = 10.0) -> tuple[Eris, Callable[[float], float]]:
    """Variant with one-sided dissipation: moves down are forbidden (D = +inf)."""
    if a <= 0.0:
        raise ValueError("stiffness a must be positive")

    energy = EnergyFunctional(
        dim=1,
        eval_fn=lambda t, u: 0.5 * a * u[0] ** 2 - u[0] * lam * t,
        differential=lambda t, u: np.array([a * u[0] - lam * t]),
        power=lambda t, u: -lam * u[0],
        hessian=lambda t, u: np.array([[a]]),
        lam=a,
        name="loaded_quadratic")

    def d_eval(u_old: np.ndarray, u_new: np.ndarray) -> float:
        d = float(u_new[0] - u_old[0])
        return d if d >= 0.0 else math.inf

    dist = QuasiDistance(eval=d_eval, symmetric=False,
                         comparison_metric=lambda x, y: float(abs(y[0] - x[0])))

    def exact_step(t_k: float, u_prev: np.ndarray) -> np.ndarray:
        up = float(u_prev[0])
        u_hi = (lam * t_k - 1.0) / a
        return np.array([max(up, u_hi)])

    C_E, c_E = _toy_power_constants(a, lam, t_max, u_max)
    sys = Eris(dim=1, energy=energy, dist=dist, C_E=C_E, c_E=c_E,
               exact_step=exact_step, name="eris_unidir")

    def oracle(t: float) -> float:
        return max(0.0, (lam * t - 1.0) / a) if lam >= 0.0 else 0.0

    return sys, oracle
