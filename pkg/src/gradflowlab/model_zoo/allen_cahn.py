"""Discretized bistable reaction-diffusion energies on a 1d grid.

F(u) = sum_i h [ a/2 ((u_{i+1} - u_i)/h)^2 + b/2 u_i^2 + B/4 u_i^4 ]

with spatially varying (possibly fast-oscillating) coefficients a, b, B and a
quadratic dissipation weighted by c.  The constant-coefficient case a =
alpha, b = -beta, B = beta matches the classical double well beta/4 (u^2-1)^2
up to an additive constant; energies enter all diagnostics through
differences, so the constant is immaterial.  Effective (slow) coefficients
are the harmonic mean for a and arithmetic means for b, B, c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

from ..energies import EnergyFunctional
from ..errors import InnerSolveFailed
from ..mms import GradientSystem, MetricDissipation
from ..potentials import quadratic

__all__ = [
    "Grid1D",
    "allen_cahn_system",
    "harmonic_mean",
    "arithmetic_mean",
    "mean_limits_check",
]

Coefficient = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1d grid on [0, length] with n unknowns.

    ``dirichlet_zero`` grids carry n interior nodes (boundary values pinned
    to zero), ``neumann`` grids carry n cell-centered nodes with no flux
    through the ends.
    """

    n: int
    length: float = 1.0
    bc: str = "dirichlet_zero"

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("grid needs at least 3 nodes")
        if self.bc not in ("dirichlet_zero", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def h(self) -> float:
        return self.length / (self.n + 1) if self.bc == "dirichlet_zero" else self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        if self.bc == "dirichlet_zero":
            return self.h * np.arange(1, self.n + 1)
        return self.h * (np.arange(self.n) + 0.5)

    @property
    def edge_midpoints(self) -> np.ndarray:
        """Locations where the gradient coefficient is sampled."""
        if self.bc == "dirichlet_zero":
            return self.h * (np.arange(self.n + 1) + 0.5)
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


def _sample(coef: Coefficient, x: np.ndarray) -> np.ndarray:
    if callable(coef):
        return np.asarray(coef(x), dtype=float)
    return np.full_like(x, float(coef))


def harmonic_mean(f: Callable[[float], float], tol: float = 1e-12) -> float:
    """Harmonic mean of a 1-periodic coefficient by adaptive quadrature."""
    val, _ = quad(lambda y: 1.0 / f(y), 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return 1.0 / val


def arithmetic_mean(f: Callable[[float], float], tol: float = 1e-12) -> float:
    val, _ = quad(f, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return float(val)


def allen_cahn_system(grid: Grid1D, a: Coefficient, b: Coefficient, B: Coefficient,
                      c: Coefficient, epsilon: Optional[float] = None,
                      name: str = "allen_cahn") -> GradientSystem:
    """Gradient system for c u_t = (a u_x)_x - b u - B u^3 on the grid.

    Pass coefficient callables of the fast variable y together with
    ``epsilon`` to sample a(x/epsilon) etc.; constants are used as given.
    """
    h = grid.h
    xm = grid.edge_midpoints
    xn = grid.nodes
    if epsilon is not None:
        a_e = _sample(a, xm / epsilon)
        b_e = _sample(b, xn / epsilon)
        B_e = _sample(B, xn / epsilon)
        c_e = _sample(c, xn / epsilon)
    else:
        a_e = _sample(a, xm)
        b_e = _sample(b, xn)
        B_e = _sample(B, xn)
        c_e = _sample(c, xn)
    if np.any(a_e <= 0.0) or np.any(B_e < 0.0) or np.any(c_e <= 0.0):
        raise ValueError("need a > 0, B >= 0, c > 0")
    dirichlet = grid.bc == "dirichlet_zero"

    def grad_terms(u: np.ndarray) -> np.ndarray:
        if dirichlet:
            return np.diff(np.concatenate(([0.0], u, [0.0])))
        return np.diff(u)

    def eval_fn(t: float, u: np.ndarray) -> float:
        du = grad_terms(u)
        return float(np.sum(0.5 * a_e * du * du / h)
                     + h * np.sum(0.5 * b_e * u * u + 0.25 * B_e * u ** 4))

    def differential(t: float, u: np.ndarray) -> np.ndarray:
        du = grad_terms(u)
        flux = a_e * du / h
        if dirichlet:
            lap = flux[:-1] - flux[1:]
        else:
            lap = np.concatenate(([0.0], flux)) - np.concatenate((flux, [0.0]))
        return lap + h * (b_e * u + B_e * u ** 3)

    def hess_diagonals(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        main = h * (b_e + 3.0 * B_e * u * u)
        if dirichlet:
            main = main + (a_e[:-1] + a_e[1:]) / h
            off = -a_e[1:-1] / h
        else:
            pad = np.concatenate(([0.0], a_e, [0.0]))
            main = main + (pad[:-1] + pad[1:]) / h
            off = -a_e / h
        return main, off

    def hessian(t: float, u: np.ndarray) -> np.ndarray:
        main, off = hess_diagonals(u)
        return np.diag(main) + np.diag(off, 1) + np.diag(off, -1)

    lam = float(np.min(b_e / c_e))
    energy = EnergyFunctional(dim=grid.n, eval_fn=eval_fn, differential=differential,
                              hessian=hessian, lam=lam, name=name)
    weight = c_e * h

    def stepper(t_k: float, u_prev: np.ndarray, tau: float,
                rng: np.random.Generator, tol: float):
        """Damped Newton with a tridiagonal factorization per iteration."""
        d = np.zeros_like(u_prev)

        def phi(dv: np.ndarray) -> float:
            return 0.5 / tau * float(np.sum(weight * dv * dv)) + eval_fn(t_k, u_prev + dv)

        f = phi(d)
        gn = math.inf
        scale = 1.0
        for it in range(200):
            u = u_prev + d
            gF = differential(t_k, u)
            g = weight * d / tau + gF
            gn = float(np.linalg.norm(g))
            scale = 1.0 + float(np.linalg.norm(gF))
            if gn <= tol * scale:
                return u, gF, {"phi_value": f, "iterations": it, "el_residual": gn}
            main, off = hess_diagonals(u)
            ab = np.zeros((3, grid.n))
            ab[0, 1:] = off
            ab[1] = main + weight / tau
            ab[2, :-1] = off
            p = solve_banded((1, 1), ab, -g)
            if float(p @ g) >= 0.0:
                p = -g
            step = 1.0
            for _ in range(60):
                f_new = phi(d + step * p)
                if math.isfinite(f_new) and f_new <= f + 1e-4 * step * float(g @ p) \
                        + 1e-15 * (1.0 + abs(f)):
                    d, f = d + step * p, f_new
                    break
                step *= 0.5
            else:
                break
        if gn <= 1e3 * tol * scale:
            u = u_prev + d
            return u, differential(t_k, u), {"phi_value": f, "iterations": 200,
                                             "el_residual": gn}
        raise InnerSolveFailed("tridiagonal Newton did not converge")

    def dist(x: np.ndarray, y: np.ndarray) -> float:
        dd = np.asarray(y, float) - np.asarray(x, float)
        return float(np.sqrt(np.sum(weight * dd * dd)))

    return GradientSystem(dim=grid.n, energy=energy,
                          dissipation=MetricDissipation(dist=dist, psi=quadratic(),
                                                        weight=weight),
                          stepper=stepper, name=name)


def mean_limits_check(A: Callable[[float], float], epsilon: float,
                      w_hat: np.ndarray, grid: Grid1D) -> tuple[float, float]:
    """Zeroth-order oscillating quadratic energy versus its strong limit.

    Builds the corrector state w_eps = A(x/eps)^{-1} A_harm w_hat on the grid
    and returns (F_eps(w_eps), F_harm(w_hat)); the two values converge to each
    other as eps -> 0.  Feeding the unmodified w_hat into F_eps instead
    recovers the arithmetic-mean energy (weak limit) in the mean.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = grid.nodes
    h = grid.h
    A_vals = np.array([A(xi / epsilon) for xi in x], dtype=float)
    if np.any(A_vals <= 0.0):
        raise ValueError("coefficient must be uniformly positive")
    A_h = harmonic_mean(A)
    w_eps = A_h / A_vals * np.asarray(w_hat, dtype=float)
    F_eps = 0.5 * h * float(np.sum(A_vals * w_eps * w_eps))
    F_harm = 0.5 * h * float(np.sum(A_h * np.asarray(w_hat) ** 2))
    return F_eps, F_harm
