"""Inner minimizers for the incremental problems.

The generic path is feasible gradient descent with Armijo backtracking,
upgraded to a damped (Levenberg-style) Newton step whenever a Hessian is
available.  Multi-start wrappers live with the callers; this module only
solves one smooth minimization to first-order stationarity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import NonfiniteObjective

__all__ = ["SolveResult", "minimize_smooth"]


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool


def _armijo(phi: Callable[[np.ndarray], float], x: np.ndarray, fx: float,
            g: np.ndarray, p: np.ndarray, feasible: Callable[[np.ndarray], bool],
            shrink: float = 0.5, c1: float = 1e-4, max_back: int = 60) -> Optional[tuple[np.ndarray, float]]:
    """Backtracking line search along p; also backtracks out of infeasibility."""
    slope = float(g @ p)
    step = 1.0
    for _ in range(max_back):
        cand = x + step * p
        if feasible(cand):
            fc = phi(cand)
            if math.isfinite(fc) and fc <= fx + c1 * step * slope:
                return cand, fc
        step *= shrink
    return None


def minimize_smooth(phi: Callable[[np.ndarray], float],
                    grad: Callable[[np.ndarray], np.ndarray],
                    x0: np.ndarray,
                    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    hess_solve: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
                    feasible: Optional[Callable[[np.ndarray], bool]] = None,
                    tol: float = 1e-9,
                    tol_scale: Optional[Callable[[np.ndarray], float]] = None,
                    max_iter: int = 500) -> SolveResult:
    """Minimize a smooth objective from x0 to gradient norm <= tol * scale.

    ``hess_solve(x, g)`` may be supplied for structured Hessians (banded,
    reduced subspaces); otherwise ``hess`` is factorized densely with a
    Levenberg fallback when the Newton direction is not a descent direction.
    ``tol_scale(x)`` rescales the stopping tolerance, e.g. by 1 + ||xi||.
    """
    feas = feasible or (lambda x: True)
    x = np.asarray(x0, dtype=float).copy()
    if not feas(x):
        return SolveResult(x, math.inf, math.inf, 0, False)
    fx = phi(x)
    if math.isnan(fx):
        raise NonfiniteObjective("objective evaluated to NaN at the start")
    it = 0
    for it in range(1, max_iter + 1):
        g = np.asarray(grad(x), dtype=float)
        gn = float(np.linalg.norm(g))
        scale = tol_scale(x) if tol_scale is not None else 1.0
        if gn <= tol * scale:
            return SolveResult(x, fx, gn, it - 1, True)

        p = None
        if hess_solve is not None:
            try:
                p = -np.asarray(hess_solve(x, g), dtype=float)
            except Exception:
                p = None
        elif hess is not None:
            H = np.asarray(hess(x), dtype=float)
            mu = 0.0
            eye = np.eye(len(x))
            for _ in range(8):
                try:
                    cand = -scipy.linalg.solve(H + mu * eye, g, assume_a="sym")
                except scipy.linalg.LinAlgError:
                    cand = None
                if cand is not None and float(cand @ g) < 0.0:
                    p = cand
                    break
                mu = max(2.0 * mu, 1e-8 * (1.0 + float(np.abs(H).max())))
        if p is None or not np.all(np.isfinite(p)) or float(p @ g) >= 0.0:
            p = -g
        res = _armijo(phi, x, fx, g, p, feas)
        if res is None and not np.array_equal(p, -g):
            res = _armijo(phi, x, fx, g, -g, feas)
        if res is None:
            # no acceptable step: declare convergence only if stationary enough
            return SolveResult(x, fx, gn, it, gn <= 1e3 * tol * scale)
        x, fx = res
    g = np.asarray(grad(x), dtype=float)
    gn = float(np.linalg.norm(g))
    scale = tol_scale(x) if tol_scale is not None else 1.0
    return SolveResult(x, fx, gn, it, gn <= tol * scale)
