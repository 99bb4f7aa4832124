"""Ready-made gradient systems with closed-form or brute-force oracles.

Systems are addressable by string identifiers through :func:`build` /
:data:`REGISTRY` with a flat parameter map, which is how the scenario runner
instantiates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..energies import EnergyFunctional
from ..mms import GradientSystem, MetricDissipation
from ..potentials import quadratic as _quad_psi
from .allen_cahn import (Grid1D, allen_cahn_system, arithmetic_mean,
                         harmonic_mean, mean_limits_check)
from .misc import (eris_toy, eris_toy_unidirectional, missing_usc_system,
                   polar_gradient_check, usc_axis_recursion, usc_axis_solution)
from .nonsmooth import NonsmoothOracle, nonsmooth_r2_system
from .reaction import ReactionNetwork, default_network, log_mean, reaction_system
from .wasserstein import (JkoGrid, fokker_planck_jko_system, gibbs_state,
                          kantorovich_cell_average, w2_distance, w2_squared)
from .wiggly import (WigglyCellProblem, continuum_cell_value, m0_closed,
                     m1_closed, wiggly_cell_M, wiggly_effective_potential,
                     wiggly_system)

__all__ = [
    "Grid1D", "allen_cahn_system", "arithmetic_mean", "harmonic_mean",
    "mean_limits_check", "eris_toy", "eris_toy_unidirectional",
    "missing_usc_system", "polar_gradient_check", "usc_axis_recursion",
    "usc_axis_solution", "NonsmoothOracle", "nonsmooth_r2_system",
    "ReactionNetwork", "default_network", "log_mean", "reaction_system",
    "JkoGrid", "fokker_planck_jko_system", "gibbs_state", "w2_distance",
    "w2_squared", "kantorovich_cell_average", "WigglyCellProblem",
    "continuum_cell_value", "m0_closed", "m1_closed", "wiggly_cell_M",
    "wiggly_effective_potential", "wiggly_system", "quadratic_system",
    "REGISTRY", "build",
]


def quadratic_system(weight: float = 1.0) -> GradientSystem:
    """1d F(u) = u^2/2 with quadratic dissipation; exact resolvent steps."""
    energy = EnergyFunctional(
        dim=1,
        eval_fn=lambda t, u: 0.5 * float(u[0] * u[0]),
        differential=lambda t, u: np.asarray(u, float).copy(),
        hessian=lambda t, u: np.eye(1),
        lam=1.0 / weight,
        name="quadratic")

    def prox(t_k: float, u_prev: np.ndarray, tau: float):
        u_new = u_prev / (1.0 + tau / weight)
        phi_val = (0.5 * weight / tau * float((u_new[0] - u_prev[0]) ** 2)
                   + 0.5 * float(u_new[0] ** 2))
        return u_new, u_new.copy(), {"phi_value": phi_val, "iterations": 0,
                                     "el_residual": 0.0}

    w = np.array([weight])
    return GradientSystem(
        dim=1, energy=energy,
        dissipation=MetricDissipation(
            dist=lambda a, b: float(abs(float(b[0]) - float(a[0]))) * math.sqrt(weight),
            psi=_quad_psi(), weight=w),
        prox=prox, name="quadratic")


@dataclass(frozen=True)
class ZooEntry:
    kind: str                      # "mms" | "eris" | "check"
    description: str
    build: Callable[..., object]


def _build_reaction(**p):
    rates = p.get("rates", (1.0, 1.0, 1.0))
    return reaction_system(rates=tuple(rates))


def _build_allen_cahn(**p):
    grid = Grid1D(int(p.get("n", 64)), float(p.get("length", 1.0)),
                  p.get("bc", "dirichlet_zero"))
    alpha = float(p.get("alpha", 1.0))
    beta = float(p.get("beta", 1.0))
    m = float(p.get("m", 1.0))
    return allen_cahn_system(grid, a=alpha, b=-beta, B=beta, c=m)


def _build_ac_homog(**p):
    grid = Grid1D(int(p.get("n", 512)), float(p.get("length", 1.0)), "neumann")
    eps = p.get("epsilon", None)
    beta = float(p.get("beta", 1.0))
    if eps is None:
        a_h = harmonic_mean(lambda y: 2.0 + math.sin(2.0 * math.pi * y))
        return allen_cahn_system(grid, a=a_h, b=-beta, B=beta, c=1.0, name="ac_homog")
    return allen_cahn_system(grid, a=lambda y: 2.0 + np.sin(2.0 * math.pi * y),
                             b=lambda y: -beta * np.ones_like(y),
                             B=lambda y: beta * np.ones_like(y),
                             c=lambda y: np.ones_like(y),
                             epsilon=float(eps), name="ac_homog")


def _build_fp_jko(**p):
    grid = JkoGrid(int(p.get("n", 200)), float(p.get("x_min", -4.0)),
                   float(p.get("x_max", 4.0)))
    potential = 0.5 * grid.centers ** 2
    return fokker_planck_jko_system(grid, potential), grid


REGISTRY: dict[str, ZooEntry] = {
    "quadratic": ZooEntry("mms", "1d quadratic energy, exact resolvent steps",
                          lambda **p: quadratic_system(float(p.get("weight", 1.0)))),
    "reaction3": ZooEntry("mms", "three-species mass-action network with entropy/mobility structure",
                          _build_reaction),
    "nonsmooth_r2": ZooEntry("mms", "max-of-coordinates energy in a weighted plane, exact prox",
                             lambda **p: nonsmooth_r2_system(float(p.get("a", 2.0)),
                                                             float(p.get("b", 1.0)))),
    "allen_cahn": ZooEntry("mms", "discretized 1d bistable reaction-diffusion energy",
                           _build_allen_cahn),
    "ac_homog": ZooEntry("mms", "oscillating-coefficient variant and its effective system",
                         _build_ac_homog),
    "fp_jko": ZooEntry("mms", "entropy-driven scheme in the exact 1d transport metric",
                       _build_fp_jko),
    "wiggly": ZooEntry("mms", "rapidly oscillating 1d energy (pinning vs tracking)",
                       lambda **p: wiggly_system(float(p.get("epsilon", 0.01)),
                                                 float(p.get("alpha_exponent", 0.5)))),
    "missing_usc": ZooEntry("mms", "homogeneous-degree energy with scheme-selected limits",
                            lambda **p: missing_usc_system()),
    "eris_toy": ZooEntry("eris", "scalar hysteresis model, closed-form evolution",
                         lambda **p: eris_toy(float(p.get("a", 1.0)),
                                              float(p.get("lam", 2.0)))),
    "eris_unidir": ZooEntry("eris", "one-sided dissipation variant of the hysteresis model",
                            lambda **p: eris_toy_unidirectional(float(p.get("a", 1.0)),
                                                                float(p.get("lam", 2.0)))),
    "polar_check": ZooEntry("check", "gradient consistency under a polar change of coordinates",
                            lambda **p: polar_gradient_check),
    "mean_limits": ZooEntry("check", "oscillating quadratic energies versus mean limits",
                            lambda **p: mean_limits_check),
}


def build(system_id: str, **params):
    """Instantiate a registry system; raises KeyError for unknown ids."""
    entry = REGISTRY[system_id]
    return entry.build(**params)
