"""Mass-action reaction networks with detailed balance.

The relative-entropy energy F(c) = sum_i (c_i log c_i - c_i + 1) together
with the mobility

    K(c) = sum_r k_r LogMean(c^{alpha_r}, c^{beta_r}) gamma_r gamma_r^T,
    gamma_r = alpha_r - beta_r,

reproduces the mass-action right-hand side exactly: -K(c) grad F(c) = R(c),
because LogMean(x, y) (log x - log y) = x - y.  Incremental steps are solved
in the reaction subspace span{gamma_r}, so every conserved quantity of the
stoichiometry is preserved to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..energies import EnergyFunctional
from ..errors import InnerSolveFailed, NonpositiveArgument, NonpositiveConcentration
from ..mms import BanachDissipation, GradientSystem
from ..potentials import onsager_quadratic

__all__ = ["log_mean", "ReactionNetwork", "default_network", "reaction_system"]


def log_mean(r: float, rho: float) -> float:
    """Logarithmic mean (r - rho)/log(r/rho); series fallback near r = rho."""
    if r <= 0.0 or rho <= 0.0:
        raise NonpositiveArgument(f"log mean needs positive arguments, got {(r, rho)}")
    x = r / rho
    if abs(x - 1.0) < 1e-4:
        # Lambda(r, rho) = rho * (x - 1)/log x with log x expanded around 1
        u = x - 1.0
        return rho * (1.0 + u / 2.0 - u * u / 12.0 + u ** 3 / 24.0)
    return (r - rho) / math.log(x)


@dataclass
class ReactionNetwork:
    """Species count plus (rate, alpha, beta) stoichiometry triples."""

    n_species: int
    rates: tuple[float, ...]
    alphas: tuple[tuple[int, ...], ...]
    betas: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if any(k <= 0.0 for k in self.rates):
            raise ValueError("reaction rates must be positive")
        for vec in list(self.alphas) + list(self.betas):
            if len(vec) != self.n_species or any(int(x) != x or x < 0 for x in vec):
                raise ValueError("stoichiometric vectors must be nonnegative integers")

    @property
    def gammas(self) -> np.ndarray:
        return (np.asarray(self.alphas, dtype=float)
                - np.asarray(self.betas, dtype=float))

    def monomial(self, c: np.ndarray, exponents: Sequence[float]) -> float:
        return float(np.prod(np.asarray(c, dtype=float) ** np.asarray(exponents, dtype=float)))

    def mobility(self, c: np.ndarray) -> np.ndarray:
        """K(c), symmetric positive semidefinite on the reaction subspace."""
        c = np.asarray(c, dtype=float)
        if np.any(c <= 0.0):
            raise NonpositiveConcentration(f"concentrations must be positive: {c!r}")
        K = np.zeros((self.n_species, self.n_species))
        for k_r, a, b, g in zip(self.rates, self.alphas, self.betas, self.gammas):
            lam = log_mean(self.monomial(c, a), self.monomial(c, b))
            K += k_r * lam * np.outer(g, g)
        return K

    def mass_action_rhs(self, c: np.ndarray) -> np.ndarray:
        """c_dot = R(c) = -sum_r k_r (c^alpha - c^beta) gamma_r."""
        c = np.asarray(c, dtype=float)
        if np.any(c <= 0.0):
            raise NonpositiveConcentration(f"concentrations must be positive: {c!r}")
        rhs = np.zeros(self.n_species)
        for k_r, a, b, g in zip(self.rates, self.alphas, self.betas, self.gammas):
            rhs -= k_r * (self.monomial(c, a) - self.monomial(c, b)) * g
        return rhs

    def conserved_basis(self) -> np.ndarray:
        """Orthonormal basis of {m : m^T gamma_r = 0 for all r} (rows)."""
        G = self.gammas
        _, s, vt = np.linalg.svd(G)
        rank = int(np.sum(s > 1e-12 * (s[0] if len(s) else 1.0)))
        return vt[rank:]

    def reaction_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of span{gamma_r}."""
        G = self.gammas.T  # columns gamma_r
        q, s, _ = np.linalg.svd(G, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * (s[0] if len(s) else 1.0)))
        return q[:, :rank]


def default_network(k: Sequence[float] = (1.0, 1.0, 1.0)) -> ReactionNetwork:
    """Three reactions on three species chosen so total mass is conserved."""
    return ReactionNetwork(
        n_species=3,
        rates=tuple(float(x) for x in k),
        alphas=((1, 0, 0), (1, 1, 0), (1, 0, 1)),
        betas=((0, 1, 0), (0, 0, 2), (0, 2, 0)))


def _boltzmann(c: np.ndarray) -> float:
    return float(np.sum(c * np.log(c) - c + 1.0))


def reaction_system(net: ReactionNetwork | None = None,
                    rates: Sequence[float] | None = None) -> tuple[GradientSystem, ReactionNetwork]:
    """Entropy/mobility gradient system for the network plus the network itself.

    The returned system freezes K at the pre-step state and solves each
    incremental problem by Newton in the reaction subspace, keeping all
    conserved quantities fixed exactly.
    """
    if net is None:
        net = default_network() if rates is None else default_network(rates)
    n = net.n_species

    energy = EnergyFunctional(
        dim=n,
        eval_fn=lambda t, c: _boltzmann(c),
        differential=lambda t, c: np.log(c),
        hessian=lambda t, c: np.diag(1.0 / c),
        domain_indicator=lambda c: bool(np.all(np.asarray(c) > 0.0)),
        name="relative_entropy")

    B = net.reaction_basis()          # n x r, columns span the moving subspace

    def k_pinv(c: np.ndarray) -> np.ndarray:
        K = net.mobility(c)
        w, q = np.linalg.eigh(K)
        w_inv = np.where(w > 1e-12 * max(w.max(), 1.0), 1.0 / np.maximum(w, 1e-300), 0.0)
        return (q * w_inv) @ q.T

    dissipation = BanachDissipation(onsager_quadratic(
        metric=k_pinv, inverse=net.mobility))

    def stepper(t_k: float, c_prev: np.ndarray, tau: float,
                rng: np.random.Generator, tol: float):
        Kp = k_pinv(c_prev)
        A = B.T @ Kp @ B
        y = np.zeros(B.shape[1])

        def candidate(yv: np.ndarray) -> np.ndarray:
            return c_prev + B @ yv

        def phi(yv: np.ndarray) -> float:
            c = candidate(yv)
            if np.any(c <= 0.0):
                return math.inf
            return float(yv @ A @ yv) / (2.0 * tau) + _boltzmann(c)

        def grad(yv: np.ndarray) -> np.ndarray:
            return A @ yv / tau + B.T @ np.log(candidate(yv))

        f = phi(y)
        gn = math.inf
        scale = 1.0
        for it in range(200):
            g = grad(y)
            c = candidate(y)
            gn = float(np.linalg.norm(g))
            scale = 1.0 + float(np.linalg.norm(np.log(c)))
            if gn <= tol * scale:
                return c, np.log(c), {"phi_value": f, "iterations": it,
                                      "el_residual": gn}
            H = A / tau + B.T @ np.diag(1.0 / c) @ B
            p = -np.linalg.solve(H, g)
            step = 1.0
            for _ in range(60):
                y_new = y + step * p
                f_new = phi(y_new)
                if math.isfinite(f_new) and f_new <= f + 1e-4 * step * float(g @ p) \
                        + 1e-15 * (1.0 + abs(f)):
                    y, f = y_new, f_new
                    break
                step *= 0.5
            else:
                break
        # line search exhausted at rounding level; accept near-stationarity
        if gn <= 1e3 * tol * scale:
            c = candidate(y)
            return c, np.log(c), {"phi_value": f, "iterations": 200, "el_residual": gn}
        raise InnerSolveFailed("reaction incremental Newton did not converge")

    system = GradientSystem(dim=n, energy=energy, dissipation=dissipation,
                            stepper=stepper, name="reaction3")
    return system, net
