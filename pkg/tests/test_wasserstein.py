import math

import numpy as np
import pytest

from gradflowlab import model_zoo as zoo
from gradflowlab.energies import eval_energy
from gradflowlab.errors import MassNotNormalized, NegativeDensity
from gradflowlab.mms import run_mms
from gradflowlab.model_zoo.wasserstein import (JkoGrid, _masses, gibbs_state,
                                               kantorovich_cell_average,
                                               w2_distance, w2_squared)


@pytest.fixture
def grid():
    return JkoGrid(50, -4.0, 4.0)


def normalized(rng, grid, n=50):
    z = rng.random(n) + 0.1
    return z / (z.sum() * grid.h)


def test_translation_exact(grid):
    rho = np.zeros(50)
    rho[10:20] = 1.0
    rho /= rho.sum() * grid.h
    for shift in (1, 3, 7):
        assert w2_distance(rho, np.roll(rho, shift), grid) == pytest.approx(
            shift * grid.h, abs=1e-12)


def test_identity_and_symmetry(grid):
    rng = np.random.default_rng(0)
    a, b = normalized(rng, grid), normalized(rng, grid)
    assert w2_distance(a, a, grid) == 0.0
    assert w2_distance(a, b, grid) == pytest.approx(w2_distance(b, a, grid), rel=1e-12)


def test_triangle_inequality(grid):
    rng = np.random.default_rng(1)
    for _ in range(10):
        a, b, c = (normalized(rng, grid) for _ in range(3))
        assert w2_distance(a, c, grid) <= (w2_distance(a, b, grid)
                                           + w2_distance(b, c, grid) + 1e-12)


def test_w2_against_quantile_quadrature(grid):
    # independent oracle: dense numerical quadrature of the quantile integral
    rng = np.random.default_rng(2)
    a, b = normalized(rng, grid), normalized(rng, grid)

    def quantile(rho, s):
        m = rho * grid.h
        cum = np.concatenate(([0.0], np.cumsum(m)))
        cum[-1] = 1.0
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 49)
        return grid.edges[i] + (s - cum[i]) * grid.h / m[i]

    ss = (np.arange(200_000) + 0.5) / 200_000
    brute = np.mean((quantile(a, ss) - quantile(b, ss)) ** 2)
    assert w2_squared(a, b, grid) == pytest.approx(brute, abs=1e-6)


def test_mass_validation(grid):
    with pytest.raises(MassNotNormalized):
        _masses(np.full(50, 1.0), grid)
    with pytest.raises(NegativeDensity):
        _masses(np.full(50, -1.0 / 8.0), grid)


def test_dual_potential_matches_finite_differences(grid):
    rng = np.random.default_rng(3)
    r0, r1 = normalized(rng, grid), normalized(rng, grid)
    g = kantorovich_cell_average(r0, r1, grid)
    m1 = r1 * grid.h
    eps = 1e-7
    fd = np.zeros(50)
    for i in range(50):
        mp = m1.copy()
        mp[i] += eps
        fd[i] = (w2_squared(r0, mp / (mp.sum() * grid.h), grid)
                 - w2_squared(r0, r1, grid)) / eps
    gp = g - float(m1 @ g)
    fdp = fd - float(m1 @ fd)
    assert np.max(np.abs(gp - fdp)) <= 1e-5 * (1.0 + np.max(np.abs(gp)))


def test_gibbs_state_is_discrete_minimizer(grid):
    phi = 0.5 * grid.centers ** 2
    system = zoo.fokker_planck_jko_system(grid, phi)
    rho_g = gibbs_state(grid, phi)
    F_g = eval_energy(system.energy, 0.0, rho_g)
    rng = np.random.default_rng(4)
    for _ in range(20):
        rho = normalized(rng, grid)
        assert eval_energy(system.energy, 0.0, rho) >= F_g - 1e-12


def test_gibbs_fixed_under_stepping(grid):
    phi = 0.5 * grid.centers ** 2
    system = zoo.fokker_planck_jko_system(grid, phi)
    rho_g = gibbs_state(grid, phi)
    moved, _, rec = system.stepper(0.0, rho_g, 0.01, np.random.default_rng(0), 1e-9)
    assert float(np.abs(moved - rho_g).sum() * grid.h) <= 1e-12


def test_jko_run_decays_and_conserves(grid):
    phi = 0.5 * grid.centers ** 2
    system = zoo.fokker_planck_jko_system(grid, phi)
    rho0 = np.full(50, 1.0 / 8.0)
    traj = run_mms(system, rho0, 0.0, 2.0, 100)
    masses = traj.states.sum(axis=1) * grid.h
    assert np.max(np.abs(masses - 1.0)) <= 1e-12
    F = [eval_energy(system.energy, 0.0, s) for s in traj.states]
    assert all(b < a for a, b in zip(F[:-1], F[1:]))
    gap = F[-1] - eval_energy(system.energy, 0.0, gibbs_state(grid, phi))
    assert gap <= 0.05


def test_jko_relative_entropy_drops_toward_gibbs(grid):
    phi = 0.5 * grid.centers ** 2
    system = zoo.fokker_planck_jko_system(grid, phi)
    rho0 = np.zeros(50)
    rho0[5:15] = 1.0
    rho0 /= rho0.sum() * grid.h
    traj = run_mms(system, rho0, 0.0, 2.0, 100)
    rho_g = gibbs_state(grid, phi)
    d_start = w2_distance(traj.states[0], rho_g, grid)
    d_end = w2_distance(traj.states[-1], rho_g, grid)
    # the slowest transport mode contracts like e^{-t} under this potential
    assert d_end < 0.2 * d_start
