import math

import numpy as np
import pytest

from gradflowlab import model_zoo as zoo
from gradflowlab.energies import eval_energy
from gradflowlab.errors import NonpositiveArgument, NonpositiveConcentration, OriginSample
from gradflowlab.mms import run_mms


# -- logarithmic mean and reaction networks ---------------------------------

def test_log_mean():
    assert zoo.log_mean(1.0, 1.0) == 1.0
    assert zoo.log_mean(4.0, 1.0) == pytest.approx(3.0 / math.log(4.0))
    rng = np.random.default_rng(0)
    for _ in range(50):
        r, rho = rng.uniform(0.1, 10.0, 2)
        assert zoo.log_mean(r, rho) == pytest.approx(zoo.log_mean(rho, r), rel=1e-12)
    # series fallback is smooth across the switch
    assert zoo.log_mean(1.0 + 5e-5, 1.0) == pytest.approx(
        (5e-5) / math.log(1.0 + 5e-5), rel=1e-10)
    with pytest.raises(NonpositiveArgument):
        zoo.log_mean(-1.0, 2.0)


def test_reaction_identity_and_conservation():
    system, net = zoo.reaction_system()
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = rng.uniform(0.1, 10.0, 3)
        K = net.mobility(c)
        assert np.allclose(K, K.T)
        assert np.linalg.eigvalsh(K).min() >= -1e-12
        rhs = net.mass_action_rhs(c)
        assert np.linalg.norm(-K @ np.log(c) - rhs) <= 1e-12 * (1.0 + np.linalg.norm(rhs))
        assert abs(rhs.sum()) <= 1e-12 * (1.0 + np.linalg.norm(rhs))
    # conserved directions annihilate the mobility
    m = net.conserved_basis()
    c = rng.uniform(0.5, 2.0, 3)
    assert np.linalg.norm(m @ net.mobility(c)) <= 1e-12


def test_reaction_spot_example():
    net1 = zoo.ReactionNetwork(3, (1.0,), ((1, 0, 0),), ((0, 1, 0),))
    val = -net1.mobility(np.array([2.0, 1.0, 1.0])) @ np.log(np.array([2.0, 1.0, 1.0]))
    assert np.allclose(val, [-1.0, 1.0, 0.0], atol=1e-14)
    c_eq = np.ones(3)
    assert np.allclose(net1.mass_action_rhs(c_eq), 0.0)
    with pytest.raises(NonpositiveConcentration):
        net1.mobility(np.array([0.0, 1.0, 1.0]))


def test_reaction_flow_decays_to_equilibrium():
    system, _ = zoo.reaction_system()
    traj = run_mms(system, np.array([2.0, 0.5, 0.5]), 0.0, 10.0, 400)
    assert np.max(np.abs(traj.states.sum(axis=1) - 3.0)) <= 1e-10
    assert np.max(np.abs(traj.states[-1] - 1.0)) <= 1e-6
    F = [eval_energy(system.energy, 0.0, s) for s in traj.states]
    assert all(b <= a + 1e-14 for a, b in zip(F[:-1], F[1:]))


# -- nonsmooth plane ---------------------------------------------------------

def test_nonsmooth_oracle_values():
    _, Oracle = zoo.nonsmooth_r2_system(2.0, 1.0)
    orc = Oracle(2.0, 1.0, np.array([3.0, 1.0]))
    assert orc.t1 == pytest.approx(1.0)
    assert orc.t2 == pytest.approx(2.5)
    assert np.allclose(orc(2.0), [1.0 / 3.0, 1.0 / 3.0])
    assert np.allclose(orc(3.0), [0.0, 0.0])


def test_nonsmooth_mms_tracks_oracle():
    system, Oracle = zoo.nonsmooth_r2_system(2.0, 1.0)
    orc = Oracle(2.0, 1.0, np.array([3.0, 1.0]))
    traj = run_mms(system, np.array([3.0, 1.0]), 0.0, 2.6, 130)
    for k, t in enumerate(traj.times):
        assert np.allclose(traj.states[k], orc(float(t)), atol=1e-12)
    # forces live in the subdifferential: |xi_1| + |xi_2| <= 1
    for xi in traj.forces:
        assert abs(xi[0]) + abs(xi[1]) <= 1.0 + 1e-12


def test_nonsmooth_reflection_symmetry():
    sys_ab, Oa = zoo.nonsmooth_r2_system(2.0, 1.0)
    sys_ba, Ob = zoo.nonsmooth_r2_system(1.0, 2.0)
    ta = run_mms(sys_ab, np.array([3.0, 1.0]), 0.0, 2.0, 40)
    tb = run_mms(sys_ba, np.array([1.0, 3.0]), 0.0, 2.0, 40)
    assert np.allclose(ta.states, tb.states[:, ::-1], atol=1e-12)


def test_nonsmooth_zero_start_stays():
    system, _ = zoo.nonsmooth_r2_system(2.0, 1.0)
    traj = run_mms(system, np.zeros(2), 0.0, 1.0, 10)
    assert np.all(traj.states == 0.0)


# -- bistable chain ----------------------------------------------------------

def test_allen_cahn_convex_case_decays():
    grid = zoo.Grid1D(16, 1.0, "dirichlet_zero")
    system = zoo.allen_cahn_system(grid, 1.0, 0.0, 0.0, 1.0)   # pure Dirichlet energy
    rng = np.random.default_rng(4)
    traj = run_mms(system, rng.uniform(-1, 1, 16), 0.0, 0.5, 25)
    norms = np.linalg.norm(traj.states, axis=1)
    assert all(b <= a + 1e-12 for a, b in zip(norms[:-1], norms[1:]))


def test_allen_cahn_lambda_declaration():
    grid = zoo.Grid1D(8, 1.0, "dirichlet_zero")
    system = zoo.allen_cahn_system(grid, 1.0, -2.0, 2.0, 4.0)
    assert system.energy.lam == pytest.approx(-0.5)


def test_homogenized_coefficients():
    a_h = zoo.harmonic_mean(lambda y: 2.0 + math.sin(2.0 * math.pi * y))
    assert a_h == pytest.approx(math.sqrt(3.0), abs=1e-10)
    c_a = zoo.arithmetic_mean(lambda y: 2.0 + math.cos(2.0 * math.pi * y))
    assert c_a == pytest.approx(2.0, abs=1e-12)


def test_mean_limits_check():
    grid = zoo.Grid1D(1024, 1.0, "neumann")
    A = lambda y: 2.0 + math.sin(2.0 * math.pi * y)
    # constant coefficient: recovery is exact
    F_eps, F_harm = zoo.mean_limits_check(lambda y: 3.0, 0.1, np.ones(1024), grid)
    assert F_eps == pytest.approx(F_harm, rel=1e-12)
    # slow modulation: the corrector gap shrinks as the oscillation speeds up
    w_hat = 1.0 + 0.5 * grid.nodes
    gaps = []
    for eps in (1.0 / 16.0, 1.0 / 64.0):
        F_eps, F_harm = zoo.mean_limits_check(A, eps, w_hat, grid)
        gaps.append(abs(F_eps - F_harm))
    assert gaps[1] <= gaps[0] / 2.0
    # unmodified states see the arithmetic mean (weak limit control)
    A_vals = np.array([A(x / (1.0 / 64.0)) for x in grid.nodes])
    F_weak = 0.5 * grid.h * float(np.sum(A_vals))
    assert F_weak == pytest.approx(0.5 * zoo.arithmetic_mean(A), rel=1e-3)


# -- oscillating 1d energy ---------------------------------------------------

def test_wiggly_pinning():
    system, oracle = zoo.wiggly_system(0.01, 0.5)
    assert oracle["pinned"]
    traj = run_mms(system, np.array([1.0]), 0.0, 2.0, 1000)
    assert np.max(np.abs(traj.states[:, 0] - 1.0)) <= oracle["pinning_radius"]


def test_wiggly_tracking():
    system, oracle = zoo.wiggly_system(0.01, 2.0)
    traj = run_mms(system, np.array([1.0]), 0.0, 1.0, 500)
    assert abs(traj.states[-1, 0] - math.exp(-1.0)) <= 0.05
    # from the origin the state stays within O(eps)
    traj0 = run_mms(system, np.array([0.0]), 0.0, 1.0, 100)
    assert np.max(np.abs(traj0.states)) <= 0.01


def test_cell_value_against_continuum():
    cp = zoo.WigglyCellProblem(1.0, m=128)
    for (v, xi) in ((1.0, 0.0), (0.5, 1.0), (1.0, math.sqrt(2.0)), (2.0, -2.0)):
        disc = zoo.wiggly_cell_M(cp, v, xi, n_starts=2)
        cont = zoo.continuum_cell_value(1.0, v, xi)
        assert disc >= cont - 1e-9          # broken-line value bounds from above
        assert disc == pytest.approx(cont, abs=5e-4)


def test_cell_symmetries():
    cp = zoo.WigglyCellProblem(1.0, m=128)
    for (v, xi) in ((0.7, 0.4), (1.3, 1.1)):
        m = zoo.wiggly_cell_M(cp, v, xi, n_starts=2)
        assert zoo.wiggly_cell_M(cp, -v, xi, n_starts=2) == pytest.approx(m, abs=1e-6)
        assert zoo.wiggly_cell_M(cp, v, -xi, n_starts=2) == pytest.approx(m, abs=1e-6)


def test_m0_resolution_of_printed_formula():
    # the zero-velocity value vanishes exactly on |xi| <= A and grows
    # quadratically outside; this is the max reading, not the min reading
    for xi in (0.0, 0.5, 0.99):
        assert zoo.continuum_cell_value(1.0, 0.0, xi) <= 1e-8
        assert zoo.m0_closed(xi, 1.0) == 0.0
    for xi in (1.5, 2.0, 3.0):
        assert zoo.continuum_cell_value(1.0, 0.0, xi) == pytest.approx(
            0.5 * (abs(xi) - 1.0) ** 2, abs=1e-6)
        assert zoo.m0_closed(xi, 1.0) == pytest.approx(0.5 * (abs(xi) - 1.0) ** 2)


def test_m1_quadrature_vs_analytic_branch():
    for xi in (0.0, 0.5, 0.9):
        quad_val = zoo.m1_closed(xi, 1.0)
        from gradflowlab.model_zoo.wiggly import m1_closed_inner_branch
        assert quad_val == pytest.approx(m1_closed_inner_branch(xi, 1.0), abs=1e-9)
    assert zoo.m1_closed(0.0, 1.0) == pytest.approx(2.0 / math.pi, abs=1e-10)


def test_m1_slope_brute_force():
    cp = zoo.WigglyCellProblem(1.0, m=256)
    for xi in (0.0, 0.5, 2.0):
        m_a = zoo.wiggly_cell_M(cp, 0.05, xi, n_starts=2)
        m_b = zoo.wiggly_cell_M(cp, 0.10, xi, n_starts=2)
        slope = (m_b - m_a) / 0.05
        assert slope == pytest.approx(zoo.m1_closed(xi, 1.0), rel=0.01)


def test_effective_velocity_potential():
    cp = zoo.WigglyCellProblem(1.0, m=128)
    phi_prime = lambda u: u
    assert zoo.wiggly_effective_potential(cp, 0.3, 0.0, phi_prime) == 0.0
    r_pos = zoo.wiggly_effective_potential(cp, 0.3, 0.7, phi_prime)
    r_neg = zoo.wiggly_effective_potential(cp, 0.3, -0.7, phi_prime)
    assert r_pos >= 0.0
    assert r_pos == pytest.approx(r_neg, abs=1e-6)
    # convex on a sampled velocity grid
    vs = np.linspace(-2.0, 2.0, 9)
    vals = [zoo.wiggly_effective_potential(cp, 0.3, float(v), phi_prime) for v in vs]
    for i in range(1, len(vs) - 1):
        assert vals[i] <= 0.5 * (vals[i - 1] + vals[i + 1]) + 1e-6


def test_effective_potential_representation():
    # M(v, xi) = R(v) + R*(-xi) with R* by numeric conjugation over a v-grid.
    # Algebraically the residual equals min_w [M(w, xi) + xi w], the touching
    # gap of the lower bound, so the conjugation grid is refined around the
    # coarse minimizer of that expression.
    cp = zoo.WigglyCellProblem(1.0, m=256)
    u, v = 1.2, 0.8
    xi = float(u)                              # phi(u) = u^2/2
    m0 = zoo.wiggly_cell_M(cp, 0.0, xi, n_starts=2)

    def m_of(w: float) -> float:
        return zoo.wiggly_cell_M(cp, w, xi, n_starts=2)

    coarse = np.linspace(-3.0, 3.0, 13)
    touch = {float(w): m_of(float(w)) + xi * float(w) for w in coarse}
    for width in (0.5, 0.1):
        w0 = min(touch, key=touch.get)
        fine = np.linspace(w0 - width, w0 + width, 11)
        touch.update({float(w): m_of(float(w)) + xi * float(w) for w in fine})
    r_star = m0 - min(touch.values())          # sup_w (-xi w - R(w))
    lhs = m_of(v)
    rhs = (m_of(v) - m0) + r_star
    assert lhs == pytest.approx(rhs, abs=1e-4)


# -- remaining systems -------------------------------------------------------

def test_polar_gradient_check():
    samples = np.array([[1.0, math.pi / 2], [0.5, 0.2], [2.0, 1.1], [1.3, -0.7]])
    assert zoo.polar_gradient_check(samples, a=1.0) <= 1e-8
    assert zoo.polar_gradient_check(samples, a=0.0) <= 1e-8
    # radially symmetric energy: vanishing angular component
    f = lambda u: 0.5 * float(u @ u)
    g = lambda u: np.asarray(u, float)
    assert zoo.polar_gradient_check(samples, f=f, grad_f=g) <= 1e-8
    with pytest.raises(OriginSample):
        zoo.polar_gradient_check(np.array([[0.0, 0.0]]))


def test_polar_displayed_value():
    # polar gradient of the quartic energy at (r, phi) = (1, pi/2), a = 1
    r, phi, a = 1.0, math.pi / 2, 1.0
    grad_polar = np.array([r + a * r ** 3 * math.sin(phi) ** 4,
                           a * r ** 2 * math.sin(phi) ** 3 * math.cos(phi)])
    assert np.allclose(grad_polar, [2.0, 0.0], atol=1e-14)


def test_missing_usc_axis_behavior():
    system = zoo.missing_usc_system()
    tau = 0.05
    traj = run_mms(system, np.array([1.0, 0.0]), 0.0, 2.0, 40)
    # axis is invariant and the recursion is exact
    u = 1.0
    for k in range(1, len(traj.times)):
        u = zoo.usc_axis_recursion(u, tau)
        assert traj.states[k][1] == pytest.approx(0.0, abs=1e-9)
        assert traj.states[k][0] == pytest.approx(u, abs=1e-7)
    # scheme limit tracks the nonnegative branch, through the stop and beyond
    fine = run_mms(system, np.array([1.0, 0.0]), 0.0, 2.0, 800)
    for k, t in enumerate(fine.times):
        assert fine.states[k][0] == pytest.approx(zoo.usc_axis_solution(float(t)),
                                                  abs=2e-2)
    assert fine.states[-1][0] <= 1e-3          # stays at rest after the stop


def test_missing_usc_zero_fixed():
    system = zoo.missing_usc_system()
    u, _, _ = __import__("gradflowlab.mms", fromlist=["mms_step"]).mms_step(
        system, np.zeros(2), 0.0, 0.1)
    assert np.allclose(u, 0.0, atol=1e-9)


def test_registry_build():
    assert set(zoo.REGISTRY) >= {"reaction3", "nonsmooth_r2", "allen_cahn", "ac_homog",
                                 "fp_jko", "wiggly", "missing_usc", "eris_toy",
                                 "polar_check", "mean_limits"}
    system = zoo.build("quadratic")
    assert system.dim == 1
    with pytest.raises(KeyError):
        zoo.build("no_such_system")
