import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradflowlab import potentials as pot
from gradflowlab.errors import (ConjugateDiverged, DimensionMismatch,
                                NegativeRate, NotConvex, SingularOnsager)

KINDS = {
    "quadratic": pot.quadratic(),
    "power15": pot.power(1.5),
    "power3": pot.power(3.0),
    "rate_independent": pot.rate_independent(),
    "viscoplastic": pot.viscoplastic(1.0, 2.0),
}


def test_eval_examples():
    assert pot.eval_potential(pot.quadratic(), 2.0) == 2.0
    assert pot.eval_potential(pot.power(3.0), 1.0) == pytest.approx(1.0 / 3.0)
    assert pot.eval_potential(pot.viscoplastic(1.0, 2.0), 2.0) == 6.0
    assert pot.eval_potential(pot.rate_independent(), 1.7) == 1.7


def test_negative_rate_rejected():
    with pytest.raises(NegativeRate):
        pot.eval_potential(pot.quadratic(), -0.5)
    with pytest.raises(NegativeRate):
        pot.quadratic().prime(-1.0)


def test_conjugate_examples():
    assert pot.eval_conjugate(pot.ConjugatePair(pot.power(3.0)), 1.0) == pytest.approx(2.0 / 3.0)
    ri = pot.ConjugatePair(pot.rate_independent())
    assert pot.eval_conjugate(ri, 0.5) == 0.0
    assert pot.eval_conjugate(ri, 2.0) == math.inf
    assert pot.eval_conjugate(pot.ConjugatePair(pot.viscoplastic(1.0, 2.0)), 3.0) == 1.0


def test_power_conjugate_with_scale():
    # sup_r (z r - s r^p / p) has the closed form s^{1-p*} z^{p*}/p*
    psi = pot.power(3.0, scale=2.0)
    z = 1.3
    num = pot.numeric_conjugate(psi, z)
    assert num == pytest.approx(psi.conjugate(z), rel=1e-9)


def test_tabulated_convexity_enforced():
    with pytest.raises(NotConvex):
        pot.tabulated([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.2, 1.21])


def test_tabulated_conjugate_matches_quadratic():
    r = np.linspace(0.0, 10.0, 41)
    tab = pot.tabulated(r, 0.5 * r * r)
    pair = pot.ConjugatePair(tab)
    for z in (0.3, 1.0, 2.5):
        # close to the smooth conjugate up to the interpolation error ...
        assert pot.eval_conjugate(pair, z) == pytest.approx(0.5 * z * z, abs=5e-3)
        # ... and exact (to solver tolerance) for the interpolant itself
        brute = max(z * x - tab(float(x)) for x in np.linspace(0.0, 10.0, 200_001))
        assert pot.eval_conjugate(pair, z) == pytest.approx(brute, abs=1e-8)


def test_conjugate_diverged():
    r = np.linspace(0.0, 2.0, 11)
    tab = pot.tabulated(r, r)          # linear growth, bounded domain
    # force a tiny ceiling so the sup over the domain overflows it
    with pytest.raises(ConjugateDiverged):
        pot.numeric_conjugate(tab, 5.0, r_max=2.0, ceiling=1.0)


def test_fenchel_young_examples():
    pq = pot.ConjugatePair(pot.quadratic())
    assert pot.fenchel_young_gap(pq, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert pot.fenchel_young_gap(pq, 1.0, 0.0) == pytest.approx(0.5)
    vp = pot.ConjugatePair(pot.viscoplastic(1.0, 1.0))
    assert pot.fenchel_young_gap(vp, 0.0, 0.5) == 0.0


@pytest.mark.parametrize("name", sorted(KINDS))
def test_fenchel_young_random(name):
    psi = KINDS[name]
    pair = pot.ConjugatePair(psi)
    rng = np.random.default_rng(12)
    v = rng.uniform(-5.0, 5.0, 10_000)
    xi = rng.uniform(-5.0, 5.0, 10_000)
    gaps = [pot.fenchel_young_gap(pair, float(a), float(b)) for a, b in zip(v, xi)]
    assert min(g for g in gaps if math.isfinite(g)) >= -1e-10


@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0))
@settings(max_examples=60, deadline=None)
def test_fy_property_quadratic(v, xi):
    pair = pot.ConjugatePair(pot.quadratic())
    assert pot.fenchel_young_gap(pair, v, xi) >= -1e-12


@pytest.mark.parametrize("name", ["quadratic", "power15", "power3", "viscoplastic"])
def test_involution_on_log_grid(name):
    psi = KINDS[name]

    def psi_star(z):
        return pot.numeric_conjugate(psi, z, on_diverge="inf")

    for r in np.geomspace(1e-3, 1e2, 15):
        val = pot.numeric_conjugate(psi_star, float(r), on_diverge="inf")
        assert val == pytest.approx(psi(float(r)), abs=1e-8, rel=1e-8)


def test_involution_rate_independent():
    psi = KINDS["rate_independent"]

    def psi_star(z):
        return pot.numeric_conjugate(psi, z, on_diverge="inf")

    for r in np.geomspace(1e-3, 1e2, 10):
        val = pot.numeric_conjugate(psi_star, float(r), on_diverge="inf")
        assert val == pytest.approx(psi(float(r)), abs=1e-8, rel=1e-7)


def test_order_reversal():
    # psi1 <= psi2 pointwise implies psi2* <= psi1*
    psi1 = pot.quadratic(0.5)
    psi2 = pot.quadratic(2.0)
    grid = np.geomspace(1e-2, 1e2, 20)
    assert all(psi1(r) <= psi2(r) for r in grid)
    for z in grid:
        assert psi2.conjugate(z) <= psi1.conjugate(z) + 1e-12


def test_equality_characterization():
    pair = pot.ConjugatePair(pot.quadratic())
    assert pot.check_fenchel_equivalences(pair, 2.0, 2.0, 1e-8) == (True, True, True)
    assert pot.check_fenchel_equivalences(pair, 2.0, 1.0, 1e-8) == (False, False, False)
    ri = pot.ConjugatePair(pot.rate_independent())
    assert pot.check_fenchel_equivalences(ri, 0.0, 0.7, 1e-8) == (True, True, True)


def test_gap_iff_optimality_smooth():
    pair = pot.ConjugatePair(pot.power(3.0))
    rng = np.random.default_rng(5)
    for _ in range(30):
        v = float(rng.uniform(0.1, 2.0))
        xi_opt = pair.primal.prime(v)
        gap_ok, primal_ok, dual_ok = pot.check_fenchel_equivalences(pair, v, xi_opt, 1e-6)
        assert gap_ok and primal_ok and dual_ok
        gap_bad, primal_bad, dual_bad = pot.check_fenchel_equivalences(
            pair, v, xi_opt + 0.5, 1e-6)
        assert not (gap_bad or primal_bad or dual_bad)


def test_dissipation_function_helper():
    # Diss_psi(r) = psi'(r) r; equals p psi for homogeneous kinds
    assert pot.dissipation_function(pot.quadratic(), 2.0) == pytest.approx(4.0)
    assert pot.dissipation_function(pot.power(3.0), 1.5) == pytest.approx(3 * pot.power(3.0)(1.5))


# ---------------------------------------------------------------------------
# vector forms


def test_vector_examples():
    nc = pot.norm_composed(pot.quadratic(), [1.0, 1.0])
    assert pot.eval_dissipation(nc, np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(12.5)
    oq = pot.onsager_quadratic(lambda u: np.diag([2.0, 1.0]))
    assert pot.eval_dissipation(oq, np.zeros(2), np.array([1.0, 1.0])) == pytest.approx(1.5)
    sep = pot.separable([pot.quadratic()], lambda u: 2.0 + np.cos(u))
    assert pot.eval_dissipation(sep, np.array([0.0]), np.array([2.0])) == pytest.approx(6.0)


def test_dual_examples():
    oq = pot.onsager_quadratic(lambda u: np.diag([2.0, 1.0]))
    assert pot.eval_dual_dissipation(oq, np.zeros(2), np.array([2.0, 1.0])) == pytest.approx(1.5)
    nri = pot.norm_composed(pot.rate_independent(), [1.0])
    assert pot.eval_dual_dissipation(nri, np.zeros(1), np.array([0.3])) == 0.0
    nq = pot.norm_composed(pot.quadratic())
    assert pot.eval_dual_dissipation(nq, np.zeros(2), np.zeros(2)) == 0.0


def test_dimension_mismatch():
    nc = pot.norm_composed(pot.quadratic(), [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        pot.eval_dissipation(nc, np.zeros(2), np.zeros(3))


def test_singular_onsager():
    oq = pot.onsager_quadratic(lambda u: np.zeros((2, 2)))
    with pytest.raises(SingularOnsager):
        pot.eval_dual_dissipation(oq, np.zeros(2), np.array([1.0, 0.0]))


def test_nonnegativity_and_zero_at_rest():
    rng = np.random.default_rng(8)
    forms = [
        pot.norm_composed(pot.power(1.5), [2.0, 0.5]),
        pot.onsager_quadratic(lambda u: np.diag([1.0 + u[0] ** 2, 2.0])),
        pot.separable([pot.quadratic(), pot.rate_independent()],
                      lambda u: np.array([2.0 + math.cos(u[0]), 1.0])),
    ]
    for R in forms:
        for _ in range(50):
            u = rng.standard_normal(2)
            v = rng.standard_normal(2)
            assert pot.eval_dissipation(R, u, np.zeros(2)) == 0.0
            assert pot.eval_dissipation(R, u, v) >= 0.0


def test_dual_matches_bruteforce_grid():
    rng = np.random.default_rng(9)
    R = pot.norm_composed(pot.quadratic(), [2.0, 0.5])

    def brute_sup(u, xi):
        def val(a, b):
            return float(xi @ np.array([a, b]) - pot.eval_dissipation(R, u, np.array([a, b])))

        grid = np.linspace(-30.0, 30.0, 121)
        best = max(((a, b) for a in grid for b in grid), key=lambda p: val(*p))
        fine_a = np.linspace(best[0] - 0.5, best[0] + 0.5, 2001)
        fine_b = np.linspace(best[1] - 0.5, best[1] + 0.5, 2001)
        best_a = max(fine_a, key=lambda a: val(a, best[1]))
        best_b = max(fine_b, key=lambda b: val(best_a, b))
        best_a = max(fine_a, key=lambda a: val(a, best_b))
        return val(best_a, best_b)

    for _ in range(3):
        u = rng.standard_normal(2)
        xi = rng.uniform(-1.5, 1.5, 2)
        assert pot.eval_dual_dissipation(R, u, xi) == pytest.approx(brute_sup(u, xi),
                                                                    abs=1e-6)
