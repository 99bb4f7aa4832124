"""Acceptance suite: the package's exit criteria, one callable per criterion.

Each criterion returns a result record with the measured values, so both the
command-line ``self-test`` verb and the pytest acceptance module run exactly
the same checks at the stated tolerances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import diagnostics as dg
from . import evi as evi_mod
from . import model_zoo as zoo
from . import potentials as pot
from . import rate_independent as ri
from .energies import eval_energy
from .mms import GradientSystem, Trajectory, interpolate, run_mms, run_mms_partition


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        keys = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in sorted(self.details.items()))
        return f"[{status}] {self.cid:2d} {self.name}: {keys}"


# ---------------------------------------------------------------------------
# shared canonical runs


def _canonical_zoo_runs(taus=(1e-1, 1e-2, 1e-3)) -> dict:
    """Desk-scale MMS runs per zoo system at several step sizes."""
    runs: dict[str, dict] = {}

    def add(name: str, make_sys: Callable[[], GradientSystem], u0, T: float,
            tol: float = 1e-12):
        system = make_sys()
        per_tau = {}
        for tau in taus:
            N = max(int(round(T / tau)), 1)
            per_tau[tau] = run_mms(system, np.asarray(u0, dtype=float), 0.0, T, N,
                                   tol=tol)
        runs[name] = {"system": system, "trajectories": per_tau}

    add("quadratic", lambda: zoo.quadratic_system(), [1.0], 1.0)
    add("nonsmooth_r2", lambda: zoo.nonsmooth_r2_system(2.0, 1.0)[0], [3.0, 1.0], 2.6)
    grid = zoo.Grid1D(16, 1.0, "dirichlet_zero")
    # well-prepared (smooth, boundary-compatible) data; rough data creates an
    # initial layer that caps the observable refinement order
    u0_ac = 0.5 * np.sin(math.pi * grid.nodes) + 0.2 * np.sin(2.0 * math.pi * grid.nodes)
    add("allen_cahn", lambda: zoo.allen_cahn_system(grid, 1.0, -1.0, 1.0, 1.0),
        u0_ac, 0.5)
    add("reaction3", lambda: zoo.reaction_system()[0], [2.0, 0.5, 0.5], 2.0)
    add("wiggly_smooth", lambda: zoo.wiggly_system(0.01, 2.0)[0], [1.0], 1.0)
    add("missing_usc", lambda: zoo.missing_usc_system(), [1.0, 0.0], 1.0)
    return runs


def _jko_small_runs(taus=(1e-1, 1e-2, 1e-3)) -> dict:
    grid = zoo.JkoGrid(40, -4.0, 4.0)
    system = zoo.fokker_planck_jko_system(grid, 0.5 * grid.centers ** 2)
    rho0 = np.full(40, 1.0 / 8.0)
    per_tau = {}
    T = 0.2
    for tau in taus:
        N = max(int(round(T / tau)), 1)
        per_tau[tau] = run_mms(system, rho0, 0.0, T, N)
    return {"system": system, "trajectories": per_tau, "grid": grid}


def _pathwise_lambda(system: GradientSystem, traj: Trajectory) -> float:
    """Declared convexity modulus, or a pathwise Hessian estimate if unknown."""
    lam = system.energy.lam
    if math.isfinite(lam):
        return lam
    if system.energy.hessian is None:
        return 0.0
    lam_est = math.inf
    for k in range(len(traj.times)):
        H = system.energy.hessian(float(traj.times[k]), traj.states[k])
        if H is None:
            continue
        geo_w = None
        if hasattr(system.dissipation, "weight") and system.dissipation.weight is not None:
            geo_w = np.asarray(system.dissipation.weight, dtype=float)
        W = np.diag(geo_w) if geo_w is not None else np.eye(len(traj.states[k]))
        vals = np.linalg.eigvalsh(np.linalg.solve(W, np.asarray(H, dtype=float)))
        lam_est = min(lam_est, float(vals.min()))
    return lam_est if math.isfinite(lam_est) else 0.0


def _discrete_edi_residuals(system: GradientSystem, traj: Trajectory,
                            lam: float) -> np.ndarray:
    """Per-step discrete balance residuals with an explicit modulus."""
    saved = system.energy.lam
    system.energy.lam = lam
    try:
        return dg.discrete_edi_check(system, traj)
    finally:
        system.energy.lam = saved


def _jko_substituted_edi(system: GradientSystem, traj: Trajectory) -> float:
    """drop - sum_k D_k^2 / tau_k  (scheme inequality for convex energies)."""
    total = 0.0
    for k, rec in enumerate(traj.step_records, start=1):
        tau = float(traj.times[k] - traj.times[k - 1])
        total += rec.increment_norm ** 2 / tau
    drop = (eval_energy(system.energy, float(traj.times[0]), traj.states[0])
            - eval_energy(system.energy, float(traj.times[-1]), traj.states[-1]))
    return float(drop - total)


def _order_fit(taus, errors) -> Optional[float]:
    es = [(t, e) for t, e in zip(taus, errors) if e > 1e-13]
    if len(es) < 2:
        return None  # residuals at rounding level: limit attained exactly
    xs = np.log([t for t, _ in es])
    ys = np.log([e for _, e in es])
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# criteria


def criterion_1_duality() -> CriterionResult:
    """Fenchel-Young positivity, conjugation involution, viscoplastic value."""
    rng = np.random.default_rng(0)
    kinds = {
        "quadratic": pot.quadratic(),
        "power_1.5": pot.power(1.5),
        "power_3": pot.power(3.0),
        "rate_independent": pot.rate_independent(),
        "viscoplastic": pot.viscoplastic(1.0, 2.0),
        "tabulated": pot.tabulated([0.0, 0.5, 1.0, 2.0, 4.0],
                                   [0.0, 0.15, 0.6, 2.6, 11.0]),
    }
    worst_gap = math.inf
    for psi in kinds.values():
        pair = pot.ConjugatePair(psi)
        vs = rng.uniform(-3.0, 3.0, 10_000)
        xis = rng.uniform(-3.0, 3.0, 10_000)
        for v, xi in zip(vs, xis):
            if psi.kind == "tabulated" and abs(v) > psi.r_max:
                continue
            g = pot.fenchel_young_gap(pair, float(v), float(xi))
            if math.isfinite(g):
                worst_gap = min(worst_gap, g)
    inv_worst = 0.0
    r_grid = np.geomspace(1e-3, 1e3, 25)
    for name, psi in kinds.items():
        if psi.kind == "tabulated":
            continue
        def psi_star(z, _psi=psi):
            return pot.numeric_conjugate(_psi, z, on_diverge="inf")
        for r in r_grid:
            if psi.kind == "power" and psi.p == 3.0 and r > 1e2:
                continue  # conjugate exceeds the divergence ceiling there
            val = pot.numeric_conjugate(psi_star, float(r), on_diverge="inf")
            inv_worst = max(inv_worst, abs(val - psi(float(r))) / (1.0 + abs(psi(float(r)))))
    vp = pot.viscoplastic(1.0, 2.0)
    visc_exact = vp.conjugate(3.0)
    passed = (worst_gap >= -1e-10 and inv_worst <= 1e-8 and visc_exact == 1.0)
    return CriterionResult(1, "duality suite", passed,
                           {"worst_fy_gap": worst_gap, "involution_err": inv_worst,
                            "viscoplastic_conj_3": visc_exact})


def criterion_2_nonsmooth_oracle() -> CriterionResult:
    """Two-phase plane flow: interpolant error, tau-refinement, kink times."""
    system, Oracle = zoo.nonsmooth_r2_system(2.0, 1.0)
    oracle = Oracle(2.0, 1.0, np.array([3.0, 1.0]))
    T = 2.6
    errors = {}
    kink_ok = True
    for tau in (1e-1, 1e-2, 1e-3):
        N = int(round(T / tau))
        traj = run_mms(system, np.array([3.0, 1.0]), 0.0, T, N)
        fine = np.linspace(0.0, T, 10 * N + 1)
        err = max(float(np.max(np.abs(interpolate(traj, "affine", float(t)) - oracle(float(t)))))
                  for t in fine)
        errors[tau] = err
        t1_detect = next(float(t) for k, t in enumerate(traj.times)
                         if abs(traj.states[k][0] - traj.states[k][1]) < 1e-9)
        t2_detect = next(float(t) for k, t in enumerate(traj.times)
                         if np.all(np.abs(traj.states[k]) < 1e-12))
        kink_ok = kink_ok and abs(t1_detect - 1.0) <= 2 * tau and abs(t2_detect - 2.5) <= 2 * tau
    taus = sorted(errors, reverse=True)
    decreasing = all(errors[a] > errors[b] for a, b in zip(taus[:-1], taus[1:]))
    # the registered exact incremental solve reproduces the closed form to
    # rounding at every step size, in which case refinement cannot decrease
    # the error further and the limit is already attained
    limit_attained = all(e <= 1e-10 for e in errors.values())
    passed = errors[1e-3] <= 0.05 and (decreasing or limit_attained) and kink_ok
    return CriterionResult(2, "nonsmooth plane oracle", passed,
                           {"err_1e-3": errors[1e-3],
                            "refinement": "decreasing" if decreasing else
                            ("exact" if limit_attained else "violated"),
                            "kinks_within_2tau": kink_ok})


def criterion_3_contractivity() -> CriterionResult:
    """Bistable chain: distance growth bounded by the convexity modulus."""
    grid = zoo.Grid1D(64, 1.0, "dirichlet_zero")
    system = zoo.allen_cahn_system(grid, 1.0, -1.0, 1.0, 1.0)
    rng = np.random.default_rng(3)
    u0 = rng.uniform(-1.0, 1.0, 64)
    v0 = rng.uniform(-1.0, 1.0, 64)
    ta = run_mms(system, u0, 0.0, 0.5, 50)
    tb = run_mms(system, v0, 0.0, 0.5, 50, seed=1)
    ratio = evi_mod.contractivity_check(ta, tb, lam=-1.0, sys=system)
    passed = ratio <= 1.0 + 1e-6
    return CriterionResult(3, "contractivity of the bistable chain", passed,
                           {"worst_ratio": ratio})


def criterion_4_reaction() -> CriterionResult:
    """Mobility identity, conservation along the scheme, decay to equilibrium."""
    system, net = zoo.reaction_system()
    rng = np.random.default_rng(4)
    worst_identity = 0.0
    for _ in range(100):
        c = rng.uniform(0.1, 10.0, 3)
        lhs = -net.mobility(c) @ np.log(c)
        rhs = net.mass_action_rhs(c)
        worst_identity = max(worst_identity,
                             float(np.linalg.norm(lhs - rhs)) / (1.0 + float(np.linalg.norm(rhs))))
    c0 = np.array([2.0, 0.5, 0.5])
    traj = run_mms(system, c0, 0.0, 10.0, 500)
    mass_err = float(np.max(np.abs(traj.states.sum(axis=1) - c0.sum())))
    F = [eval_energy(system.energy, 0.0, s) for s in traj.states]
    eq_err = float(np.max(np.abs(traj.states[-1] - 1.0)))
    decreasing = all(b <= a + 1e-14 * (1.0 + abs(a)) for a, b in zip(F[:-1], F[1:]))
    strictly_until_eq = all(b < a for a, b in zip(F[:-1], F[1:]) if a - F[-1] > 1e-10)
    passed = (worst_identity <= 1e-12 and mass_err <= 1e-10 and decreasing
              and strictly_until_eq and eq_err <= 1e-6)
    return CriterionResult(4, "reaction network structure", passed,
                           {"identity": worst_identity, "mass_err": mass_err,
                            "equilibrium_err": eq_err, "strict_decay": strictly_until_eq})


def criterion_5_edb(runs: Optional[dict] = None, jko: Optional[dict] = None) -> CriterionResult:
    """Balance residuals: exact-flow accuracy, scheme inequality, tau-order."""
    quad = zoo.quadratic_system()
    N = 1000
    ts = np.linspace(0.0, 1.0, N + 1)
    exact = Trajectory(times=ts, states=np.exp(-ts)[:, None])
    rep = dg.edb_report(quad, exact, 0.0, 1.0, quad_nodes=10 * N)
    exact_ok = abs(rep.residual) <= 1e-5

    runs = runs or _canonical_zoo_runs()
    jko = jko or _jko_small_runs()
    details: dict = {"exact_flow_residual": rep.residual}
    all_ok = exact_ok
    for name, entry in runs.items():
        system = entry["system"]
        gaps = []
        for tau, traj in sorted(entry["trajectories"].items(), reverse=True):
            r = dg.edb_report(system, traj, *traj.span, quad_nodes=4 * len(traj.times))
            lam = _pathwise_lambda(system, traj)
            res = _discrete_edi_residuals(system, traj, lam)
            # the per-step balance gap is nonnegative and vanishes at first
            # order; the raw balance residual differs from it only by the
            # explicit modulus correction
            gaps.append((tau, float(res.sum())))
            scale = 1.0 + abs(r.rate_integral) + abs(r.slope_integral)
            if res.min() < -1e-9 * scale:
                all_ok = False
                details[f"{name}_edi_min"] = float(res.min())
        order = _order_fit([t for t, _ in gaps], [abs(e) for _, e in gaps])
        details[f"{name}_order"] = order if order is not None else "exact"
        if order is not None and order < 0.8:
            all_ok = False
    # transport-metric runs: substituted scheme inequality and its refinement
    jres = []
    for tau, traj in sorted(jko["trajectories"].items(), reverse=True):
        val = _jko_substituted_edi(jko["system"], traj)
        jres.append((tau, val))
        if val < -1e-6:
            all_ok = False
    jorder = _order_fit([t for t, _ in jres], [abs(e) for _, e in jres])
    details["fp_jko_order"] = jorder if jorder is not None else "exact"
    if jorder is not None and jorder < 0.8:
        all_ok = False
    return CriterionResult(5, "energy-dissipation balance", all_ok and exact_ok, details)


def criterion_6_de_giorgi() -> CriterionResult:
    """Sub-step value-function identity and the discrete inequality."""
    quad = zoo.quadratic_system()
    res = dg.de_giorgi_identity_residual(quad, np.array([1.0]), 1.0,
                                         r_nodes=np.geomspace(2.0 ** -30, 1.0, 400))
    identity_ok = abs(res) <= 1e-6
    system, _ = zoo.nonsmooth_r2_system(2.0, 1.0)
    worst_ineq = math.inf
    for u_base in (np.array([3.0, 1.0]), np.array([2.0, 2.0]), np.array([1.0, 0.5])):
        val = dg.discrete_de_giorgi_edi(system, u_base, 0.5,
                                        r_nodes=np.geomspace(0.5 * 2.0 ** -24, 0.5, 200))
        worst_ineq = min(worst_ineq, val)
    passed = identity_ok and worst_ineq >= -1e-6
    return CriterionResult(6, "variational interpolant identity", passed,
                           {"identity_residual": res, "inequality_min": worst_ineq})


def criterion_7_evi() -> CriterionResult:
    """Inequality holds on the smooth model; oscillating model refutes it."""
    quad = zoo.quadratic_system()
    ts = np.linspace(0.0, 2.0, 101)
    traj = Trajectory(times=ts, states=np.exp(-ts)[:, None])
    probes = [np.array([w]) for w in np.linspace(-1.5, 1.5, 10)]
    pairs = [(float(ts[i]), float(ts[j]))
             for i, j in zip(np.arange(0, 80, 4), np.arange(20, 100, 4))]
    rep = evi_mod.evi_probe_report(quad, traj, 1.0, probes, pairs=pairs)
    n_probes = len(rep.residuals)
    smooth_ok = rep.worst_violation >= -1e-8 and n_probes >= 200

    wig, _ = zoo.wiggly_system(0.01, 0.5)
    wtraj = run_mms(wig, np.array([1.0]), 0.0, 2.0, 1000)
    wprobes = [np.array([w]) for w in np.arange(0.0, 1.2001, 0.05)]
    wpairs = [(s, t) for s in (0.0, 0.5, 1.0) for t in (0.5, 1.0, 1.5, 2.0) if t > s]
    found = {}
    for lam in (-10.0, 0.0, 10.0):
        repw = evi_mod.evi_probe_report(wig, wtraj, lam, wprobes, pairs=wpairs)
        found[lam] = repw.worst_violation
    control_ok = all(v < -0.01 for v in found.values())
    return CriterionResult(7, "evolutionary variational inequality", smooth_ok and control_ok,
                           {"quadratic_worst": rep.worst_violation, "n_probes": n_probes,
                            "violations": {str(k): v for k, v in found.items()}})


def criterion_8_jko() -> CriterionResult:
    """Transport-metric scheme: mass, decay, equilibrium gap, fixed point."""
    grid = zoo.JkoGrid(200, -4.0, 4.0)
    system = zoo.fokker_planck_jko_system(grid, 0.5 * grid.centers ** 2)
    rho_g = zoo.gibbs_state(grid, 0.5 * grid.centers ** 2)
    moved, _, _ = system.stepper(0.0, rho_g, 0.01, np.random.default_rng(0), 1e-9)
    gibbs_move = float(np.abs(moved - rho_g).sum() * grid.h)
    rho0 = np.full(200, 1.0 / 8.0)
    traj = run_mms(system, rho0, 0.0, 5.0, 500)
    mass_err = float(np.max(np.abs(traj.states.sum(axis=1) * grid.h - 1.0)))
    F = [eval_energy(system.energy, 0.0, s) for s in traj.states]
    gap = F[-1] - eval_energy(system.energy, 0.0, rho_g)
    strictly = all(b < a for a, b in zip(F[:-1], F[1:]))
    passed = (mass_err <= 1e-12 and strictly and gap <= 1e-2 and gibbs_move < 1e-6)
    return CriterionResult(8, "transport-metric scheme", passed,
                           {"mass_err": mass_err, "gap_at_T": gap,
                            "gibbs_move": gibbs_move, "strict_decay": strictly})


def criterion_9_wiggly() -> CriterionResult:
    """Pinning and tracking regimes plus the cell-problem certificates."""
    pin_sys, oracle = zoo.wiggly_system(0.01, 0.5)
    traj = run_mms(pin_sys, np.array([1.0]), 0.0, 2.0, 1000)
    dev = float(np.max(np.abs(traj.states[:, 0] - 1.0)))
    pin_ok = dev <= oracle["pinning_radius"]
    tr_sys, _ = zoo.wiggly_system(0.01, 2.0)
    traj2 = run_mms(tr_sys, np.array([1.0]), 0.0, 1.0, 1000)
    track_err = abs(float(traj2.states[-1, 0]) - math.exp(-1.0))
    track_ok = track_err <= 0.05

    # one-sided certificate: the broken-line action bounds the continuum value
    # from above, so any solver output is admissible for the inequality
    cp_fast = zoo.WigglyCellProblem(1.0, m=64)
    worst_fy = math.inf
    for v in np.linspace(-3.0, 3.0, 21):
        for xi in np.linspace(-3.0, 3.0, 21):
            val = zoo.wiggly_cell_M(cp_fast, float(v), float(xi), n_starts=1,
                                    certify=False, smart_starts=(abs(v) < 0.5))
            worst_fy = min(worst_fy, val - xi * v)
    cp = zoo.WigglyCellProblem(1.0, m=256)
    m05 = zoo.wiggly_cell_M(cp, 0.05, 0.0)
    m10 = zoo.wiggly_cell_M(cp, 0.10, 0.0)
    slope = (m10 - m05) / 0.05
    slope_err = abs(slope - 2.0 / math.pi) * math.pi / 2.0
    xi = math.sqrt(2.0)
    vals = [(zoo.wiggly_cell_M(cp, float(v), xi) - xi * float(v), float(v))
            for v in np.linspace(0.8, 1.2, 17)]
    min_val, v_star = min(vals)
    passed = (pin_ok and track_ok and worst_fy >= -1e-6 and slope_err <= 0.01
              and abs(min_val) <= 1e-3 and abs(abs(v_star) - 1.0) <= 0.1)
    return CriterionResult(9, "oscillating energy and cell problem", passed,
                           {"pin_dev": dev, "track_err": track_err, "fy_min": worst_fy,
                            "slope_rel_err": slope_err, "touch_min": min_val,
                            "touch_v": v_star})


def criterion_10_homogenization() -> CriterionResult:
    """Oscillating-coefficient flows approach the effective flow; mean value."""
    a_harm = zoo.harmonic_mean(lambda y: 2.0 + math.sin(2.0 * math.pi * y))
    harm_ok = abs(a_harm - math.sqrt(3.0)) <= 1e-10
    grid = zoo.Grid1D(512, 1.0, "neumann")
    u0 = 0.3 + 0.5 * np.cos(math.pi * grid.nodes)
    hom = zoo.allen_cahn_system(grid, a_harm, -1.0, 1.0, 1.0, name="effective")
    t_hom = run_mms(hom, u0, 0.0, 0.5, 50)
    errs = []
    for eps in (1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0):
        osc = zoo.allen_cahn_system(
            grid, a=lambda y: 2.0 + np.sin(2.0 * math.pi * y),
            b=lambda y: -np.ones_like(y), B=lambda y: np.ones_like(y),
            c=lambda y: np.ones_like(y), epsilon=eps, name="oscillating")
        t_eps = run_mms(osc, u0, 0.0, 0.5, 50)
        err = math.sqrt(grid.h * float(np.sum((t_eps.states[-1] - t_hom.states[-1]) ** 2)))
        errs.append(err)
    decreasing = errs[0] > errs[1] > errs[2]
    return CriterionResult(10, "oscillating-coefficient limit", harm_ok and decreasing,
                           {"a_harm_err": abs(a_harm - math.sqrt(3.0)),
                            "errors": [round(e, 6) for e in errs],
                            "decreasing": decreasing})


def criterion_11_rate_independent() -> CriterionResult:
    """Hysteresis model: exact incremental nodes, balance, rate invariance."""
    system, oracle = zoo.eris_toy(1.0, 2.0)
    node_err = 0.0
    for partition in (np.linspace(0.0, 2.0, 5), np.linspace(0.0, 2.0, 41),
                      np.array([0.0, 0.3, 0.45, 1.0, 1.37, 1.5, 1.9, 2.0])):
        traj = ri.run_tims(system, np.array([0.0]), partition, warn_unstable_start=False)
        node_err = max(node_err, max(abs(float(traj.states[k][0]) - oracle(float(t)))
                                     for k, t in enumerate(partition)))
    times = np.linspace(0.0, 2.0, 17)          # includes the onset time 1.5
    closed = ri.ErisTrajectory(
        times=times,
        states=np.array([[oracle(float(t))] for t in times]),
        stability_residuals=np.array([ri.stability_check(system, float(t),
                                                         np.array([oracle(float(t))]), [])
                                      for t in times]),
        var_cumulative=np.zeros(len(times)))
    s_res, e_res = ri.energetic_solution_residuals(system, closed)
    traj_u = ri.run_tims(system, np.array([0.0]), times, warn_unstable_start=False)
    margins = ri.apriori_bound_margins(system, traj_u)
    descent = ri.per_step_descent_margins(system, traj_u)
    disc = ri.rate_independence_check(system, np.array([0.0]), times,
                                      lambda s: 2.0 * s, rescale_inverse=lambda t: 0.5 * t)
    chain = ri.chain_rule_lower_estimate(system, traj_u, 0.0, 2.0)
    passed = (node_err <= 1e-12 and s_res >= -1e-9 and abs(e_res) <= 1e-10
              and disc <= 1e-12 and float(margins.min()) >= -1e-9
              and float(descent.min()) >= -1e-12 and chain >= -1e-9)
    return CriterionResult(11, "rate-independent hysteresis", passed,
                           {"node_err": node_err, "stability_worst": s_res,
                            "energy_residual": e_res, "rescale_disc": disc,
                            "apriori_min": float(margins.min())})


def criterion_12_slope_and_modulus(runs: Optional[dict] = None,
                                   jko: Optional[dict] = None) -> CriterionResult:
    """Scheme slope estimate and modulus-of-continuity bound on every run."""
    runs = runs or _canonical_zoo_runs()
    jko = jko or _jko_small_runs()
    worst_slope = math.inf
    worst_modulus = -math.inf
    for name, entry in runs.items():
        system = entry["system"]
        for tau, traj in entry["trajectories"].items():
            if tau > 5e-3:      # modulus pairs need a few nodes; check all taus for slope
                pairs = [(float(traj.times[i]), float(traj.times[j]))
                         for i in range(0, len(traj.times) - 1, max(len(traj.times) // 8, 1))
                         for j in (len(traj.times) - 1,)]
                worst_modulus = max(worst_modulus,
                                    dg.equicontinuity_check(system, traj, pairs))
            margins = dg.slope_estimate_check(system, traj)
            psi = dg._scalar_psi_of(system)
            bound_scale = max(psi.prime(rec.increment_norm
                                        / float(traj.times[k + 1] - traj.times[k]))
                              for k, rec in enumerate(traj.step_records))
            worst_slope = min(worst_slope,
                              float(margins.min()) / (1.0 + bound_scale))
    sys_j = jko["system"]
    traj_j = jko["trajectories"][1e-2]
    rng = np.random.default_rng(5)
    cands = [traj_j.states[k] for k in range(0, len(traj_j.times), 3)]
    for _ in range(20):
        z = rng.random(sys_j.dim) + 0.05
        cands.append(z / (z.sum() * jko["grid"].h))
    margins_j = dg.slope_estimate_check(sys_j, traj_j, candidates=cands)
    worst_slope = min(worst_slope, float(margins_j.min()))
    passed = worst_slope >= -1e-9 and worst_modulus <= 0.0
    return CriterionResult(12, "slope estimate and modulus bound", passed,
                           {"worst_slope_margin": worst_slope,
                            "worst_modulus_excess": worst_modulus})


CRITERIA: list[Callable[[], CriterionResult]] = [
    criterion_1_duality,
    criterion_2_nonsmooth_oracle,
    criterion_3_contractivity,
    criterion_4_reaction,
    criterion_5_edb,
    criterion_6_de_giorgi,
    criterion_7_evi,
    criterion_8_jko,
    criterion_9_wiggly,
    criterion_10_homogenization,
    criterion_11_rate_independent,
    criterion_12_slope_and_modulus,
]

LONG_RUNNING = {8}


def run_acceptance(fast: bool = False, printer: Callable[[str], None] = print
                   ) -> list[CriterionResult]:
    """Run all criteria, print one pass/fail line each, return the records."""
    shared_runs = _canonical_zoo_runs()
    shared_jko = _jko_small_runs()
    results = []
    for fn in CRITERIA:
        cid = int(fn.__name__.split("_")[1])
        if fast and cid in LONG_RUNNING:
            continue
        t0 = time.time()
        if fn in (criterion_5_edb, criterion_12_slope_and_modulus):
            res = fn(runs=shared_runs, jko=shared_jko)
        else:
            res = fn()
        res.seconds = time.time() - t0
        printer(res.line() + f"  ({res.seconds:.1f}s)")
        results.append(res)
    return results
