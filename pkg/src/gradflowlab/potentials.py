"""Scalar and vector dissipation potentials with Legendre-Fenchel duality.

A scalar dissipation potential is a convex, lower semicontinuous function
psi : [0, inf) -> [0, inf] with psi(0) = 0.  The module evaluates the
potentials themselves, their convex conjugates (analytically where the kind
permits, numerically otherwise), and the duality certificates built on the
Fenchel-Young inequality

    psi(v) + psi*(xi) >= xi * v,

whose equality cases characterize optimality of a kinetic relation.
Extended-real values are plain IEEE infinities; arithmetic with ``inf``
saturates, which is exactly the convention needed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import (
    ConjugateDiverged,
    DimensionMismatch,
    NegativeRate,
    NotConvex,
    SingularOnsager,
)

__all__ = [
    "ScalarPotential",
    "ConjugatePair",
    "DissipationPotential",
    "numeric_conjugate",
    "eval_potential",
    "eval_conjugate",
    "fenchel_young_gap",
    "check_fenchel_equivalences",
    "eval_dissipation",
    "eval_dual_dissipation",
    "dissipation_function",
]

# Search domain and ceiling for numeric conjugation.  The theory assumes
# superlinearity abstractly; numerically we cap the search at R_MAX and treat
# values beyond CEILING as divergence.
R_MAX_DEFAULT = 1.0e6
CEILING_DEFAULT = 1.0e12

Kind = Literal["quadratic", "power", "rate_independent", "viscoplastic", "tabulated"]


def _golden_max(g: Callable[[float], float], a: float, b: float,
                iters: int = 200, tol: float = 1e-13) -> tuple[float, float]:
    """Maximize a unimodal function on [a, b] by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = g(x1), g(x2)
    for _ in range(iters):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = g(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = g(x1)
    xs = [(a, g(a)), (x1, f1), (x2, f2), (b, g(b))]
    return max(xs, key=lambda t: t[1])


def numeric_conjugate(psi: Callable[[float], float], zeta: float,
                      r_max: float = R_MAX_DEFAULT,
                      ceiling: float = CEILING_DEFAULT,
                      on_diverge: str = "raise") -> float:
    """sup { zeta*r - psi(r) : r in [0, r_max] } by scan plus golden section.

    The objective is concave whenever ``psi`` is convex, so a coarse bracket
    followed by golden-section refinement is exact up to the bracket width.
    Values beyond ``ceiling`` signal missing superlinearity on the sampled
    range; depending on ``on_diverge`` this raises or returns ``inf``.
    """
    grid = np.concatenate(([0.0], np.logspace(-12, math.log10(r_max), 160)))
    vals = np.array([zeta * r - psi(r) for r in grid], dtype=float)
    vals[~np.isfinite(vals)] = -np.inf
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if lo == hi:
        best = vals[k]
    else:
        def g(r: float) -> float:
            v = zeta * r - psi(r)
            return v if math.isfinite(v) else -math.inf
        _, best = _golden_max(g, lo, hi)
    best = max(best, 0.0)  # r = 0 always yields zeta*0 - psi(0) = 0
    if best > ceiling:
        if on_diverge == "inf":
            return math.inf
        raise ConjugateDiverged(
            f"numeric conjugate at zeta={zeta!r} exceeded ceiling {ceiling:g}")
    return float(best)


@dataclass(frozen=True)
class ScalarPotential:
    """Convex scalar dissipation potential on [0, inf) with psi(0) = 0.

    Supported kinds:

    * ``quadratic``           psi(r) = scale * r^2 / 2
    * ``power``               psi(r) = scale * r^p / p,  p > 1
    * ``rate_independent``    psi(r) = scale * r
    * ``viscoplastic``        psi(r) = yield_stress * r + viscosity * r^2 / 2
    * ``tabulated``           monotone cubic interpolation of convex samples
                              on [0, r_max], +inf beyond the last sample
    """

    kind: Kind
    scale: float = 1.0
    p: Optional[float] = None
    yield_stress: Optional[float] = None
    viscosity: Optional[float] = None
    samples_r: Optional[tuple[float, ...]] = None
    samples_v: Optional[tuple[float, ...]] = None
    _interp: Callable[[float], float] = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        if self.scale <= 0.0:
            raise ValueError("scale must be positive")
        if self.kind == "power":
            if self.p is None or not (self.p > 1.0):
                raise ValueError("power potential needs exponent p > 1")
        elif self.kind == "viscoplastic":
            if self.yield_stress is None or self.yield_stress < 0.0:
                raise ValueError("viscoplastic potential needs yield >= 0")
            if self.viscosity is None or self.viscosity <= 0.0:
                raise ValueError("viscoplastic potential needs viscosity > 0")
        elif self.kind == "tabulated":
            r = np.asarray(self.samples_r, dtype=float)
            v = np.asarray(self.samples_v, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or len(r) < 3:
                raise ValueError("tabulated potential needs matching sample arrays")
            if r[0] != 0.0 or v[0] != 0.0:
                raise ValueError("tabulated samples must start at psi(0) = 0")
            if np.any(np.diff(r) <= 0.0):
                raise ValueError("sample abscissae must increase")
            self._check_sample_convexity(r, v)
            interp = PchipInterpolator(r, v, extrapolate=False)
            object.__setattr__(self, "_interp", interp)
            self._check_midpoint_convexity()

    @staticmethod
    def _check_sample_convexity(r: np.ndarray, v: np.ndarray) -> None:
        slopes = np.diff(v) / np.diff(r)
        if np.any(np.diff(slopes) < -1e-12 * (1.0 + np.abs(slopes[:-1]))):
            raise NotConvex("tabulated samples are not convex")
        if np.any(v < -1e-15):
            raise NotConvex("tabulated samples must be nonnegative")

    def _check_midpoint_convexity(self, n_triples: int = 200, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        r_max = self.samples_r[-1]
        a = rng.uniform(0.0, r_max, n_triples)
        b = rng.uniform(0.0, r_max, n_triples)
        mid = 0.5 * (a + b)
        fa = np.array([self(x) for x in a])
        fb = np.array([self(x) for x in b])
        fm = np.array([self(x) for x in mid])
        bad = fm > 0.5 * (fa + fb) + 1e-9 * (1.0 + np.abs(fa) + np.abs(fb))
        if np.any(bad):
            raise NotConvex("tabulated potential fails midpoint convexity")

    @property
    def r_max(self) -> float:
        return self.samples_r[-1] if self.kind == "tabulated" else math.inf

    def __call__(self, r: float) -> float:
        if r < 0.0:
            raise NegativeRate(f"psi evaluated at negative rate r={r!r}")
        s = self.scale
        if self.kind == "quadratic":
            return 0.5 * s * r * r
        if self.kind == "power":
            return s * r ** self.p / self.p
        if self.kind == "rate_independent":
            return s * r
        if self.kind == "viscoplastic":
            return self.yield_stress * r + 0.5 * self.viscosity * r * r
        val = self._interp(r)
        return math.inf if np.isnan(val) else s * float(val)

    def prime(self, r: float) -> float:
        """One-sided derivative psi'(r) for r >= 0 (right derivative at 0)."""
        if r < 0.0:
            raise NegativeRate(f"psi' evaluated at negative rate r={r!r}")
        s = self.scale
        if self.kind == "quadratic":
            return s * r
        if self.kind == "power":
            return s * r ** (self.p - 1.0)
        if self.kind == "rate_independent":
            return s
        if self.kind == "viscoplastic":
            return self.yield_stress + self.viscosity * r
        if r > self.r_max:
            return math.inf
        return s * float(self._interp.derivative()(r))

    def conjugate(self, zeta: float) -> float:
        """Analytic conjugate where the kind permits, numeric otherwise."""
        if zeta < 0.0:
            raise NegativeRate(f"psi* evaluated at negative force zeta={zeta!r}")
        s = self.scale
        if self.kind == "quadratic":
            return 0.5 * zeta * zeta / s
        if self.kind == "power":
            p_star = self.p / (self.p - 1.0)
            return s ** (1.0 - p_star) * zeta ** p_star / p_star
        if self.kind == "rate_independent":
            return 0.0 if zeta <= s else math.inf
        if self.kind == "viscoplastic":
            return max(0.0, zeta - self.yield_stress) ** 2 / (2.0 * self.viscosity)
        return numeric_conjugate(self, zeta, r_max=self.r_max)

    @property
    def analytic_conjugate(self) -> bool:
        return self.kind != "tabulated"

    @property
    def superlinear(self) -> bool:
        return self.kind in ("quadratic", "power", "viscoplastic")

    @property
    def differentiable(self) -> bool:
        """C^1 on [0, inf) as an even function of the rate (psi'(0+) = 0)."""
        if self.kind in ("quadratic", "power"):
            return True
        if self.kind == "viscoplastic":
            return self.yield_stress == 0.0
        return False

    @property
    def strictly_convex(self) -> bool:
        return self.kind in ("quadratic", "power", "viscoplastic")


def quadratic(scale: float = 1.0) -> ScalarPotential:
    return ScalarPotential("quadratic", scale=scale)


def power(p: float, scale: float = 1.0) -> ScalarPotential:
    return ScalarPotential("power", scale=scale, p=p)


def rate_independent(scale: float = 1.0) -> ScalarPotential:
    return ScalarPotential("rate_independent", scale=scale)


def viscoplastic(yield_stress: float, viscosity: float, scale: float = 1.0) -> ScalarPotential:
    if scale != 1.0:
        # fold the multiplier into the two material constants
        yield_stress, viscosity = scale * yield_stress, scale * viscosity
    return ScalarPotential("viscoplastic", yield_stress=yield_stress, viscosity=viscosity)


def tabulated(samples_r: Sequence[float], samples_v: Sequence[float],
              scale: float = 1.0) -> ScalarPotential:
    return ScalarPotential("tabulated", scale=scale,
                           samples_r=tuple(float(x) for x in samples_r),
                           samples_v=tuple(float(x) for x in samples_v))


@dataclass(frozen=True)
class ConjugatePair:
    """A scalar potential bundled with an evaluator of its conjugate."""

    primal: ScalarPotential
    numeric: bool = False

    def dual_eval(self, zeta: float) -> float:
        if self.numeric:
            r_max = self.primal.r_max
            if not math.isfinite(r_max):
                r_max = R_MAX_DEFAULT
            return numeric_conjugate(self.primal, zeta, r_max=r_max, on_diverge="inf")
        return self.primal.conjugate(zeta)


def eval_potential(psi: ScalarPotential, r: float) -> float:
    """psi(r) for r >= 0; negative r is the caller's error."""
    return psi(r)


def eval_conjugate(pair: ConjugatePair, zeta: float) -> float:
    """psi*(zeta) = sup_r (zeta r - psi(r)) for zeta >= 0."""
    return pair.dual_eval(zeta)


def fenchel_young_gap(pair: ConjugatePair, v: float, xi: float) -> float:
    """psi(|v|) + psi*(|xi|) - xi*v, nonnegative for sign-symmetric psi."""
    return pair.primal(abs(v)) + pair.dual_eval(abs(xi)) - xi * v


def check_fenchel_equivalences(pair: ConjugatePair, v: float, xi: float,
                               tol: float, grid_radius: Optional[float] = None,
                               n_grid: int = 2001) -> tuple[bool, bool, bool]:
    """Probe three of the five equivalent optimality statements.

    Returns (gap <= tol,
             v minimizes  w |-> psi(|w|) - xi*w        on a sampled grid,
             xi maximizes z |-> z*v     - psi*(|z|)    on a sampled grid),
    each up to ``tol``.  For smooth potentials all three agree.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    gap_ok = fenchel_young_gap(pair, v, xi) <= tol

    radius = grid_radius if grid_radius is not None else 4.0 * (1.0 + abs(v) + abs(xi))
    ws = np.linspace(-radius, radius, n_grid)
    ws = np.append(ws, v)
    primal_vals = np.array([pair.primal(abs(w)) - xi * w for w in ws])
    v_val = pair.primal(abs(v)) - xi * v
    primal_ok = v_val <= np.min(primal_vals) + tol

    zs = np.linspace(-radius, radius, n_grid)
    zs = np.append(zs, xi)
    dual_vals = np.array([z * v - pair.dual_eval(abs(z)) for z in zs])
    xi_val = xi * v - pair.dual_eval(abs(xi))
    dual_ok = xi_val >= np.max(dual_vals[np.isfinite(dual_vals)]) - tol

    return bool(gap_ok), bool(primal_ok), bool(dual_ok)


def dissipation_function(psi: ScalarPotential, r: float) -> float:
    """Diss_psi(r) = psi'(r) * r for differentiable scalar kinds (test helper)."""
    return psi.prime(r) * r


# ---------------------------------------------------------------------------
# Vector-valued dissipation potentials


@dataclass(frozen=True)
class DissipationPotential:
    """State-dependent vector dissipation R(u, v) in one of three forms.

    * ``norm_composed``     R(u, v) = psi(||v||_w) with diagonal weights w
    * ``onsager_quadratic`` R(u, v) = 0.5 <G(u) v, v> with G symmetric PSD
    * ``separable``         R(u, v) = sum_i a_i(u) psi_i(|v_i|)
    """

    form: Literal["norm_composed", "onsager_quadratic", "separable"]
    psi: Optional[ScalarPotential] = None
    weight: Optional[np.ndarray] = None
    metric: Optional[Callable[[np.ndarray], np.ndarray]] = None
    psis: Optional[tuple[ScalarPotential, ...]] = None
    coeffs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # optional inverse metric map K(u) = G(u)^{-1}; when given, duals use it
    # directly and a singular G(u) is acceptable on range(K)
    onsager_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def weighted_norm(self, v: np.ndarray) -> float:
        w = np.ones_like(v) if self.weight is None else self.weight
        return float(np.sqrt(np.sum(w * v * v)))

    def dual_weighted_norm(self, xi: np.ndarray) -> float:
        w = np.ones_like(xi) if self.weight is None else self.weight
        return float(np.sqrt(np.sum(xi * xi / w)))


def norm_composed(psi: ScalarPotential, weight: Optional[Sequence[float]] = None) -> DissipationPotential:
    w = None if weight is None else np.asarray(weight, dtype=float)
    if w is not None and np.any(w <= 0.0):
        raise ValueError("weights must be positive")
    return DissipationPotential("norm_composed", psi=psi, weight=w)


def onsager_quadratic(metric: Callable[[np.ndarray], np.ndarray],
                      inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> DissipationPotential:
    return DissipationPotential("onsager_quadratic", metric=metric, onsager_inverse=inverse)


def separable(psis: Sequence[ScalarPotential],
              coeffs: Callable[[np.ndarray], np.ndarray]) -> DissipationPotential:
    return DissipationPotential("separable", psis=tuple(psis), coeffs=coeffs)


def _check_dims(R: DissipationPotential, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DimensionMismatch(f"state dim {u.shape} but rate dim {v.shape}")
    return u, v


def _onsager_matrix(R: DissipationPotential, u: np.ndarray, sym_tol: float = 1e-12) -> np.ndarray:
    G = np.asarray(R.metric(u), dtype=float)
    if not np.allclose(G, G.T, atol=sym_tol * (1.0 + np.abs(G).max())):
        raise ValueError("Onsager metric G(u) is not symmetric")
    return G


def eval_dissipation(R: DissipationPotential, u: np.ndarray, v: np.ndarray) -> float:
    """R(u, v) >= 0 with R(u, 0) = 0."""
    u, v = _check_dims(R, u, v)
    if R.form == "norm_composed":
        return R.psi(R.weighted_norm(v))
    if R.form == "onsager_quadratic":
        if R.onsager_inverse is not None:
            # singular metric given through its inverse K = G^+:
            # finite only for rates in range(K)
            K = np.asarray(R.onsager_inverse(u), dtype=float)
            Gv, *_ = np.linalg.lstsq(K, v, rcond=None)
            if np.linalg.norm(K @ Gv - v) > 1e-9 * (1.0 + np.linalg.norm(v)):
                return math.inf
            return 0.5 * float(v @ Gv)
        G = _onsager_matrix(R, u)
        return 0.5 * float(v @ G @ v)
    a = np.asarray(R.coeffs(u), dtype=float)
    return float(sum(ai * psi_i(abs(vi)) for ai, psi_i, vi in zip(a, R.psis, v)))


def eval_dual_dissipation(R: DissipationPotential, u: np.ndarray, xi: np.ndarray) -> float:
    """R*(u, xi) = sup_v (<xi, v> - R(u, v)), analytic per form."""
    u, xi = _check_dims(R, u, xi)
    if R.form == "norm_composed":
        return R.psi.conjugate(R.dual_weighted_norm(xi))
    if R.form == "onsager_quadratic":
        if R.onsager_inverse is not None:
            K = np.asarray(R.onsager_inverse(u), dtype=float)
            return 0.5 * float(xi @ K @ xi)
        G = _onsager_matrix(R, u)
        try:
            sol = np.linalg.solve(G, xi)
        except np.linalg.LinAlgError as exc:
            raise SingularOnsager(f"G(u) singular at u={u!r}") from exc
        cond = np.linalg.cond(G)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularOnsager(f"G(u) numerically singular at u={u!r} (cond={cond:g})")
        return 0.5 * float(xi @ sol)
    a = np.asarray(R.coeffs(u), dtype=float)
    # (a psi)*(zeta) = a psi*(zeta / a)
    return float(sum(ai * psi_i.conjugate(abs(zi) / ai)
                     for ai, psi_i, zi in zip(a, R.psis, xi)))
