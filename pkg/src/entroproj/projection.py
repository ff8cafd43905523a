"""Gamma*, its recession function and the split of a moment vector into
absolutely continuous and singular parts.

``Gamma*(x)`` is the optimal value of the moment problem with the equality
constraint ``int theta f dR = x``.  When the dual optimum sits on the edge of
the dual domain the density built from it only reaches ``x_a``; the rest
``x_s = x - x_a`` is carried by mass escaping to infinity and is priced by the
recession function of Gamma*.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import (BOUNDARY_OPTIMUM, CONVERGED, INFEASIBLE, DualSolution, Equality,
                   MomentProblem, PrimalDensity, solve_dual)
from .errors import EstimateDisagreement

INF = np.inf

QUOTIENT_LADDER = tuple(2.0 ** k for k in range(4, 13))
CONSENSUS_TOL = 1e-3


@dataclass
class GammaStarReport:
    x: np.ndarray
    value: float
    maximizer: DualSolution


def gamma_star_of_x(prob: MomentProblem, x) -> GammaStarReport:
    """Gamma*(x) as the dual optimum with the constraint int theta f dR = x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    sol = solve_dual(prob.with_constraint(Equality(x)))
    if sol.status == INFEASIBLE:
        value = INF
    else:
        value = sol.dual_value
    return GammaStarReport(x=x, value=value, maximizer=sol)


# -- recession function -----------------------------------------------------------

@dataclass
class RecessionEstimate:
    """Consensus of the quotient estimate and the support-function estimate."""

    value: float
    quotient: float
    support: float

    def __float__(self):
        return float(self.value)


def _richardson(ts, qs, rungs=6):
    """Extrapolate q(t) to t = inf assuming q = q_inf + sum_j c_j t^(-j/2).

    Least squares over the last ``rungs`` ladder points with j = 1, 2, 3;
    half-integer powers appear when the dual optimum creeps up to an open
    domain edge.
    """
    t = np.asarray(ts, dtype=float)[-rungs:]
    q = np.asarray(qs, dtype=float)[-rungs:]
    A = np.column_stack([t ** (-0.5 * j) for j in range(4)])
    coef, *_ = np.linalg.lstsq(A, q, rcond=None)
    return float(coef[0])


def quotient_estimate(prob: MomentProblem, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    qs = []
    for t in QUOTIENT_LADDER:
        v = gamma_star_of_x(prob, t * xi).value
        if not np.isfinite(v):
            return INF
        qs.append(v / t)
    # increments that stop shrinking geometrically mean superlinear growth
    inc = np.diff(qs)
    if inc[-1] > 1e-8 * (1 + abs(qs[-1])) and inc[-1] >= 0.9 * inc[-2]:
        return INF
    return _richardson(QUOTIENT_LADDER, qs)


def _ray_length(prob: MomentProblem, d, cap=1e12, iterations=200) -> float:
    """sup{r >= 0 : r d in dom Gamma}."""
    r = 1.0
    if not prob.in_domain(d):
        lo, hi = 0.0, 1.0
    else:
        while r < cap and prob.in_domain(2 * r * d):
            r *= 2
        if r >= cap:
            return INF
        lo, hi = r, 2 * r
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if prob.in_domain(mid * d):
            lo = mid
        else:
            hi = mid
    # land exactly on a closed linear face of the domain when one is hit
    for h in prob.halfspaces:
        nd = h.normal @ d
        if h.closed and nd > 0:
            r_face = h.bound / nd
            if abs(r_face - lo) <= 1e-9 * (1 + lo) and prob.in_domain(r_face * d):
                lo = r_face
    return lo


def ray_directions(K, xi, n_circle=360):
    dirs = [np.eye(K)[k] * s for k in range(K) for s in (1.0, -1.0)]
    nrm = np.linalg.norm(xi)
    if nrm > 0:
        dirs.append(np.asarray(xi, dtype=float) / nrm)
    if K == 2:
        ang = 2 * np.pi * np.arange(n_circle) / n_circle
        dirs.extend(np.column_stack([np.cos(ang), np.sin(ang)]))
    return dirs


def support_estimate(prob: MomentProblem, xi) -> float:
    """sup{<y, xi> : y in dom Gamma} by ray search from the origin."""
    xi = np.asarray(xi, dtype=float)
    best = 0.0  # the origin is always in the domain
    for d in ray_directions(prob.K, xi):
        slope = float(d @ xi)
        if slope <= 1e-12:
            continue
        r = _ray_length(prob, d)
        if not np.isfinite(r):
            return INF
        best = max(best, r * slope)
    return best


def recession_function(prob: MomentProblem, xi) -> RecessionEstimate:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if not np.any(xi):
        return RecessionEstimate(0.0, 0.0, 0.0)
    e2 = support_estimate(prob, xi)
    e1 = quotient_estimate(prob, xi)
    if np.isinf(e1) or np.isinf(e2):
        if e1 == e2:
            return RecessionEstimate(INF, e1, e2)
        raise EstimateDisagreement("recession estimates disagree", e1, e2)
    if abs(e1 - e2) > CONSENSUS_TOL * (1 + abs(e1)):
        raise EstimateDisagreement("recession estimates disagree", e1, e2)
    return RecessionEstimate(e2, e1, e2)


def singular_entropy_value(prob: MomentProblem, x_s) -> float:
    """Entropy cost of the singular component: the recession function at x_s."""
    return recession_function(prob, x_s).value


# -- decomposition --------------------------------------------------------------------

@dataclass
class Decomposition:
    x: np.ndarray
    x_a: np.ndarray
    x_s: np.ndarray
    gamma_star_x: float
    gamma_star_xa: float
    recession_xs: float
    density_a: PrimalDensity = field(repr=False)
    is_dominating: bool
    solution: DualSolution = field(repr=False, default=None)


def _negligible(v, x):
    return float(np.linalg.norm(v)) <= 1e-6 * (1 + float(np.linalg.norm(x)))


def decompose(prob: MomentProblem, x, price=True) -> Decomposition:
    """x = x_a + x_s with x_a the moment vector of the density built from the dual optimum.

    With ``price=False`` the two entropy terms of a nontrivial split are left as NaN.
    """
    rep = gamma_star_of_x(prob, x)
    sol = rep.maximizer
    if sol.status not in (CONVERGED, BOUNDARY_OPTIMUM):
        raise ValueError(f"Gamma*(x) is not finite or the solver failed ({sol.status})")
    eq_prob = prob.with_constraint(Equality(rep.x))
    density = PrimalDensity(eq_prob, sol.y)
    if sol.status == CONVERGED:
        zero = np.zeros_like(rep.x)
        return Decomposition(rep.x, rep.x.copy(), zero, rep.value, rep.value, 0.0, density, True, sol)
    x_a = np.asarray(sol.moments, dtype=float)
    x_s = rep.x - x_a
    if _negligible(x_s, rep.x):
        return Decomposition(rep.x, x_a, x_s, rep.value, rep.value, 0.0, density, True, sol)
    if not price:
        return Decomposition(rep.x, x_a, x_s, rep.value, np.nan, np.nan, density, False, sol)
    gamma_a = gamma_star_of_x(prob, x_a).value
    rec = recession_function(prob, x_s).value
    return Decomposition(rep.x, x_a, x_s, rep.value, gamma_a, rec, density, False, sol)


@dataclass
class DominatingReport:
    dominating: bool
    x: np.ndarray
    y: np.ndarray
    feasible: bool
    support_violation: float
    representation_residual: float
    decomposition: Decomposition = field(repr=False)

    def __bool__(self):
        return self.dominating


def is_dominating_point(prob: MomentProblem, x=None, rng=None, samples=64) -> DominatingReport:
    """Is the minimiser of Gamma* over C (or the given x) a dominating point?

    Without ``x`` the constrained problem ``prob`` is solved first and its
    optimal moment vector is examined.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if x is None:
        sol = solve_dual(prob)
        if sol.status not in (CONVERGED, BOUNDARY_OPTIMUM):
            raise ValueError(f"constrained problem did not solve ({sol.status})")
        x = sol.x_hat
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dec = decompose(prob, x, price=False)
    y = dec.solution.y
    feasible = bool(np.isfinite(dec.gamma_star_x) and prob.constraint.contains(x))
    # <y, x> <= <y, x'> on points x' of C near x
    lo, hi = prob.lo, prob.hi
    span = 1.0 + np.abs(x)
    pts = x + span * rng.uniform(-1.0, 1.0, size=(samples, prob.K))
    pts = np.clip(pts, lo, hi)
    violation = float(max(0.0, np.max(y @ x - pts @ y)))
    residual = float(np.linalg.norm(x - dec.solution.moments))
    return DominatingReport(dec.is_dominating, x, y, feasible, violation, residual, dec)
