"""Relative entropy through the log-Laplace transform and its Cramér transform.

For a probability measure R and a test function theta the log-Laplace
transform ``Lambda(y) = log int exp(<y, theta>) dR`` and its convex conjugate
``Xi`` (the Cramér transform) carry everything about relative-entropy
projections on sets of the form {int theta dP in C}.  The routines here work on
Lambda directly; they do not go through the generic dual solver, so the two
can be checked against each other.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize
from scipy.special import logsumexp

from .dual import Box, Equality, LowerBounds, MomentProblem, solve_dual, INFEASIBLE
from .entropies import EntropySpec
from .errors import EstimateDisagreement
from .measures import Density1D, TestFunction
from .quadrature import integrate_adaptive

INF = np.inf
RELATIVE = EntropySpec("relative")


def _as_list(theta):
    if isinstance(theta, TestFunction):
        return [theta]
    return list(theta)


def _u(R, thetas, y):
    """<y, theta> as grid values (discrete R) or as a polynomial."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if R.is_discrete:
        return np.column_stack([t.values_on(R) for t in thetas]) @ y
    return sum((yk * t.poly for yk, t in zip(y, thetas)), Polynomial([0.0]))


def _finite(R, thetas, y) -> bool:
    if R.is_discrete:
        return True
    return R.tail_finite(_u(R, thetas, y))


def _shift(R, poly) -> float:
    s = R.sup_on_support(poly)
    return s if np.isfinite(s) else 0.0


def _breaks(R, poly):
    """Cut points resolving the boundary layer of a steep tilt on a bounded support."""
    lo, hi = R.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return ()
    slope = max(abs(float(poly.deriv()(lo))), abs(float(poly.deriv()(hi))))
    if slope * (hi - lo) < 50:
        return ()
    h = 1.0 / slope
    return tuple(x for j in (1, 4, 16, 64) for x in (lo + j * h, hi - j * h))


def log_laplace(R, theta, y) -> float:
    """Lambda(y) = log int exp(<y, theta>) dR, +inf when the integral diverges."""
    thetas = _as_list(theta)
    if R.is_discrete:
        return float(logsumexp(_u(R, thetas, y), b=R.weights))
    if not _finite(R, thetas, y):
        return INF
    poly = _u(R, thetas, y)
    c = _shift(R, poly)
    val = R.integrate(lambda z: np.ones_like(z), log_factor=lambda z: poly(z) - c,
                      breaks=_breaks(R, poly))
    return c + math.log(val)


def log_laplace_prime(R, theta, y) -> np.ndarray:
    """Gradient of Lambda: the mean of theta under the tilted law."""
    thetas = _as_list(theta)
    if R.is_discrete:
        u = _u(R, thetas, y)
        p = np.exp(u - u.max()) * R.weights
        T = np.column_stack([t.values_on(R) for t in thetas])
        return T.T @ p / p.sum()
    poly = _u(R, thetas, y)
    if not R.tail_finite(poly, max(_deg(t.poly) for t in thetas)):
        return np.full(len(thetas), INF)
    c = _shift(R, poly)
    polys = [t.poly for t in thetas]
    vals = R.integrate(lambda z: np.column_stack([np.ones_like(z)] + [p(z) for p in polys]),
                       log_factor=lambda z: poly(z) - c, breaks=_breaks(R, poly))
    vals = np.atleast_1d(vals)
    return vals[1:] / vals[0]


def _ess_sup(R, theta, d=1.0) -> float:
    """Essential supremum of d * theta under R."""
    if R.is_discrete:
        return float(np.max(d * theta.values_on(R)))
    return R.sup_on_support(d * theta.poly)


def _deg(p: Polynomial) -> int:
    c = p.coef
    d = c.size - 1
    while d > 0 and c[d] == 0:
        d -= 1
    return d


# -- the domain of Lambda along a ray ---------------------------------------------

def _snap_edge(R, thetas, d, r):
    """Replace a bisected edge by the exact root of the leading tail coefficient."""
    if R.is_discrete or not isinstance(R, Density1D):
        return r
    dir_poly = _u(R, thetas, d)
    for _, log_kernel, _ in R._tails():
        n = max(dir_poly.coef.size, log_kernel.coef.size)
        a = np.pad(dir_poly.coef, (0, n - dir_poly.coef.size))
        k = np.pad(log_kernel.coef, (0, n - log_kernel.coef.size))
        for deg in range(n - 1, 0, -1):
            if a[deg] != 0 or k[deg] != 0:
                if a[deg] != 0:
                    r_exact = -k[deg] / a[deg]
                    if r_exact > 0 and abs(r_exact - r) <= 1e-9 * (1 + r):
                        return r_exact
                break
    return r


def domain_edge(R, theta, direction, cap=2.0 ** 40) -> float:
    """sup{r >= 0 : Lambda(r * direction) < inf}, found by doubling and bisection."""
    thetas = _as_list(theta)
    d = np.atleast_1d(np.asarray(direction, dtype=float))
    if not _finite(R, thetas, d):
        lo, hi = 0.0, 1.0
    else:
        r = 1.0
        while r < cap and _finite(R, thetas, 2 * r * d):
            r *= 2
        if r >= cap:
            return INF
        lo, hi = r, 2 * r
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _finite(R, thetas, mid * d):
            lo = mid
        else:
            hi = mid
    return _snap_edge(R, thetas, d, lo)


# -- Cramér transform ------------------------------------------------------------

@dataclass
class ConjugatePoint:
    """Maximiser of y x - Lambda(y) for scalar theta."""

    y: float
    value: float
    kind: str  # "interior", "boundary" or "infinite"
    lam: float = INF


def _conjugate_1d(R, thetas, x, xtol=1e-15) -> ConjugatePoint:
    mean = float(log_laplace_prime(R, thetas, 0.0)[0])
    if x == mean:
        return ConjugatePoint(0.0, 0.0, "interior", 0.0)
    d = 1.0 if x > mean else -1.0
    if d * x >= _ess_sup(R, thetas[0], d):
        return ConjugatePoint(d * INF, INF, "infinite")

    def g(r):
        return d * (float(log_laplace_prime(R, thetas, r * d)[0]) - x)

    edge = domain_edge(R, thetas, d)
    lo = 0.0
    if not np.isfinite(edge):
        r = 1.0
        while g(r) < 0:
            lo = r
            r *= 2
            if r > 2.0 ** 60:
                return ConjugatePoint(d * INF, INF, "infinite")
        hi = r
    else:
        lam_edge = log_laplace(R, thetas, edge * d)
        if np.isfinite(lam_edge) and g(edge) <= 0:
            y = edge * d
            return ConjugatePoint(y, y * x - lam_edge, "boundary", lam_edge)
        hi = None
        for k in range(1, 61):
            r = edge * (1 - 2.0 ** -k)
            if g(r) >= 0:
                hi = r
                break
            lo = r
        if hi is None:
            y = lo * d
            lam = log_laplace(R, thetas, y)
            return ConjugatePoint(y, y * x - lam, "boundary", lam)
    r = optimize.brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    y = r * d
    lam = log_laplace(R, thetas, y)
    return ConjugatePoint(y, y * x - lam, "interior", lam)


def cramer_transform(R, theta, x) -> float:
    """Xi(x) = sup_y {<y, x> - Lambda(y)}."""
    thetas = _as_list(theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(thetas) == 1:
        return float(_conjugate_1d(R, thetas, float(x[0])).value)
    if not R.is_discrete:
        raise NotImplementedError("vector Cramér transform needs a discrete measure")
    T = np.column_stack([t.values_on(R) for t in thetas])

    def neg(y):
        u = T @ y
        lam = logsumexp(u, b=R.weights)
        p = np.exp(u - lam) * R.weights
        return lam - y @ x, T.T @ p - x

    res = optimize.minimize(neg, np.zeros(len(thetas)), jac=True, method="BFGS",
                            options={"gtol": 1e-12, "maxiter": 2000})
    if np.linalg.norm(res.x) > 1e6:
        return INF
    return float(-res.fun)


# -- unit-mass augmentation -----------------------------------------------------

def augmented_problem(R, theta, constraint) -> MomentProblem:
    """Relative-entropy moment problem with theta~ = (1, theta) and target (1, x)."""
    thetas = _as_list(theta)
    lo, hi = constraint.bounds()
    if isinstance(constraint, Equality):
        aug = Equality(np.concatenate([[1.0], lo]))
    else:
        aug = Box(np.concatenate([[1.0], lo]), np.concatenate([[1.0], hi]))
    return MomentProblem(R, RELATIVE, [TestFunction.constant()] + thetas, aug)


def lemma_518_check(R, theta, x) -> float:
    """|Gamma*(1, x) - Xi(x)| with Gamma* from the augmented dual problem."""
    prob = augmented_problem(R, theta, Equality(np.atleast_1d(x)))
    sol = solve_dual(prob)
    gamma_star = INF if sol.status == INFEASIBLE else sol.dual_value
    xi = cramer_transform(R, theta, x)
    if not np.isfinite(xi) and not np.isfinite(gamma_star):
        return 0.0
    return abs(gamma_star - xi)


# -- steepness -------------------------------------------------------------------

@dataclass
class LaplaceReport:
    y_max: float
    steep: bool
    x_star: float
    lambda_at_boundary: float
    ladder: np.ndarray = field(default=None, repr=False)


def steepness_probe(R, theta, direction=1.0, rungs=30, blowup=1e6) -> LaplaceReport:
    """Locate the edge of dom Lambda along ``direction`` and the limit of Lambda' there."""
    thetas = _as_list(theta)
    if len(thetas) != 1:
        raise ValueError("steepness is probed for scalar theta")
    d = float(direction)
    edge = domain_edge(R, thetas, d)
    if np.isfinite(edge):
        ys = [edge - edge * 2.0 ** -k for k in range(1, rungs + 1)]
        lam_edge = log_laplace(R, thetas, edge * d)
    else:
        ys = [2.0 ** k for k in range(1, rungs + 1)]
        lam_edge = INF
    vals = []
    for r in ys:
        v = d * float(log_laplace_prime(R, thetas, r * d)[0])
        vals.append(v)
        if not np.isfinite(v) or v >= blowup:
            break
    vals = np.array(vals)
    steps = np.diff(vals)
    if np.any(steps < -1e-9 * (1 + np.abs(vals[1:]))):
        raise EstimateDisagreement("Lambda' ladder is not monotone", vals[:-1], vals[1:])
    y_max = edge * d
    if not np.isfinite(vals[-1]) or vals[-1] >= blowup:
        return LaplaceReport(y_max, True, d * INF, lam_edge, vals)
    # one Richardson step on h = 2^-k (or 1/y on an unbounded domain)
    x_star = d * (2 * vals[-1] - vals[-2]) if vals.size > 1 else d * vals[-1]
    return LaplaceReport(y_max, False, x_star, lam_edge, vals)


# -- projections ----------------------------------------------------------------

@dataclass
class ProjectionReport:
    kind: str  # "projection" or "generalized"
    density: Callable
    x_hat: float
    x_a: float
    x_s: float
    entropy_value: float
    dual_y: np.ndarray
    log_normalizer: float

    @property
    def is_reference(self) -> bool:
        return bool(np.all(self.dual_y == 0))


class TiltedDensity:
    """z -> exp(<y, theta(z)> - Lambda(y)), a probability density with respect to R."""

    def __init__(self, R, thetas, y, lam):
        self.R = R
        self.thetas = thetas
        self.y = np.atleast_1d(np.asarray(y, dtype=float))
        self.lam = lam

    def log(self, z=None):
        if self.R.is_discrete:
            return _u(self.R, self.thetas, self.y) - self.lam
        return _u(self.R, self.thetas, self.y)(np.asarray(z, dtype=float)) - self.lam

    def __call__(self, z=None):
        return np.exp(self.log(z))


def entropic_projection(R, theta, c) -> ProjectionReport:
    """Relative-entropy projection of R on {P : int theta dP >= c}."""
    thetas = _as_list(theta)
    mean = float(log_laplace_prime(R, thetas, 0.0)[0])
    if c <= mean:
        dens = TiltedDensity(R, thetas, 0.0, 0.0)
        return ProjectionReport("projection", dens, mean, mean, 0.0, 0.0, np.zeros(1), 0.0)
    pt = _conjugate_1d(R, thetas, float(c))
    if pt.kind == "infinite" or not np.isfinite(pt.value):
        raise ValueError(f"no probability measure with finite entropy meets the constraint >= {c}")
    dens = TiltedDensity(R, thetas, pt.y, pt.lam)
    if pt.kind == "interior":
        return ProjectionReport("projection", dens, c, c, 0.0, pt.value, np.array([pt.y]), pt.lam)
    x_a = float(log_laplace_prime(R, thetas, pt.y)[0])
    if abs(c - x_a) <= 1e-12 * (1 + abs(c)):
        return ProjectionReport("projection", dens, c, c, 0.0, pt.value, np.array([pt.y]), pt.lam)
    return ProjectionReport("generalized", dens, c, x_a, c - x_a, pt.value, np.array([pt.y]), pt.lam)


# -- the Csiszár example ------------------------------------------------------------

def csiszar_constants(a=1.0, b=3.0):
    """(a0, a1) = (int e^{-az}/(1+z^b), int 1/(1+z^b)) over [0, inf)."""
    a0, _ = integrate_adaptive(lambda z: np.exp(-a * z) / (1 + z ** b), 0.0, INF)
    a1, _ = integrate_adaptive(lambda z: 1.0 / (1 + z ** b), 0.0, INF)
    return float(a0), float(a1)


@dataclass
class CsiszarReport:
    c: float
    a0: float
    a1: float
    x_star: float
    y_max: float
    verdict: str
    y: float
    Xi_c: float
    x_a: float
    x_s: float
    density: Callable = field(repr=False)


def csiszar_scenario(c, a=1.0, b=3.0) -> CsiszarReport:
    """The heavy-tailed reference exp(-az)/(a0 (1+z^b)) with a lower bound c on the mean."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    R = Density1D.csiszar(a, b)
    theta = TestFunction.identity()
    a0, a1 = csiszar_constants(a, b)
    probe = steepness_probe(R, theta)
    proj = entropic_projection(R, theta, c)
    verdict = "R-itself" if proj.is_reference else proj.kind
    return CsiszarReport(c=c, a0=a0, a1=a1, x_star=probe.x_star, y_max=probe.y_max, verdict=verdict,
                         y=float(proj.dual_y[0]), Xi_c=proj.entropy_value, x_a=proj.x_a, x_s=proj.x_s,
                         density=proj.density)


# -- curve tables ------------------------------------------------------------------

def lambda_curve(R, theta, ys):
    return np.array([log_laplace(R, theta, y) for y in ys])


def xi_curve(R, theta, xs):
    return np.array([cramer_transform(R, theta, x) for x in xs])


def write_curve_csv(path, header, columns, digits=12):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v, digits) for v in row])


def _fmt(v, digits):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{digits}g}"
