"""Finite-dimensional dual of entropy minimisation under moment constraints.

The primal problem minimises ``int gamma_star(f) dR`` over densities f with
``int theta f dR`` in a convex set C.  Its dual maximises the concave function

    D(y) = inf_{x in C} <y, x> - int gamma(<y, theta>) dR

over y in R^K.  :func:`solve_dual` runs a projected, damped Newton iteration
that respects three kinds of restriction on y: sign constraints coming from
C, the effective domain of the integral term, and kinks of the support
function of C.  Non-steep problems have their optimum on the boundary of the
effective domain; the solver lands exactly on it and reports
``boundary_optimum``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import linalg, optimize

from .entropies import EntropySpec
from .errors import DomainBoundary, QuadratureDivergence
from .measures import OUTSIDE, TestFunction, integrability_class

INF = np.inf

CONVERGED = "converged"
BOUNDARY_OPTIMUM = "boundary_optimum"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


# -- constraint sets -------------------------------------------------------------

@dataclass(frozen=True)
class Equality:
    x0: tuple

    def __init__(self, x0):
        object.__setattr__(self, "x0", tuple(np.atleast_1d(np.asarray(x0, dtype=float))))

    def bounds(self):
        x = np.array(self.x0)
        return x, x.copy()

    def contains(self, x, tol=1e-9):
        return bool(np.all(np.abs(np.asarray(x) - np.array(self.x0)) <= tol))


@dataclass(frozen=True)
class LowerBounds:
    """x_k >= c_k for every k."""

    c: tuple

    def __init__(self, c):
        object.__setattr__(self, "c", tuple(np.atleast_1d(np.asarray(c, dtype=float))))

    def bounds(self):
        c = np.array(self.c)
        return c, np.full(c.shape, INF)

    def contains(self, x, tol=1e-9):
        return bool(np.all(np.asarray(x) >= np.array(self.c) - tol))


@dataclass(frozen=True)
class Box:
    """lo_k <= x_k <= hi_k; infinite ends and lo == hi are allowed."""

    lo: tuple
    hi: tuple

    def __init__(self, lo, hi):
        lo = tuple(np.atleast_1d(np.asarray(lo, dtype=float)))
        hi = tuple(np.atleast_1d(np.asarray(hi, dtype=float)))
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError("Box needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x)
        return bool(np.all(x >= np.array(self.lo) - tol) and np.all(x <= np.array(self.hi) + tol))


ConstraintSet = Equality | LowerBounds | Box


# -- the problem -------------------------------------------------------------------

@dataclass(frozen=True)
class Halfspace:
    """Linear piece of the dual effective domain: normal . y <= bound."""

    normal: np.ndarray
    bound: float
    closed: bool


class MomentProblem:
    """(R, gamma_star, theta, C) with theta: Z -> R^K."""

    def __init__(self, R, spec: EntropySpec, theta, constraint, check=True):
        self.R = R
        self.spec = spec
        self.theta = tuple(theta)
        self.constraint = constraint
        self.K = len(self.theta)
        if self.K < 1:
            raise ValueError("need at least one test function")
        lo, hi = constraint.bounds()
        if lo.size != self.K:
            raise ValueError(f"constraint has dimension {lo.size}, theta has {self.K}")
        self.lo, self.hi = lo, hi
        if R.is_discrete:
            self._Theta = np.column_stack([t.values_on(R) for t in self.theta])
            self._polys = None
        else:
            if any(t.poly is None for t in self.theta):
                raise TypeError("test functions on densities must be polynomial")
            self._Theta = None
            self._polys = [t.poly for t in self.theta]
            self._coef = np.zeros((self.K, max(p.coef.size for p in self._polys)))
            for k, p in enumerate(self._polys):
                self._coef[k, :p.coef.size] = p.coef
            self._degrees = np.array([_degree(p) for p in self._polys])
        if check:
            self._check()
        self._halfspaces = self._domain_halfspaces()

    def __repr__(self):
        return f"MomentProblem(R={self.R!r}, spec={self.spec}, K={self.K}, C={self.constraint!r})"

    def with_constraint(self, constraint) -> "MomentProblem":
        return MomentProblem(self.R, self.spec, self.theta, constraint, check=False)

    def _check(self):
        gram = self.integrate_outer(lambda z: np.ones_like(z))
        ev = np.linalg.eigvalsh(gram)
        if ev.min() <= 1e-10 * max(1.0, ev.max()):
            raise ValueError("test functions are linearly dependent on the support of R")
        if not self.R.is_discrete:
            for t in self.theta:
                if integrability_class(t, self.spec, self.R) == OUTSIDE:
                    raise ValueError(f"{t} lies outside the Orlicz space of {self.spec}")

    # -- evaluation helpers ---------------------------------------------------

    def theta_values(self, z):
        """Matrix (len(z), K) of theta components."""
        z = np.asarray(z, dtype=float)
        return np.column_stack([p(z) for p in self._polys])

    def u_poly(self, y) -> Polynomial:
        return Polynomial(np.asarray(y, dtype=float) @ self._coef)

    def u_on_grid(self, y):
        return self._Theta @ np.asarray(y, dtype=float)

    def integrate_outer(self, weight):
        """Gram-type matrix int theta theta^T weight(z) dR."""
        if self.R.is_discrete:
            W = self.R.weights * weight(self.R.points)
            return (self._Theta * W[:, None]).T @ self._Theta

        def f(z):
            T = self.theta_values(z)
            return (T[:, :, None] * T[:, None, :] * weight(z)[:, None, None]).reshape(len(z), -1)
        return np.asarray(self.R.integrate(f)).reshape(self.K, self.K)

    # -- effective domain of y -> int gamma(<y, theta>) dR ------------------------

    def in_domain(self, y) -> bool:
        """Is int gamma(<y, theta>) dR finite?"""
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            return False
        growth = self.spec.growth
        if self.R.is_discrete:
            if growth == "barrier":
                return bool(np.all(self.u_on_grid(y) < 1.0))
            if growth == "exp":
                return bool(np.all(self.u_on_grid(y) < 700.0))
            return True
        poly = self.u_poly(y)
        if growth == "exp":
            return self.R.tail_finite(poly)
        if growth == "barrier":
            return self.R.sup_on_support(poly) < 1.0
        return True

    def _domain_halfspaces(self):
        growth = self.spec.growth
        if growth == "poly":
            return []
        if self.R.is_discrete:
            if growth == "barrier":
                return [Halfspace(row.copy(), 1.0, False) for row in self._Theta]
            return []
        if self._coef.shape[1] > 2:
            return []  # higher-degree theta: rely on in_domain and backtracking
        lin = self._coef[:, 1] if self._coef.shape[1] > 1 else np.zeros(self.K)
        const = self._coef[:, 0]
        out = []
        fam, p = self.R.family, self.R.params
        if growth == "exp" and fam in ("exponential", "csiszar") and np.any(lin != 0):
            rate = p[0]
            closed = fam == "csiszar" and p[1] > 1
            out.append(Halfspace(lin.copy(), rate, closed))
        elif growth == "barrier":
            lo, hi = self.R.support
            for end in (lo, hi):
                if np.isfinite(end):
                    out.append(Halfspace(const + lin * end, 1.0, False))
            if not np.isfinite(hi) and np.any(lin != 0):
                out.append(Halfspace(lin.copy(), 0.0, True))
            if not np.isfinite(lo) and np.any(lin != 0):
                out.append(Halfspace(-lin, 0.0, True))
        return out

    @property
    def halfspaces(self):
        return list(self._halfspaces)

    # -- the integral term and its derivatives --------------------------------

    def integrals(self, y, order=2, basis=None):
        """(int gamma(u), int theta gamma'(u), int theta_B theta_B^T gamma''(u)) with u = <y, theta>.

        ``theta_B = basis^T theta``; entries whose integral diverges are +inf.
        Returns ``None`` when y is outside the effective domain.
        """
        y = np.asarray(y, dtype=float)
        if not self.in_domain(y):
            return None
        K = self.K
        B = np.eye(K) if basis is None else np.asarray(basis, dtype=float)
        r = B.shape[1]
        spec = self.spec
        if self.R.is_discrete:
            u = self.u_on_grid(y)
            w = self.R.weights
            with np.errstate(over="ignore", invalid="ignore"):
                return self._discrete_integrals(u, w, order, B)
        return self._density_integrals(y, order, B, r)

    def _discrete_integrals(self, u, w, order, B):
        spec = self.spec
        g0 = float(w @ spec.gamma(u))
        if order == 0:
            return g0, None, None
        g1 = self._Theta.T @ (w * spec.gamma_prime(u))
        if order == 1:
            return g0, g1, None
        TB = self._Theta @ B
        g2 = (TB * (w * spec.gamma_second(u))[:, None]).T @ TB
        return g0, g1, g2

    def _density_integrals(self, y, order, B, r):
        K, spec = self.K, self.spec
        poly = self.u_poly(y)
        exp_growth = spec.growth == "exp"
        # which entries are finite
        deg_B = np.array([max([self._degrees[k] for k in range(K) if abs(B[k, j]) > 1e-15] or [0])
                          for j in range(r)])
        if exp_growth:
            fin1 = np.array([self.R.tail_finite(poly, d) for d in self._degrees])
            fin2 = np.array([[self.R.tail_finite(poly, deg_B[i] + deg_B[j]) for j in range(r)]
                             for i in range(r)])
        else:
            fin1 = np.ones(K, bool)
            fin2 = np.ones((r, r), bool)
        polys = self._polys

        def f(z):
            u = poly(z)
            if exp_growth:
                shift = np.maximum(u, 0.0)
                # gamma(u) * exp(-max(u, 0))
                g = np.where(u > 0, -np.expm1(-np.abs(u)), np.expm1(np.minimum(u, 0.0)))
                gp = np.exp(u - shift)
                gpp = gp
            else:
                g = spec.gamma(u)
                gp = spec.gamma_prime(u)
                gpp = spec.gamma_second(u)
            cols = [g]
            if order >= 1:
                T = np.column_stack([p(z) for p in polys])
                cols.append(T[:, fin1] * gp[:, None])
                if order >= 2:
                    TB = T @ B
                    outer = (TB[:, :, None] * TB[:, None, :])[:, fin2]
                    cols.append(outer * gpp[:, None])
            return np.column_stack([c if c.ndim == 2 else c[:, None] for c in cols])

        log_factor = (lambda z: np.maximum(poly(z), 0.0)) if exp_growth else None
        vals = np.atleast_1d(self.R.integrate(f, log_factor=log_factor))
        g0 = float(vals[0])
        if order == 0:
            return g0, None, None
        g1 = np.full(K, INF)
        n1 = int(fin1.sum())
        g1[fin1] = vals[1:1 + n1]
        if order == 1:
            return g0, g1, None
        g2 = np.full((r, r), INF)
        g2[fin2] = vals[1 + n1:]
        return g0, g1, g2

    # -- the support function of C ------------------------------------------------

    def support_value(self, y):
        """inf_{x in C} <y, x>, possibly -inf."""
        total = 0.0
        for yk, lo, hi in zip(np.asarray(y, dtype=float), self.lo, self.hi):
            if yk > 0:
                total += yk * lo
            elif yk < 0:
                total += yk * hi
        return total if not math.isnan(total) else -INF

    def x_c(self, y, moments):
        """A minimiser of <y, x> over C, choosing ascent-compatible ends at y_k = 0."""
        x = np.empty(self.K)
        for k, (yk, lo, hi, e) in enumerate(zip(y, self.lo, self.hi, moments)):
            if yk > 0 or lo == hi:
                x[k] = lo
            elif yk < 0:
                x[k] = hi
            elif e < lo:
                x[k] = lo
            elif e > hi:
                x[k] = hi
            else:
                x[k] = e
        return x


def _degree(p: Polynomial) -> int:
    c = p.coef
    d = c.size - 1
    while d > 0 and c[d] == 0:
        d -= 1
    return d


# -- dual objective and gradient ------------------------------------------------------

def dual_objective(prob: MomentProblem, y) -> float:
    y = np.asarray(y, dtype=float)
    lin = prob.support_value(y)
    if lin == -INF:
        return -INF
    res = prob.integrals(y, order=0)
    if res is None or not np.isfinite(res[0]):
        return -INF
    return lin - res[0]


def dual_gradient(prob: MomentProblem, y) -> np.ndarray:
    """x_C(y) - int theta gamma'(<y, theta>) dR."""
    y = np.asarray(y, dtype=float)
    if not prob.in_domain(y):
        raise DomainBoundary(f"y = {y} is outside the dual effective domain")
    _, g1, _ = prob.integrals(y, order=1)
    return prob.x_c(y, g1) - g1


# -- the solver --------------------------------------------------------------------------

@dataclass
class DualSolution:
    y: np.ndarray
    dual_value: float
    grad_norm: float
    iterations: int
    boundary_active: bool
    multiplier_active: np.ndarray
    status: str
    x_hat: np.ndarray = field(default=None)
    moments: np.ndarray = field(default=None)

    @property
    def ok(self) -> bool:
        return self.status in (CONVERGED, BOUNDARY_OPTIMUM)


def _coordinate_kind(lo, hi):
    if lo == hi:
        return "free"
    if np.isfinite(lo) and np.isfinite(hi):
        return "kink"
    if np.isfinite(lo):
        return "nonneg"
    if np.isfinite(hi):
        return "nonpos"
    return "zero"


def solve_dual(prob: MomentProblem, y0=None, tol=1e-10, max_iter=500,
               boundary_eps=1e-9) -> DualSolution:
    """Maximise the dual objective by projected damped Newton iterations."""
    K = prob.K
    kinds = [_coordinate_kind(a, b) for a, b in zip(prob.lo, prob.hi)]
    finite_x = np.concatenate([prob.lo[np.isfinite(prob.lo)], prob.hi[np.isfinite(prob.hi)]])
    gtol = tol * (1.0 + (np.linalg.norm(finite_x) if finite_x.size else 0.0))
    y = np.zeros(K) if y0 is None else np.array(y0, dtype=float)
    if prob.R.is_discrete and not primal_feasible(prob):
        return DualSolution(y=y, dual_value=INF, grad_norm=INF, iterations=0, boundary_active=False,
                            multiplier_active=np.zeros(K, bool), status=INFEASIBLE)
    for k, kind in enumerate(kinds):
        if kind == "zero" or (kind == "nonneg" and y[k] < 0) or (kind == "nonpos" and y[k] > 0):
            y[k] = 0.0
    halfspaces = prob.halfspaces
    value = dual_objective(prob, y)
    if not np.isfinite(value):
        raise ValueError("starting point is outside the dual domain")
    status = MAX_ITER
    gnorm = INF
    active_h: list[int] = []
    fixed = np.zeros(K, bool)
    it = 0
    for it in range(1, max_iter + 1):
        _, moments, _ = prob.integrals(y, order=1)
        x = prob.x_c(y, moments)
        g = x - moments
        if not np.all(np.isfinite(g)):
            status = BOUNDARY_OPTIMUM if active_h else MAX_ITER
            break
        # sign constraints and kinks at y_k = 0
        fixed = np.zeros(K, bool)
        for k, kind in enumerate(kinds):
            if kind == "zero":
                fixed[k] = True
            elif y[k] == 0 and kind != "free":
                up = kind in ("nonneg", "kink") and prob.lo[k] - moments[k] > 0
                down = kind in ("nonpos", "kink") and prob.hi[k] - moments[k] < 0
                if not (up or down):
                    fixed[k] = True
                    g[k] = 0.0
        # domain faces pushing the iterate outward
        active_h = []
        for j, h in enumerate(halfspaces):
            slack = h.bound - h.normal @ y
            scale = np.linalg.norm(h.normal)
            if slack <= boundary_eps * (1 + abs(h.bound)) * max(scale, 1.0) and h.normal @ g > 0:
                active_h.append(j)
        d = None
        for _ in range(K + 1):
            rows = [np.eye(K)[k] for k in np.flatnonzero(fixed)] + [halfspaces[j].normal for j in active_h]
            Z = linalg.null_space(np.array(rows)) if rows else np.eye(K)
            if Z.shape[1] == 0:
                d = np.zeros(K)
                break
            gz = Z.T @ g
            gnorm = float(np.linalg.norm(gz))
            if gnorm <= gtol:
                d = np.zeros(K)
                break
            try:
                _, _, H = prob.integrals(y, order=2, basis=Z)
            except QuadratureDivergence:
                H = np.full((Z.shape[1], Z.shape[1]), INF)  # curvature unresolved: plain ascent
            dz = None
            if np.all(np.isfinite(H)):
                try:
                    ev = np.linalg.eigvalsh(H)
                    if ev.min() > 1e-12 * max(ev.max(), 1e-300):
                        dz = np.linalg.solve(H, gz)
                except np.linalg.LinAlgError:
                    dz = None
            if dz is None:
                dz = gz
            d = Z @ dz
            # zero coordinates may only move in their ascent direction
            bad = [k for k, kind in enumerate(kinds)
                   if not fixed[k] and y[k] == 0 and kind != "free"
                   and ((prob.lo[k] - moments[k] > 0 and d[k] < 0) or (prob.hi[k] - moments[k] < 0 and d[k] > 0))]
            if not bad:
                break
            fixed[bad] = True
            g[bad] = 0.0
        if d is None or not np.any(d):
            status = BOUNDARY_OPTIMUM if active_h else CONVERGED
            break
        # longest admissible step
        t_max, hit = 1.0, None
        for k, kind in enumerate(kinds):
            if kind in ("nonneg", "nonpos", "kink") and y[k] != 0 and d[k] != 0 and np.sign(d[k]) != np.sign(y[k]):
                tk = -y[k] / d[k]
                if tk < t_max:
                    t_max, hit = tk, ("coord", k)
        for j, h in enumerate(halfspaces):
            nd = h.normal @ d
            if nd > 0 and j not in active_h:
                th = (h.bound - h.normal @ y) / nd
                if not h.closed:
                    th *= 0.99
                if th < t_max:
                    t_max, hit = max(th, 0.0), ("half", j)
        slope = float(g @ d)
        t = t_max
        accepted = False
        for _ in range(80):
            trial = y + t * d
            if hit is not None and t == t_max:
                trial = _snap(trial, hit, halfspaces)
            try:
                v = dual_objective(prob, trial)
            except QuadratureDivergence:
                v = -INF  # unresolvable trial point: treat as a failed step
            if np.isfinite(v) and v >= value + 1e-4 * t * slope - 1e-14 * (1 + abs(value)):
                accepted = True
                break
            t *= 0.5
            if t < 1e-18:
                break
        if not accepted:
            status = BOUNDARY_OPTIMUM if active_h else MAX_ITER
            gnorm = float(np.linalg.norm(g))
            break
        y, value = trial, v
        if value > 1.0 / tol or np.linalg.norm(y) > 1e8:
            status = INFEASIBLE
            break
    else:
        status = MAX_ITER
    _, moments, _ = prob.integrals(y, order=1)
    x_hat = prob.x_c(y, moments)
    multiplier_active = np.array([kinds[k] != "free" and y[k] == 0 for k in range(K)])
    return DualSolution(y=y, dual_value=float(value), grad_norm=float(gnorm), iterations=it,
                        boundary_active=bool(active_h), multiplier_active=multiplier_active,
                        status=status, x_hat=x_hat, moments=moments)


def primal_feasible(prob: MomentProblem) -> bool:
    """LP check for a density in the closed domain of gamma_star meeting the moments (discrete R)."""
    dom = prob.spec.dom_gamma_star
    A = (prob._Theta * prob.R.weights[:, None]).T
    lo, hi = prob.lo, prob.hi
    rows, rhs = [], []
    for k in range(prob.K):
        if np.isfinite(hi[k]):
            rows.append(A[k]); rhs.append(hi[k])
        if np.isfinite(lo[k]):
            rows.append(-A[k]); rhs.append(-lo[k])
    bounds = [(dom.lo if np.isfinite(dom.lo) else None, dom.hi if np.isfinite(dom.hi) else None)] * A.shape[1]
    lp = optimize.linprog(np.zeros(A.shape[1]), A_ub=np.array(rows) if rows else None,
                          b_ub=np.array(rhs) if rows else None, bounds=bounds, method="highs")
    return lp.status == 0


def _snap(y, hit, halfspaces):
    y = y.copy()
    kind, idx = hit
    if kind == "coord":
        y[idx] = 0.0
    else:
        h = halfspaces[idx]
        if h.closed:
            y = y - (h.normal @ y - h.bound) / (h.normal @ h.normal) * h.normal
            if h.normal @ y > h.bound:
                y = np.nextafter(y, -np.sign(h.normal) * INF)
    return y


# -- primal side -----------------------------------------------------------------------------

class PrimalDensity:
    """z -> gamma'(<y, theta(z)>), a density with respect to R."""

    def __init__(self, prob: MomentProblem, y):
        self.prob = prob
        self.y = np.asarray(y, dtype=float)

    def u(self, z=None):
        if self.prob.R.is_discrete:
            return self.prob.u_on_grid(self.y)
        return self.prob.u_poly(self.y)(np.asarray(z, dtype=float))

    def __call__(self, z=None):
        return self.prob.spec.gamma_prime(self.u(z))

    def log(self, z=None):
        """log of the density; only meaningful for relative entropy."""
        return self.u(z)

    @property
    def values(self):
        """Density values on the points of a discrete R."""
        return self()


def reconstruct_primal(prob: MomentProblem, sol: DualSolution) -> PrimalDensity:
    if sol.status not in (CONVERGED, BOUNDARY_OPTIMUM):
        raise ValueError(f"cannot reconstruct from a {sol.status} solution")
    return PrimalDensity(prob, sol.y)


def primal_entropy(prob: MomentProblem, f) -> float:
    """int gamma_star(f) dR for a PrimalDensity, callable or array of grid values."""
    spec, R = prob.spec, prob.R
    if R.is_discrete:
        vals = f.values if isinstance(f, PrimalDensity) else (
            np.asarray(f(R.points) if callable(f) else f, dtype=float))
        return float(R.weights @ spec.gamma_star(vals))
    if isinstance(f, PrimalDensity) and spec.name == "relative":
        poly = prob.u_poly(f.y)

        # f log f - f + 1 with f = exp(u), scaled by exp(max(u, 0))
        def integrand(z):
            u = poly(z)
            s = np.maximum(u, 0.0)
            return np.exp(u - s) * (u - 1.0) + np.exp(-s)

        return float(R.integrate(integrand, log_factor=lambda z: np.maximum(poly(z), 0.0)))
    if not np.all(np.isfinite(spec.gamma_star(f(np.linspace(*_probe_range(R), 257))))):
        return INF
    return float(R.integrate(lambda z: spec.gamma_star(f(z))))


def _probe_range(R):
    lo, hi = R.support
    lo = lo if np.isfinite(lo) else -50.0
    hi = hi if np.isfinite(hi) else lo + 100.0
    return lo, hi


@dataclass
class FenchelResiduals:
    dual_equality_gap: float
    d3_gap: float


def fenchel_residuals(prob: MomentProblem, sol: DualSolution, f: PrimalDensity) -> FenchelResiduals:
    entropy = primal_entropy(prob, f)
    g0, g1, _ = prob.integrals(sol.y, order=1)
    pairing = float(sol.y @ g1)  # int <y, theta> f dR
    return FenchelResiduals(dual_equality_gap=abs(entropy - sol.dual_value),
                            d3_gap=abs(entropy + g0 - pairing))


# -- brute-force primal oracle -------------------------------------------------------------

@dataclass
class PrimalResult:
    f: np.ndarray | None
    value: float
    feasible: bool


def brute_force_primal(prob: MomentProblem, rng=None, starts=100, max_steps=4000,
                       resolution=1e-7) -> PrimalResult:
    """Directly minimise sum_j gamma_star(f_j) r_j under the moment constraints.

    Small discrete instances only. Inequality constraints are handled by
    enumerating which of them bind; each equality-constrained subproblem is
    solved by projected gradient descent in the null space of the active
    moments from random interior starts, then polished by a coordinate
    search down to ``resolution``.
    """
    R = prob.R
    if not R.is_discrete or R.points.size > 12 or prob.K > 3:
        raise ValueError("brute force needs a discrete measure with <= 12 points and K <= 3")
    rng = np.random.default_rng(0) if rng is None else rng
    spec = prob.spec
    A = (prob._Theta * R.weights[:, None]).T  # (K, n): x = A f
    lo, hi = prob.lo, prob.hi
    dom = spec.dom_gamma_star
    choices = []
    for k in range(prob.K):
        if lo[k] == hi[k]:
            choices.append([("eq", lo[k])])
        else:
            opts = [("free", None)]
            if np.isfinite(lo[k]):
                opts.append(("eq", lo[k]))
            if np.isfinite(hi[k]):
                opts.append(("eq", hi[k]))
            choices.append(opts)
    best = PrimalResult(None, INF, False)
    for combo in itertools.product(*choices):
        rows = [k for k, (kind, _) in enumerate(combo) if kind == "eq"]
        target = np.array([combo[k][1] for k in rows])
        res = _equality_subproblem(spec, R.weights, A[rows], target, dom, rng, starts, max_steps, resolution)
        if res is None:
            continue
        f, val = res
        x = A @ f
        if np.all(x >= lo - 1e-7) and np.all(x <= hi + 1e-7):
            if val < best.value - 1e-12 or (abs(val - best.value) <= 1e-12 and tuple(f) < tuple(best.f)):
                best = PrimalResult(f, val, True)
    return best


def _equality_subproblem(spec, w, A, b, dom, rng, starts, max_steps, resolution):
    n = w.size
    lo_f = dom.lo if np.isfinite(dom.lo) else -1e6
    hi_f = dom.hi if np.isfinite(dom.hi) else 1e6
    # strictly interior feasible point: maximise the margin t
    if A.shape[0]:
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.vstack([np.hstack([-np.eye(n), np.ones((n, 1))]), np.hstack([np.eye(n), np.ones((n, 1))])])
        b_ub = np.concatenate([-np.full(n, lo_f), np.full(n, hi_f)])
        A_eq = np.hstack([A, np.zeros((A.shape[0], 1))])
        lp = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b,
                              bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
        if lp.status != 0 or lp.x[-1] <= 1e-9:
            return None
        center = lp.x[:n]
        N = linalg.null_space(A)
    else:
        center = np.full(n, 0.5 * (max(lo_f, -1.0) + min(hi_f, 1.0)) if spec.m == 0 else spec.m)
        N = np.eye(n)

    def objective(f):
        return float(w @ spec.gamma_star(f))

    def objective_rows(F):
        return spec.gamma_star(F) @ w

    def inside_rows(F):
        return np.all(dom.interior(F), axis=1)

    if N.shape[1] == 0:
        return center, objective(center)

    # all starts descend together, one row each
    F = center + 0.5 * (rng.normal(size=(starts, N.shape[1])) @ N.T) * min(1.0, _margin(center, dom))
    for _ in range(60):
        out = ~inside_rows(F)
        if not out.any():
            break
        F[out] = center + 0.5 * (F[out] - center)
    F[~inside_rows(F)] = center
    V = objective_rows(F)
    step = np.ones(starts)
    live = np.ones(starts, bool)
    prev_F, prev_G = F.copy(), np.zeros_like(F)
    best_seen = float(V.min())
    for it in range(max_steps):
        if not live.any():
            break
        # rows creeping along a barrier can stall; the coordinate search finishes the job
        if it % 50 == 49:
            if float(V.min()) > best_seen - 1e-14 * (1 + abs(best_seen)):
                break
            best_seen = float(V.min())
        idx = np.flatnonzero(live)
        G = (w * _gamma_star_prime(spec, F[idx])) @ N @ N.T
        gn2 = np.einsum("ij,ij->i", G, G)
        # Barzilai-Borwein step from the previous accepted move
        ds, dg = F[idx] - prev_F[idx], G - prev_G[idx]
        sy = np.einsum("ij,ij->i", ds, dg)
        bb = sy > 0
        step[idx[bb]] = np.clip(np.einsum("ij,ij->i", ds, ds)[bb] / sy[bb], 1e-12, 1e6)
        prev_F[idx], prev_G[idx] = F[idx], G
        live[idx[gn2 < 1e-26]] = False
        keep = gn2 >= 1e-26
        rows, G, gn2 = idx[keep], G[keep], gn2[keep]
        while rows.size:
            cand = F[rows] - step[rows, None] * G
            ok = inside_rows(cand)
            cv = np.full(rows.size, INF)
            cv[ok] = objective_rows(cand[ok])
            accept = cv <= V[rows] - 1e-4 * step[rows] * gn2
            F[rows[accept]] = cand[accept]
            V[rows[accept]] = cv[accept]
            step[rows[~accept]] *= 0.5
            stuck = ~accept & (step[rows] < 1e-16)
            live[rows[stuck]] = False
            retry = ~accept & ~stuck
            rows, G, gn2 = rows[retry], G[retry], gn2[retry]
    j = int(np.argmin(V))
    f, v = _coordinate_search(F[j], float(V[j]), N, objective_rows, inside_rows, resolution)
    return f, v


def _margin(f, dom):
    m = np.inf
    if np.isfinite(dom.lo):
        m = min(m, float(np.min(f - dom.lo)))
    if np.isfinite(dom.hi):
        m = min(m, float(np.min(dom.hi - f)))
    return m


def _coordinate_search(f, v, N, objective_rows, inside_rows, resolution):
    """Pattern search along +-N[:, j], halving the stride down to ``resolution``."""
    moves = np.vstack([N.T, -N.T])
    h = 1e-3
    while h >= resolution:
        while True:
            cand = f + h * moves
            ok = inside_rows(cand)
            vals = np.full(len(cand), INF)
            vals[ok] = objective_rows(cand[ok])
            j = int(np.argmin(vals))
            if not vals[j] < v:
                break
            f, v = cand[j], float(vals[j])
        h *= 0.5
    return f, v


def _gamma_star_prime(spec: EntropySpec, t):
    t = np.asarray(t, dtype=float)
    name = spec.name
    if name == "relative":
        return np.log(t)
    if name == "reverse_relative":
        return 1.0 - 1.0 / t
    if name == "fermi_dirac":
        return np.arctanh(t)
    if name == "lp_norm":
        return np.sign(t) * np.abs(t) ** (spec.p - 1)
    return np.maximum(t, 0.0) ** (spec.p - 1)
