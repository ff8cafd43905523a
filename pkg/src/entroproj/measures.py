"""Reference measures, test functions, Luxemburg norms and integrability probes.

Two kinds of bounded reference measure are supported: a finite weighted grid
(:class:`DiscreteMeasure`) and a cataloged one-dimensional density
(:class:`Density1D`). Test functions on densities are polynomials, which lets
the integrability of ``exp(poly(z))`` against the density be decided exactly
from tail exponents instead of from truncated integrals.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from .entropies import EntropySpec, lambda_diamond_eval
from .errors import InvalidConfig, NonIntegrable
from .quadrature import integrate_adaptive

INF = np.inf
_ZERO_COEF = 1e-12  # linear terms: absorbs round-off when y sits on a domain edge
_ZERO_COEF_HIGH = 1e-15  # higher powers have no edge to snap to


# -- test functions ----------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A real function on the support of a reference measure.

    ``kind`` is one of ``identity``, ``power``, ``affine`` or ``grid_values``.
    ``params`` holds ``(k,)`` for power and ``(a, b)`` for ``a + b*z``;
    grid values are matched to the points of the measure they are used with.
    """

    __test__ = False  # not a pytest class

    kind: str
    params: tuple = ()
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "power", "affine", "grid_values", "polynomial"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "grid_values" and self.values is None:
            raise ValueError("grid_values needs values")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def power(cls, k: int):
        return cls("power", (int(k),))

    @classmethod
    def affine(cls, a: float, b: float):
        return cls("affine", (float(a), float(b)))

    @classmethod
    def constant(cls, c: float = 1.0):
        return cls("affine", (float(c), 0.0))

    @classmethod
    def polynomial(cls, coefs):
        """Internal kind for linear combinations of polynomial test functions."""
        return cls("polynomial", tuple(float(c) for c in coefs))

    @classmethod
    def grid(cls, values):
        vals = tuple(float(v) for v in values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("grid values must be finite")
        return cls("grid_values", values=vals)

    @classmethod
    def from_csv(cls, path, measure: "DiscreteMeasure"):
        z, v = _read_two_columns(path, ("z", "value"))
        if z.size != measure.points.size or not np.allclose(z, measure.points, rtol=0, atol=1e-12):
            raise InvalidConfig(f"{path}: z column does not match the measure's points")
        return cls.grid(v)

    @property
    def poly(self) -> Polynomial | None:
        if self.kind == "identity":
            return Polynomial([0.0, 1.0])
        if self.kind == "power":
            return Polynomial([0.0] * self.params[0] + [1.0])
        if self.kind in ("affine", "polynomial"):
            return Polynomial(list(self.params))
        return None

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "grid_values":
            raise TypeError("grid_values test functions are evaluated through values_on(measure)")
        return self.poly(z)

    def values_on(self, measure: "DiscreteMeasure") -> np.ndarray:
        if self.kind == "grid_values":
            if len(self.values) != measure.points.size:
                raise ValueError(
                    f"grid has {len(self.values)} values but the measure has {measure.points.size} points")
            return np.array(self.values)
        return self(measure.points)

    def scaled(self, alpha: float) -> "TestFunction":
        if self.kind == "grid_values":
            return TestFunction.grid(alpha * np.array(self.values))
        return TestFunction.polynomial(alpha * self.poly.coef)


def combine(theta, y) -> TestFunction:
    """The test function z -> <y, theta(z)>."""
    y = np.asarray(y, dtype=float)
    if any(t.kind == "grid_values" for t in theta):
        raise TypeError("combine grid functions through values_on")
    poly = Polynomial([0.0])
    for yk, tk in zip(y, theta):
        poly = poly + yk * tk.poly
    return TestFunction.polynomial(poly.coef)


# -- Young functions -----------------------------------------------------------

@dataclass(frozen=True)
class YoungFunction:
    """Even convex function rho with rho(0) = 0.

    ``growth`` drives integrability decisions on densities: ``exp`` (grows like
    ``exp|s|``), ``barrier`` (finite only for ``|s| < radius``) or ``poly``.
    ``split`` optionally returns ``(f, log_scale)`` with ``rho = f*exp(log_scale)``
    so that tails are integrated without overflow.
    """

    name: str
    func: Callable
    growth: str = "poly"
    radius: float = INF
    split: Callable | None = None

    def __call__(self, s):
        return self.func(s)

    def conjugate(self) -> "YoungFunction":
        """Numerical convex conjugate rho*(t) = sup_s {s t - rho(s)}."""
        return YoungFunction(f"{self.name}*", _NumericConjugate(self), growth="poly")


class _NumericConjugate:
    def __init__(self, rho: YoungFunction):
        self.rho = rho
        self._cache: dict[float, float] = {}

    def _one(self, t: float) -> float:
        t = abs(t)
        if t == 0.0:
            return 0.0
        if t in self._cache:
            return self._cache[t]
        rho = self.rho

        def neg(s):
            v = float(rho(s))
            return -(s * t - v) if math.isfinite(v) else INF

        hi = 1.0
        while math.isfinite(neg(hi)) and neg(2 * hi) < neg(hi) and hi < min(rho.radius, 1e12):
            hi *= 2
        if rho.radius < INF:
            hi = min(2 * hi, rho.radius)
        res = optimize.minimize_scalar(neg, bounds=(0.0, hi * (1 - 1e-15) if rho.radius < INF else 2 * hi),
                                       method="bounded", options={"xatol": 1e-13, "maxiter": 500})
        val = -float(res.fun)
        self._cache[t] = val
        return val

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([self._one(v) for v in arr.ravel()]).reshape(arr.shape)
        return float(out[0]) if scalar else out


def young_power(p: float) -> YoungFunction:
    """rho_p(s) = |s|^p / p."""
    return YoungFunction(f"rho_{p:g}", lambda s: np.abs(np.asarray(s, dtype=float)) ** p / p)


def young_from_entropy(spec: EntropySpec) -> YoungFunction:
    """The symmetrised Young function lam_diamond of a catalog entropy."""
    growth = spec.growth
    split = None
    if spec.name == "relative":
        def split(s):
            a = np.abs(np.asarray(s, dtype=float))
            # exp(a) - a - 1 = exp(a) * (1 - (1 + a) exp(-a))
            return -np.expm1(-a) - a * np.exp(-a), a
    return YoungFunction(f"lam_diamond[{spec}]", lambda s: lambda_diamond_eval(spec, s),
                         growth=growth, radius=1.0 if growth == "barrier" else INF, split=split)


# -- measures ------------------------------------------------------------------

def _read_two_columns(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != list(header):
        raise InvalidConfig(f"{path}: expected header {','.join(header)}")
    a, b = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InvalidConfig(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError as exc:
            raise InvalidConfig(f"{path}:{lineno}: {exc}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidConfig(f"{path}:{lineno}: non-finite value")
        a.append(x)
        b.append(y)
    if not a:
        raise InvalidConfig(f"{path}: no data rows")
    return np.array(a), np.array(b)


class DiscreteMeasure:
    """R = sum_j r_j delta_{z_j} with r_j > 0."""

    is_discrete = True

    def __init__(self, points, weights):
        points = np.asarray(points, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if points.size < 1 or points.size != weights.size:
            raise ValueError("points and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
            raise ValueError("points and weights must be finite")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        self.points = points
        self.weights = weights
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def from_csv(cls, path):
        z, w = _read_two_columns(path, ("z", "weight"))
        if np.any(w <= 0):
            raise InvalidConfig(f"{path}: weights must be positive")
        return cls(z, w)

    def __repr__(self):
        return f"DiscreteMeasure(n={self.points.size}, mass={self.mass:.6g})"

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self):
        return float(self.points.min()), float(self.points.max())

    def integrate(self, f, lo=None, hi=None, log_factor=None, breaks=()):
        """Weighted sum of f (optionally times exp(log_factor)) over the grid."""
        z = self.points
        w = self.weights
        if lo is not None or hi is not None:
            mask = np.ones(z.size, dtype=bool)
            if lo is not None:
                mask &= z >= lo
            if hi is not None:
                mask &= z < hi
            z, w = z[mask], w[mask]
        vals = np.asarray(f(z), dtype=float)
        if log_factor is not None:
            scale = np.exp(np.asarray(log_factor(z), dtype=float))
            vals = vals * scale.reshape((-1,) + (1,) * (vals.ndim - 1))
        return np.tensordot(w, vals, axes=(0, 0)) if vals.ndim > 1 else float(w @ vals)

    def tail_finite(self, poly, power=0) -> bool:
        return True

    def sup_on_support(self, values) -> float:
        return float(np.max(values))

    def sample(self, rng, size):
        idx = rng.choice(self.points.size, size=size, p=self.weights / self.mass)
        return self.points[idx]


@dataclass(frozen=True)
class QuadratureRule:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-11
    max_subdivisions: int = 2000


@dataclass(frozen=True)
class Density1D:
    """A cataloged density on the line.

    family: ``exponential`` (rate), ``csiszar`` (a, b) with kernel
    ``exp(-a z)/(1+z^b)`` on [0, inf), ``gaussian`` (mu, sigma) or ``uniform``
    (lo, hi). Unnormalised kernels are ``exp(-rate z)``, the csiszar kernel,
    ``exp(-(z-mu)^2/(2 sigma^2))`` and 1.
    """

    family: str
    params: tuple
    normalized: bool = True
    quadrature: QuadratureRule = field(default_factory=QuadratureRule)

    is_discrete = False

    def __post_init__(self):
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        fam = self.family
        if fam == "exponential":
            ok = len(p) == 1 and p[0] > 0
        elif fam == "csiszar":
            ok = len(p) == 2 and p[0] > 0 and p[1] > 1
        elif fam == "gaussian":
            ok = len(p) == 2 and p[1] > 0
        elif fam == "uniform":
            ok = len(p) == 2 and p[0] < p[1]
        else:
            raise ValueError(f"unknown density family {fam!r}")
        if not ok:
            raise ValueError(f"invalid parameters {p} for {fam}")
        object.__setattr__(self, "_log_norm", self._compute_log_norm() if self.normalized else 0.0)

    # constructors
    @classmethod
    def exponential(cls, rate=1.0, **kw):
        return cls("exponential", (rate,), **kw)

    @classmethod
    def csiszar(cls, a=1.0, b=3.0, normalized=True, **kw):
        return cls("csiszar", (a, b), normalized=normalized, **kw)

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0, **kw):
        return cls("gaussian", (mu, sigma), **kw)

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0, **kw):
        return cls("uniform", (lo, hi), **kw)

    def __repr__(self):
        args = ", ".join(f"{v:g}" for v in self.params)
        return f"{self.family}({args}{'' if self.normalized else ', unnormalized'})"

    @property
    def support(self):
        if self.family in ("exponential", "csiszar"):
            return 0.0, INF
        if self.family == "gaussian":
            return -INF, INF
        return self.params

    def _log_kernel(self, z):
        z = np.asarray(z, dtype=float)
        fam, p = self.family, self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam == "exponential":
                out = -p[0] * z
                if self.normalized:
                    out = out + math.log(p[0])
            elif fam == "csiszar":
                out = -p[0] * z - np.log1p(z ** p[1])
            elif fam == "gaussian":
                out = -0.5 * ((z - p[0]) / p[1]) ** 2
            else:
                out = np.zeros_like(z)
        lo, hi = self.support
        return np.where((z >= lo) & (z <= hi), out, -INF)

    def _compute_log_norm(self):
        fam, p = self.family, self.params
        if fam == "exponential":
            return 0.0  # already folded into the kernel
        if fam == "gaussian":
            return -math.log(p[1] * math.sqrt(2 * math.pi))
        if fam == "uniform":
            return -math.log(p[1] - p[0])
        mass, _ = integrate_adaptive(lambda z: np.exp(self._log_kernel(z)), 0.0, INF,
                                     self.quadrature.abs_tol, self.quadrature.rel_tol,
                                     self.quadrature.max_subdivisions)
        return -math.log(mass)

    def logpdf(self, z):
        return self._log_kernel(z) + self._log_norm

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    @property
    def mass(self) -> float:
        return float(self.integrate(lambda z: np.ones_like(z)))

    def _pieces(self, lo, hi):
        """Breakpoints that help the adaptive rule resolve bulk and tail."""
        fam, p = self.family, self.params
        if fam in ("exponential", "csiszar"):
            scale = 1.0 / p[0]
            marks = [0.0, 0.5 * scale, 2 * scale, 8 * scale, 32 * scale]
        elif fam == "gaussian":
            marks = [p[0] + k * p[1] for k in (-8, -3, -1, 0, 1, 3, 8)]
        else:
            marks = list(p)
        cuts = [lo] + [m for m in marks if lo < m < hi] + [hi]
        return list(zip(cuts[:-1], cuts[1:]))

    def integrate(self, f, lo=None, hi=None, log_factor=None, breaks=()):
        """Integral of f(z) [* exp(log_factor(z))] against the density over [lo, hi).

        ``breaks`` are extra cut points, e.g. where a tilted integrand concentrates.
        A Polynomial ``log_factor`` declares the exponential growth rate, which is
        checked against the tails first.
        """
        if isinstance(log_factor, Polynomial) and not self.tail_finite(log_factor):
            raise NonIntegrable(f"exp({log_factor}) is not integrable against {self!r}")
        s_lo, s_hi = self.support
        lo = s_lo if lo is None else max(lo, s_lo)
        hi = s_hi if hi is None else min(hi, s_hi)
        if lo >= hi:
            return 0.0

        def integrand(z):
            vals = np.asarray(f(z), dtype=float)
            logw = self.logpdf(z)
            if log_factor is not None:
                logw = logw + np.asarray(log_factor(z), dtype=float)
            with np.errstate(invalid="ignore", over="ignore"):
                w = np.exp(logw).reshape((-1,) + (1,) * (vals.ndim - 1))
                out = vals * w
            # a vanishing weight kills any finite or overflowing factor
            return np.where(w == 0.0, 0.0, out)

        q = self.quadrature
        total = 0.0
        pieces = self._pieces(lo, hi)
        if len(breaks):
            cuts = sorted({lo, hi, *(a for a, _ in pieces), *(x for x in breaks if lo < x < hi)})
            pieces = list(zip(cuts[:-1], cuts[1:]))
        for a, b in pieces:
            val, _ = integrate_adaptive(integrand, a, b, q.abs_tol, q.rel_tol, q.max_subdivisions)
            total = total + val
        return total

    # -- tails ------------------------------------------------------------

    def _tails(self):
        """(direction, log-kernel polynomial, power) per unbounded end of the support."""
        fam, p = self.family, self.params
        if fam == "exponential":
            return [(+1, Polynomial([0.0, -p[0]]), 0.0)]
        if fam == "csiszar":
            return [(+1, Polynomial([0.0, -p[0]]), -p[1])]
        if fam == "gaussian":
            mu, s = p
            quad = Polynomial([-mu * mu, 2 * mu, -1.0]) / (2 * s * s)
            return [(+1, quad, 0.0), (-1, quad, 0.0)]
        return []

    def tail_finite(self, poly, power=0) -> bool:
        """Is the integral of (1+|z|)^power * exp(poly(z)) against the density finite?"""
        poly = Polynomial(poly) if not isinstance(poly, Polynomial) else poly
        for direction, log_kernel, kernel_power in self._tails():
            v = poly + log_kernel
            coefs = v.coef
            scale = max(1.0, float(np.max(np.abs(coefs))))
            lead_sign = 0
            for deg in range(coefs.size - 1, 0, -1):
                c = coefs[deg]
                if abs(c) > (_ZERO_COEF if deg == 1 else _ZERO_COEF_HIGH) * scale:
                    lead_sign = np.sign(c) * (direction ** deg)
                    break
            if lead_sign > 0:
                return False
            if lead_sign == 0 and power + kernel_power >= -1:
                return False
        return True

    def sup_on_support(self, poly) -> float:
        """Essential supremum of a polynomial over the support."""
        poly = Polynomial(poly) if not isinstance(poly, Polynomial) else poly
        lo, hi = self.support
        coefs = poly.coef
        deg = coefs.size - 1
        while deg > 0 and coefs[deg] == 0:
            deg -= 1
        if deg > 0:
            if not np.isfinite(hi) and coefs[deg] > 0:
                return INF
            if not np.isfinite(lo) and coefs[deg] * (-1) ** deg > 0:
                return INF
        cands = [x for x in (lo, hi) if np.isfinite(x)]
        if deg > 1:
            roots = poly.deriv().roots()
            cands += [r.real for r in roots if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        if not cands:
            return float(coefs[0])
        return float(np.max(poly(np.array(cands))))

    @property
    def truncation_point(self) -> float:
        """Right end of the output grid for tabulated densities."""
        fam, p = self.family, self.params
        if fam == "exponential":
            return 40.0 / p[0]
        if fam == "csiszar":
            return 1e6
        if fam == "gaussian":
            return p[0] + 12 * p[1]
        return p[1]

    def sample(self, rng, size):
        fam, p = self.family, self.params
        if fam == "exponential":
            return rng.exponential(1.0 / p[0], size)
        if fam == "gaussian":
            return rng.normal(p[0], p[1], size)
        if fam == "uniform":
            return rng.uniform(p[0], p[1], size)
        return sample_csiszar(rng, size, p[0], p[1])


def sample_csiszar(rng, size, a=1.0, b=3.0, tilt=0.0):
    """Draw from the density proportional to exp((tilt - a) z)/(1 + z^b), tilt < a.

    Acceptance-rejection against the exponential law with rate ``a - tilt``.
    """
    rate = a - tilt
    if not rate > 0:
        raise ValueError("the exponential envelope needs tilt < a")
    size = int(np.prod(size)) if np.ndim(size) else int(size)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        batch = int(need * 1.5) + 16
        z = rng.exponential(1.0 / rate, batch)
        keep = z[rng.random(batch) * (1.0 + z ** b) < 1.0]
        take = min(keep.size, need)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


Measure = DiscreteMeasure | Density1D


# -- integrals of test functions ----------------------------------------------

def integrate(R, f, lo=None, hi=None):
    """Integral of a TestFunction or a vectorised callable against R."""
    if isinstance(f, TestFunction):
        if R.is_discrete:
            vals = f.values_on(R)
            w = R.weights
            if lo is not None or hi is not None:
                m = np.ones(vals.size, bool)
                if lo is not None:
                    m &= R.points >= lo
                if hi is not None:
                    m &= R.points < hi
                return float(w[m] @ vals[m])
            return float(w @ vals)
        poly = f.poly
        if not R.tail_finite(Polynomial([0.0]), power=poly.degree()):
            raise NonIntegrable(f"{f} is not integrable against {R}")
        return float(R.integrate(poly, lo, hi))
    return R.integrate(f, lo, hi)


def young_integral(rho: YoungFunction, u: TestFunction, R, scale: float = 1.0) -> float:
    """Integral of rho(scale * u) dR, +inf when it diverges."""
    if R.is_discrete:
        return float(R.weights @ rho(scale * u.values_on(R)))
    poly = scale * u.poly
    if rho.growth == "exp":
        if not (R.tail_finite(poly) and R.tail_finite(-poly)):
            return INF
    elif rho.growth == "barrier":
        if max(R.sup_on_support(poly), R.sup_on_support(-poly)) >= rho.radius:
            return INF
    if rho.split is not None:
        def f(z):
            return rho.split(poly(z))[0]

        def logf(z):
            return rho.split(poly(z))[1]
        return float(R.integrate(f, log_factor=logf))
    return float(R.integrate(lambda z: rho(poly(z))))


def luxemburg_norm(u: TestFunction, rho: YoungFunction, R, lo=1e-12, hi=1e12,
                   iterations=200, rel_width=1e-12) -> float:
    """inf{beta > 0 : int rho(u/beta) dR <= 1} by bisection in log(beta)."""
    if R.is_discrete:
        if np.all(u.values_on(R) == 0):
            return 0.0
    elif np.all(u.poly.coef == 0):
        return 0.0

    def ok(beta):
        return young_integral(rho, u, R, 1.0 / beta) <= 1.0

    if not ok(hi):
        return INF
    if ok(lo):
        return lo
    a, b = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if ok(math.exp(mid)):
            b = mid
        else:
            a = mid
        if b - a <= rel_width:
            break
    return math.exp(b)


def holder_residual(u: TestFunction, v: TestFunction, rho: YoungFunction, R) -> float:
    """2 ||u||_rho ||v||_rho* - int |u v| dR, nonnegative by Hölder."""
    nu = luxemburg_norm(u, rho, R)
    if nu == 0.0:
        return 0.0
    nv = luxemburg_norm(v, rho.conjugate(), R)
    if R.is_discrete:
        uv = float(R.weights @ np.abs(u.values_on(R) * v.values_on(R)))
    else:
        pu, pv = u.poly, v.poly
        uv = float(R.integrate(lambda z: np.abs(pu(z) * pv(z))))
    return 2.0 * nu * nv - uv


SMALL_ORLICZ = "small_orlicz"
ORLICZ_ONLY = "orlicz_only"
OUTSIDE = "outside"


def integrability_class(u: TestFunction, spec: EntropySpec, R) -> str:
    """Classify u by where int lam_diamond(alpha u) dR is finite on alpha = 2^k, |k| <= 10."""
    if R.is_discrete:
        return SMALL_ORLICZ
    rho = young_from_entropy(spec)
    finite = []
    for k in range(-10, 11):
        alpha = 2.0 ** k
        poly = alpha * u.poly
        if rho.growth == "exp":
            ok = R.tail_finite(poly) and R.tail_finite(-poly)
        elif rho.growth == "barrier":
            ok = max(R.sup_on_support(poly), R.sup_on_support(-poly)) < rho.radius
        else:
            ok = True
        finite.append(ok)
    if all(finite):
        return SMALL_ORLICZ
    if any(finite):
        return ORLICZ_ONLY
    return OUTSIDE


def mellin_one_plus_cube(s: float) -> float:
    """Closed form of int_0^inf z^(s-1)/(1+z^3) dz for 0 < s < 3."""
    return (math.pi / 3) / math.sin(s * math.pi / 3)

