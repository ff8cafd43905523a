"""Catalog of entropy integrands and the scalar functions derived from them.

Each entry is a convex integrand ``gamma_star`` (the Cramér transform of a
weight law), its convex conjugate ``gamma``, the derivatives of ``gamma``,
the centred function ``lam(s) = gamma(s) - m*s`` and its symmetrisation
``lam_diamond(s) = max(lam(s), lam(-s))``.

All evaluators accept scalars or arrays and return ``numpy.inf`` outside
effective domains; nothing relies on floating point overflow to signal it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import xlogy

from .errors import DomainBoundary

INF = np.inf

ENTROPY_NAMES = ("relative", "reverse_relative", "fermi_dirac", "lp_norm", "lp_entropy")


class Interval(NamedTuple):
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above & below

    def interior(self, x):
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)


REAL_LINE = Interval(-INF, INF, False, False)


@dataclass(frozen=True)
class EntropySpec:
    """A named catalog entropy. ``p`` is only used by the two L_p entries."""

    name: str
    p: float | None = None

    def __post_init__(self):
        if self.name not in ENTROPY_NAMES:
            raise ValueError(f"unknown entropy {self.name!r}; expected one of {ENTROPY_NAMES}")
        if self.name in ("lp_norm", "lp_entropy"):
            if self.p is None or not self.p > 1:
                raise ValueError(f"{self.name} needs an exponent p > 1, got {self.p!r}")
        elif self.p is not None:
            raise ValueError(f"{self.name} takes no exponent")

    @property
    def q(self) -> float | None:
        if self.p is None:
            return None
        return self.p / (self.p - 1.0)

    @property
    def m(self) -> float:
        """Location of the minimum of gamma_star."""
        return 1.0 if self.name in ("relative", "reverse_relative") else 0.0

    @property
    def dom_gamma(self) -> Interval:
        if self.name == "reverse_relative":
            return Interval(-INF, 1.0, False, False)
        return REAL_LINE

    @property
    def dom_gamma_star(self) -> Interval:
        return {
            "relative": Interval(0.0, INF, True, False),
            "reverse_relative": Interval(0.0, INF, False, False),
            "fermi_dirac": Interval(-1.0, 1.0, True, True),
            "lp_norm": REAL_LINE,
            "lp_entropy": Interval(0.0, INF, True, False),
        }[self.name]

    @property
    def superlinear(self) -> bool:
        """gamma_star(t)/|t| -> infinity as |t| -> infinity."""
        return self.name != "reverse_relative"

    @property
    def delta2(self) -> bool:
        """Whether lam_diamond satisfies the Delta_2 growth condition."""
        return self.name in ("fermi_dirac", "lp_norm", "lp_entropy")

    @property
    def delta2_constant(self) -> float:
        """A constant kappa with lam_diamond(2s) <= kappa*lam_diamond(s) for s >= 1."""
        if self.name in ("lp_norm", "lp_entropy"):
            return 2.0 ** self.q + 1.0
        if self.name == "fermi_dirac":
            # log cosh(2s)/log cosh(s) peaks just above 3 near s = 1
            return 4.0
        return INF

    @property
    def growth(self) -> str:
        """Growth class of gamma at infinity: 'exp', 'barrier' or 'poly'."""
        return {"relative": "exp", "reverse_relative": "barrier"}.get(self.name, "poly")

    def __str__(self):
        return self.name if self.p is None else f"{self.name}(p={self.p:g})"

    # -- evaluators -------------------------------------------------------

    def gamma_star(self, t):
        return gamma_star_eval(self, t)

    def gamma(self, s):
        return gamma_eval(self, s)

    def gamma_prime(self, s):
        return gamma_prime_eval(self, s)

    def gamma_second(self, s):
        return gamma_second_eval(self, s)

    def lam(self, s):
        return lambda_eval(self, s)

    def lam_diamond(self, s):
        return lambda_diamond_eval(self, s)


def _out(x, scalar):
    return float(x) if scalar else x


def gamma_star_eval(spec: EntropySpec, t):
    """gamma_star(t), +inf outside its effective domain."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, INF)
    name = spec.name
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if name == "relative":
            ok = t >= 0
            tt = t[ok]
            out[ok] = xlogy(tt, tt) - tt + 1.0
        elif name == "reverse_relative":
            ok = t > 0
            tt = t[ok]
            out[ok] = tt - np.log(tt) - 1.0
        elif name == "fermi_dirac":
            ok = np.abs(t) <= 1
            tt = t[ok]
            out[ok] = 0.5 * (xlogy(1 + tt, 1 + tt) + xlogy(1 - tt, 1 - tt))
        elif name == "lp_norm":
            out = np.abs(t) ** spec.p / spec.p
        else:
            ok = t >= 0
            out[ok] = t[ok] ** spec.p / spec.p
    return _out(out, scalar)


def gamma_eval(spec: EntropySpec, s):
    """gamma(s) = sup_t {s t - gamma_star(t)}, in closed form."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    name = spec.name
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if name == "relative":
            out = np.expm1(s)
        elif name == "reverse_relative":
            out = np.full(s.shape, INF)
            ok = s < 1
            out[ok] = -np.log1p(-s[ok])
        elif name == "fermi_dirac":
            a = np.abs(s)
            out = a + np.log1p(np.exp(-2 * a)) - np.log(2.0)
        elif name == "lp_norm":
            out = np.abs(s) ** spec.q / spec.q
        else:
            out = np.maximum(s, 0.0) ** spec.q / spec.q
    return _out(out, scalar)


def gamma_prime_eval(spec: EntropySpec, s):
    """Derivative of gamma; raises DomainBoundary outside the interior of dom gamma."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if not np.all(spec.dom_gamma.interior(s)):
        raise DomainBoundary(f"gamma' of {spec} undefined at {s[~spec.dom_gamma.interior(s)][:3]}")
    name = spec.name
    with np.errstate(over="ignore"):
        if name == "relative":
            out = np.exp(s)
        elif name == "reverse_relative":
            out = 1.0 / (1.0 - s)
        elif name == "fermi_dirac":
            out = np.tanh(s)
        elif name == "lp_norm":
            out = np.sign(s) * np.abs(s) ** (spec.q - 1)
        else:
            out = np.maximum(s, 0.0) ** (spec.q - 1)
    return _out(out, scalar)


def gamma_second_eval(spec: EntropySpec, s):
    """Second derivative of gamma (right derivative at kinks, +inf at cusps)."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if not np.all(spec.dom_gamma.interior(s)):
        raise DomainBoundary(f"gamma'' of {spec} undefined outside the domain interior")
    name = spec.name
    with np.errstate(over="ignore", divide="ignore"):
        if name == "relative":
            out = np.exp(s)
        elif name == "reverse_relative":
            out = 1.0 / (1.0 - s) ** 2
        elif name == "fermi_dirac":
            out = 1.0 / np.cosh(s) ** 2
        elif name == "lp_norm":
            out = (spec.q - 1) * np.abs(s) ** (spec.q - 2)
        else:
            pos = s >= 0
            out = np.zeros(s.shape)
            out[pos] = (spec.q - 1) * s[pos] ** (spec.q - 2)
    return _out(out, scalar)


def lambda_eval(spec: EntropySpec, s):
    """lam(s) = gamma(s) - m s, nonnegative and zero at the origin."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    if spec.name == "relative":
        # expm1(s) - s loses digits near zero; use the series there
        with np.errstate(over="ignore"):
            out = np.where(np.abs(s) < 1e-4, s**2 / 2 + s**3 / 6 + s**4 / 24, np.expm1(s) - s)
    else:
        g = gamma_eval(spec, s)
        with np.errstate(invalid="ignore"):
            out = np.where(np.isinf(g), INF, g - spec.m * s)
    return _out(out, scalar)


def lambda_diamond_eval(spec: EntropySpec, s):
    """Symmetrised Young function max(lam(s), lam(-s))."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    out = np.maximum(lambda_eval(spec, s), lambda_eval(spec, -s))
    return _out(out, scalar)


def verify_conjugacy(spec: EntropySpec, s_grid, t_grid) -> float:
    """Largest gap between the closed-form gamma and a brute-force grid supremum."""
    s_grid = np.asarray(s_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    gs = gamma_star_eval(spec, t_grid)
    fin = np.isfinite(gs)
    t_grid, gs = t_grid[fin], gs[fin]
    worst = 0.0
    # chunk the outer product to bound memory
    for start in range(0, s_grid.size, 64):
        s = s_grid[start:start + 64, None]
        brute = np.max(s * t_grid[None, :] - gs[None, :], axis=1)
        closed = gamma_eval(spec, s[:, 0])
        worst = max(worst, float(np.max(np.abs(closed - brute))))
    return worst
