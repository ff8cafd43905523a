"""Monte Carlo checks of Gibbs conditioning.

Empirical measures of n particles, conditioned on the rare event that their
theta-average lands in C_delta, should look like the entropic projection of R
on C.  In the heavy-tailed non-steep case the bulk looks like the boundary law
P_1 while a single particle carries the missing mean.

Trials are grouped in fixed-size blocks; block b draws from
``default_rng(SeedSequence([seed, b]))``, so results do not depend on how
blocks are scheduled.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import NoAcceptedTrials
from .measures import DiscreteMeasure, TestFunction, sample_csiszar
from .quadrature import integrate_adaptive
from .relative import log_laplace

INF = np.inf

MODES = ("iid_empirical", "weighted_empirical")
PROPOSALS = ("plain_rejection", "exponential_tilt", "boundary_mixture")
WEIGHT_LAWS = ("poisson1", "exponential1", "two_point", "normal01")


@dataclass
class SimConfig:
    n: int
    delta: float
    trials: int
    seed: int = 0
    mode: str = "iid_empirical"
    proposal: str = "plain_rejection"
    tilt: float = 0.0
    mixture_prob: float = 0.5
    weight_law: str = "poisson1"
    bins: tuple = tuple(np.linspace(0.0, 10.0, 21))
    top_k: int = 1
    variant: str = "lower"  # C_delta = [c - delta, inf); "band" gives [c, c + delta]
    block_size: int = 1000
    k_max: int = 20

    def __post_init__(self):
        self.bins = tuple(float(b) for b in self.bins)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")
        if self.weight_law not in WEIGHT_LAWS:
            raise ValueError(f"weight_law must be one of {WEIGHT_LAWS}")
        if self.n < 1 or self.trials < 1 or self.block_size < 1:
            raise ValueError("n, trials and block_size must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if len(self.bins) < 2 or np.any(np.diff(self.bins) <= 0):
            raise ValueError("bins must be strictly increasing")
        if not 0 <= self.top_k < self.n:
            raise ValueError("top_k must lie in [0, n)")
        if self.variant not in ("lower", "band"):
            raise ValueError("variant is 'lower' or 'band'")
        if not 0 < self.mixture_prob < 1:
            raise ValueError("mixture_prob must lie in (0, 1)")


@dataclass
class SimResult:
    n: int
    trials: int
    accepted: int
    acceptance_rate: float
    effective_trials: float
    probability: float
    probability_stderr: float
    rate_estimate: float
    rate_stderr: float
    bins: list
    conditioned_hist: list
    bulk_hist: list
    target_hist: list | None
    distance_to_target: float | None
    bulk_distance_to_target: float | None
    top_particle_over_n: float
    top_particle_over_n_stderr: float
    bulk_mean: float
    bulk_mean_stderr: float
    top_k: int
    bulk_mean_by_k: list = field(default_factory=list, repr=False)
    topk_ratio_by_k: list = field(default_factory=list, repr=False)

    def to_json(self, path=None):
        doc = json.dumps(_jsonable(asdict(self)), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(doc + "\n")
        return doc

    def write_hist_csv(self, path):
        edges = list(self.bins) + [INF]
        target = self.target_hist or [float("nan")] * len(self.conditioned_hist)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "mass", "target_mass"])
            for i, m in enumerate(self.conditioned_hist):
                lo, hi = (edges[i], edges[i + 1]) if i < len(self.bins) - 1 else (edges[-2], INF)
                w.writerow([_num(lo), _num(hi), f"{m:.12g}", f"{target[i]:.12g}"])


def _num(v):
    return "inf" if v == INF else f"{v:.12g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# -- samplers --------------------------------------------------------------------

_SQ3 = math.sqrt(3.0)
A1 = 2 * math.pi / (3 * _SQ3)  # int_0^inf dz/(1+z^3)


def _p1_antiderivative(t):
    """int_0^t dz/(1+z^3) in closed form."""
    return (np.log((t + 1) ** 2 / (t * t - t + 1)) / 6
            + np.arctan((2 * t - 1) / _SQ3) / _SQ3 + math.pi / (6 * _SQ3))


def _p1_tail(t, terms=10):
    """int_t^inf dz/(1+z^3) for t >= 2 by its alternating series in 1/t^3."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for k in range(terms):
        out += (-1) ** k / ((3 * k + 2) * t ** (3 * k + 2))
    return out


_T_GRID = np.linspace(0.0, 4.0, 4097)
_A_GRID = _p1_antiderivative(_T_GRID)
_TAIL_SPLIT = 4.0
_TAIL_MASS = A1 - float(_p1_antiderivative(_TAIL_SPLIT))


def sample_p1(rng, size):
    """Draws from P_1(dz) = dz / (a1 (1 + z^3)) on [0, inf) by inverting the CDF."""
    v = rng.random(size)  # upper-tail probability
    target_tail = v * A1
    out = np.empty(np.shape(v))
    tail = target_tail < _TAIL_MASS
    # body: interpolate in a table, then polish with Newton
    body_target = A1 - target_tail[~tail]
    t = np.interp(body_target, _A_GRID, _T_GRID)
    for _ in range(3):
        t = t - (_p1_antiderivative(t) - body_target) * (1 + t ** 3)
    out[~tail] = t
    # tail: invert the series; int_t^inf ~ 1/(2 t^2)
    s = target_tail[tail]
    t = np.maximum((2 * s) ** -0.5, _TAIL_SPLIT)
    for _ in range(6):
        t = t + (_p1_tail(t) - s) * (1 + t ** 3)
    out[tail] = t
    return out


def _p1_logpdf(z):
    return -math.log(A1) - np.log1p(z ** 3)


class _Proposal:
    """Draws an (m, n) particle array and the log likelihood ratio dR^n/dQ per row."""

    def draw(self, rng, m, n):
        raise NotImplementedError


class _Plain(_Proposal):
    def __init__(self, R):
        self.R = R

    def draw(self, rng, m, n):
        Z = np.asarray(self.R.sample(rng, m * n)).reshape(m, n)
        return Z, np.zeros(m)


class _Tilt(_Proposal):
    """Tilted law exp(y z - Lambda(y)) R(dz) for theta(z) = z."""

    def __init__(self, R, y):
        self.R = R
        self.y = float(y)
        self.lam = log_laplace(R, TestFunction.identity(), self.y)
        if not np.isfinite(self.lam):
            raise ValueError(f"tilt {y} is outside the domain of the log-Laplace transform")
        fam = R.family
        if fam == "csiszar" and self.y == R.params[0] and R.params[1] != 3:
            raise NotImplementedError("boundary tilt is implemented for b = 3")

    def sample(self, rng, size):
        R, y = self.R, self.y
        fam, p = R.family, R.params
        if fam == "exponential":
            return rng.exponential(1.0 / (p[0] - y), size)
        if fam == "gaussian":
            return rng.normal(p[0] + y * p[1] ** 2, p[1], size)
        if fam == "uniform":
            u = rng.random(size)
            if y == 0:
                return p[0] + (p[1] - p[0]) * u
            return p[0] + np.log1p(u * np.expm1(y * (p[1] - p[0]))) / y
        if y == p[0]:
            return sample_p1(rng, size)
        return sample_csiszar(rng, size, p[0], p[1], tilt=y)

    def draw(self, rng, m, n):
        Z = np.asarray(self.sample(rng, m * n)).reshape(m, n)
        logw = -(self.y * Z.sum(axis=1) - n * self.lam)
        return Z, logw


class _BoundaryMixture(_Proposal):
    """P_1 product, mixed with one particle pushed past the conditioning threshold.

    With probability ``pi`` a uniformly chosen particle i is replaced by
    t_i + Exp(a), where t_i = max(0, n c - sum_{j != i} z_j) is the shortfall
    left by the other particles.  The likelihood ratio uses the exact
    mixture density.
    """

    def __init__(self, R, c, pi):
        if R.family != "csiszar" or R.params[1] != 3:
            raise NotImplementedError("the boundary mixture is implemented for csiszar(a, 3)")
        self.R = R
        self.a = R.params[0]
        self.c = float(c)
        self.pi = float(pi)
        a0_log = -R._log_norm if R.normalized else 0.0
        self.log_ratio = math.log(A1) - a0_log  # log(a1 / a0)

    def draw(self, rng, m, n):
        a = self.a
        Z = sample_p1(rng, (m, n))
        jump = rng.random(m) < self.pi
        rows = np.flatnonzero(jump)
        cols = rng.integers(0, n, size=m)[rows]
        gaps = rng.exponential(1.0 / a, size=rows.size)
        others = Z[rows].sum(axis=1) - Z[rows, cols]
        Z[rows, cols] = np.maximum(0.0, n * self.c - others) + gaps
        S = Z.sum(axis=1)
        t = np.maximum(0.0, n * self.c - (S[:, None] - Z))
        log_h = np.where(Z >= t, math.log(a) - a * (Z - t), -INF)
        log_mix_ratio = logsumexp(log_h - _p1_logpdf(Z), axis=1) + math.log(self.pi / n)
        log_q = np.logaddexp(math.log1p(-self.pi), log_mix_ratio)
        # dR^n/dQ = prod (a1/a0) e^{-a z_j} / [(1 - pi) + (pi/n) sum_i h_i/p1(z_i)]
        logw = n * self.log_ratio - a * S - log_q
        return Z, logw


def _make_proposal(cfg: SimConfig, R, threshold):
    if cfg.proposal == "plain_rejection":
        return _Plain(R)
    if cfg.proposal == "exponential_tilt":
        return _Tilt(R, cfg.tilt)
    return _BoundaryMixture(R, threshold, cfg.mixture_prob)


# -- weighted empirical measures --------------------------------------------------------

def _weight_law_sample(law, rng, s):
    """Draw W_i from the law tilted by exp(s_i w - gamma(s_i))."""
    if law == "poisson1":
        return rng.poisson(np.exp(s)).astype(float)
    if law == "exponential1":
        return rng.exponential(1.0 / (1.0 - s))
    if law == "two_point":
        p_up = 0.5 * (1 + np.tanh(s))
        return np.where(rng.random(s.shape) < p_up, 1.0, -1.0)
    return rng.normal(s, 1.0)


def _weight_law_log_mgf(law, s):
    if law == "poisson1":
        return np.expm1(s)
    if law == "exponential1":
        return -np.log1p(-s)
    if law == "two_point":
        a = np.abs(s)
        return a + np.log1p(np.exp(-2 * a)) - math.log(2.0)
    return 0.5 * s * s


def grid_positions(R: DiscreteMeasure, n):
    """Deterministic particle positions whose empirical law approximates R."""
    cdf = np.cumsum(R.weights) / R.mass
    idx = np.searchsorted(cdf, (np.arange(n) + 0.5) / n)
    return R.points[np.minimum(idx, R.points.size - 1)]


class _Weighted:
    def __init__(self, cfg, R, theta, tilt):
        if cfg.proposal == "boundary_mixture":
            raise ValueError("weighted mode supports plain_rejection and exponential_tilt")
        self.law = cfg.weight_law
        self.z = grid_positions(R, cfg.n)
        self.th = theta(self.z)
        self.s = (tilt if cfg.proposal == "exponential_tilt" else 0.0) * self.th
        if self.law == "exponential1" and np.any(self.s >= 1):
            raise ValueError("tilt leaves the domain of the exponential weight law")

    def draw(self, rng, m, n):
        W = _weight_law_sample(self.law, rng, np.broadcast_to(self.s, (m, n)).copy())
        logw = -(W @ self.s - _weight_law_log_mgf(self.law, self.s).sum())
        return W, logw


# -- the simulation ------------------------------------------------------------------

def block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _hist_rows(X, bins, weights=None):
    """Per-row probability histograms on bins plus one overflow bin."""
    m = X.shape[0]
    nb = len(bins) - 1
    idx = np.searchsorted(bins, X, side="right") - 1
    idx = np.where((idx < 0) | (idx >= nb), nb, idx)
    if weights is None:
        weights = np.ones_like(X)
    flat = (np.arange(m)[:, None] * (nb + 1) + idx).ravel()
    H = np.bincount(flat, weights=weights.ravel(), minlength=m * (nb + 1)).reshape(m, nb + 1)
    tot = H.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, H / tot, 0.0)


def bin_density(pdf, bins):
    """Bin masses of a Lebesgue density on the config bins plus the remainder."""
    masses = [integrate_adaptive(pdf, a, b)[0] for a, b in zip(bins[:-1], bins[1:])]
    masses.append(max(0.0, 1.0 - float(np.sum(masses))))
    return np.array(masses)


def bin_discrete(points, masses, bins):
    m = np.asarray(masses, dtype=float)
    return _hist_rows(np.asarray(points, dtype=float)[None, :], np.asarray(bins), m[None, :])[0]


def _weighted_mean(logw, values):
    """Self-normalised mean and delta-method standard error."""
    w = np.exp(logw - logw.max())
    w /= w.sum()
    mean = float(w @ values)
    se = float(math.sqrt(np.sum(w * w * (values - mean) ** 2)))
    return mean, se


def run_conditional_sim(cfg: SimConfig, R, c, target=None, theta=None) -> SimResult:
    """Condition n-particle empirical measures on their theta-average lying in C_delta.

    ``target`` is a Lebesgue density (callable) or bin masses (array with one
    overflow entry); ``theta`` defaults to the identity.
    """
    lo_event = c - cfg.delta if cfg.variant == "lower" else c
    hi_event = INF if cfg.variant == "lower" else c + cfg.delta
    return _simulate(cfg, R, lo_event, hi_event, target, theta)


def _simulate(cfg, R, lo_event, hi_event, target=None, theta=None) -> SimResult:
    theta = TestFunction.identity() if theta is None else theta
    n = cfg.n
    bins = np.asarray(cfg.bins)
    if cfg.mode == "weighted_empirical":
        if not isinstance(R, DiscreteMeasure):
            raise TypeError("weighted mode needs a discrete reference measure")
        gen = _Weighted(cfg, R, theta, cfg.tilt)
    else:
        if cfg.proposal != "plain_rejection" and theta.kind != "identity":
            raise ValueError("tilted proposals are implemented for theta(z) = z")
        gen = _make_proposal(cfg, R, lo_event)
    k_max = min(cfg.k_max, n - 1)
    keep = {"logw": [], "hist": [], "bulk": [], "top": [], "bulk_by_k": []}
    logw_all = []
    n_blocks = -(-cfg.trials // cfg.block_size)
    for b in range(n_blocks):
        m = min(cfg.block_size, cfg.trials - b * cfg.block_size)
        rng = block_rng(cfg.seed, b)
        X, logw = gen.draw(rng, m, n)
        if cfg.mode == "weighted_empirical":
            avg = X @ gen.th / n
        else:
            avg = theta(X).mean(axis=1) if theta.kind != "identity" else X.mean(axis=1)
        acc = (avg >= lo_event) & (avg <= hi_event)
        logw_all.append(np.where(acc, logw, -INF))
        if not acc.any():
            continue
        Xa, lw = X[acc], logw[acc]
        keep["logw"].append(lw)
        if cfg.mode == "weighted_empirical":
            pos = np.broadcast_to(gen.z, Xa.shape)
            keep["hist"].append(_hist_rows(pos, bins, Xa))
            keep["bulk"].append(keep["hist"][-1])
            keep["top"].append(np.max(Xa * gen.th, axis=1) / n)
            keep["bulk_by_k"].append(avg[acc][:, None])
            continue
        S = np.sort(Xa, axis=1)
        keep["hist"].append(_hist_rows(S, bins))
        kk = cfg.top_k
        keep["bulk"].append(_hist_rows(S[:, :n - kk], bins))
        csum = np.cumsum(S[:, ::-1][:, :k_max + 1], axis=1)
        top_sums = np.concatenate([np.zeros((S.shape[0], 1)), csum], axis=1)[:, :k_max + 1]
        keep["top"].append(top_sums / n)
        total = S.sum(axis=1, keepdims=True)
        keep["bulk_by_k"].append((total - top_sums) / (n - np.arange(k_max + 1)))
    logw_all = np.concatenate(logw_all)
    accepted = int(np.isfinite(logw_all).sum())
    if accepted == 0:
        raise NoAcceptedTrials(f"no trial met the constraint (n={n}, trials={cfg.trials})")
    # probability of the event: mean of the likelihood ratio on accepted trials
    shift = float(np.max(logw_all))
    w = np.exp(logw_all - shift)
    p_scaled = float(w.mean())
    se_scaled = float(w.std(ddof=1) / math.sqrt(cfg.trials)) if cfg.trials > 1 else INF
    log_p = shift + math.log(p_scaled)
    prob = math.exp(log_p)
    rate = -log_p / n
    rate_se = se_scaled / (n * p_scaled)
    lw = np.concatenate(keep["logw"])
    wn = np.exp(lw - lw.max())
    ess = float(wn.sum() ** 2 / np.sum(wn * wn))
    wn /= wn.sum()
    hist = wn @ np.concatenate(keep["hist"])
    bulk = wn @ np.concatenate(keep["bulk"])
    if cfg.mode == "weighted_empirical":
        top = np.concatenate(keep["top"])
        top_mean, top_se = _weighted_mean(lw, top)
        bulk_mean, bulk_se = _weighted_mean(lw, np.concatenate(keep["bulk_by_k"])[:, 0])
        bulk_by_k, top_by_k = [bulk_mean], [top_mean]
    else:
        top_all = np.concatenate(keep["top"])
        bulk_all = np.concatenate(keep["bulk_by_k"])
        kk = min(cfg.top_k, k_max)
        top_mean, top_se = _weighted_mean(lw, top_all[:, kk])
        bulk_mean, bulk_se = _weighted_mean(lw, bulk_all[:, kk])
        top_by_k = list(wn @ top_all)
        bulk_by_k = list(wn @ bulk_all)
    target_hist = dist = bulk_dist = None
    if target is not None:
        target_hist = bin_density(target, bins) if callable(target) else np.asarray(target, dtype=float)
        dist = 0.5 * float(np.abs(hist - target_hist).sum())
        bulk_dist = 0.5 * float(np.abs(bulk - target_hist).sum())
        target_hist = list(target_hist)
    return SimResult(
        n=n, trials=cfg.trials, accepted=accepted, acceptance_rate=accepted / cfg.trials,
        effective_trials=ess, probability=prob, probability_stderr=se_scaled * math.exp(shift),
        rate_estimate=rate, rate_stderr=rate_se, bins=list(bins), conditioned_hist=list(hist),
        bulk_hist=list(bulk), target_hist=target_hist, distance_to_target=dist,
        bulk_distance_to_target=bulk_dist, top_particle_over_n=top_mean,
        top_particle_over_n_stderr=top_se, bulk_mean=bulk_mean, bulk_mean_stderr=bulk_se,
        top_k=cfg.top_k, bulk_mean_by_k=bulk_by_k, topk_ratio_by_k=top_by_k)


# -- derived diagnostics ---------------------------------------------------------------

@dataclass
class SingularDiagnostic:
    topk_ratio_mean: float
    bulk_mean: float
    k_over_n: float | None
    smallest_k: int | None


def singular_diagnostic(result: SimResult, x_star, band) -> SingularDiagnostic:
    """Top-particle share and bulk mean, plus the smallest excision reaching x_star."""
    k_hit = None
    if np.isfinite(x_star):
        for k, bm in enumerate(result.bulk_mean_by_k):
            if abs(bm - x_star) <= band:
                k_hit = k
                break
    return SingularDiagnostic(result.top_particle_over_n, result.bulk_mean,
                              None if k_hit is None else k_hit / result.n, k_hit)


@dataclass
class RateRung:
    n: int
    rate: float
    stderr: float
    probability: float
    accepted: int
    omitted: bool = False


def rate_estimate(R, c, ns, trials, seed=0, proposal="exponential_tilt", tilt=0.0,
                  mixture_prob=0.5, block_size=2000):
    """Ladder of -(1/n) log P(mean of n draws >= c) over ``ns``."""
    ladder = []
    for n in ns:
        # the event is C = [c, inf) itself, so cfg.delta plays no role
        cfg = SimConfig(n=n, delta=1.0, trials=trials, seed=seed, proposal=proposal, tilt=tilt,
                        mixture_prob=mixture_prob, block_size=block_size, top_k=0, k_max=0)
        try:
            res = _simulate(cfg, R, c, INF)
        except NoAcceptedTrials:
            ladder.append(RateRung(n, INF, INF, 0.0, 0, omitted=True))
            continue
        ladder.append(RateRung(n, res.rate_estimate, res.rate_stderr, res.probability, res.accepted))
    return ladder


def ladder_nondecreasing(ladder, k=3.0) -> bool:
    rungs = [r for r in ladder if not r.omitted]
    for a, b in zip(rungs[:-1], rungs[1:]):
        if b.rate < a.rate - k * math.hypot(a.stderr, b.stderr):
            return False
    return True
