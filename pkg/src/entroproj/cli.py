"""Command line front end: ``entroproj {validate,solve,analyze,gibbs} --config FILE``.

Exit codes: 0 success, 1 bad configuration, 2 invalid assumptions,
3 infeasible constraint, 4 no accepted trials.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import simpson

from . import dual as D
from . import gibbs as G
from .entropies import EntropySpec
from .errors import InvalidConfig, NoAcceptedTrials
from .measures import (OUTSIDE, ORLICZ_ONLY, Density1D, DiscreteMeasure, TestFunction,
                       integrability_class)
from .relative import (augmented_problem, entropic_projection, lambda_curve, steepness_probe,
                       write_curve_csv, xi_curve)

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_NO_TRIALS = 0, 1, 2, 3, 4

GRID_POINTS = 2001


# -- configuration ----------------------------------------------------------------

@dataclass
class Scenario:
    """A resolved scenario: reference measure, entropy, test functions and constraint."""

    name: str
    R: object
    spec: EntropySpec
    theta: list
    constraint: object
    c: float | None = None  # scalar lower bound of the builtin scenarios


@dataclass
class RunConfig:
    scenario: Scenario
    out: str = "out"
    seed: int | None = None
    analyze: dict = field(default_factory=dict)
    gibbs: dict = field(default_factory=dict)
    base_dir: str = "."


def _require(doc, key, where):
    if key not in doc:
        raise InvalidConfig(f"{where}: missing key {key!r}")
    return doc[key]


def _path(base, p):
    p = os.path.expanduser(p)
    return p if os.path.isabs(p) else os.path.join(base, p)


def parse_measure(doc, base="."):
    if "csv" in doc:
        path = _path(base, doc["csv"])
        if not os.path.exists(path):
            raise InvalidConfig(f"measure file {path} does not exist")
        return DiscreteMeasure.from_csv(path)
    if "points" in doc:
        return DiscreteMeasure(_require(doc, "points", "measure"), _require(doc, "weights", "measure"))
    family = _require(doc, "family", "measure")
    params = tuple(doc.get("params", ()))
    try:
        return Density1D(family, params, normalized=bool(doc.get("normalized", True)))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None


def parse_theta(items, R, base="."):
    if isinstance(items, dict):
        items = [items]
    out = []
    for t in items:
        kind = _require(t, "kind", "theta")
        if kind == "identity":
            out.append(TestFunction.identity())
        elif kind == "power":
            out.append(TestFunction.power(_require(t, "k", "theta")))
        elif kind == "affine":
            out.append(TestFunction.affine(_require(t, "a", "theta"), _require(t, "b", "theta")))
        elif kind in ("grid", "grid_values"):
            if "csv" in t:
                path = _path(base, t["csv"])
                if not os.path.exists(path):
                    raise InvalidConfig(f"theta file {path} does not exist")
                out.append(TestFunction.from_csv(path, R))
            else:
                out.append(TestFunction.grid(_require(t, "values", "theta")))
        else:
            raise InvalidConfig(f"unknown theta kind {kind!r}")
    return out


def parse_constraint(doc, K):
    kind = _require(doc, "type", "constraint")
    vec = lambda v: np.full(K, float(v)) if np.isscalar(v) else np.asarray(v, dtype=float)
    if kind == "equality":
        return D.Equality(vec(_require(doc, "x", "constraint")))
    if kind == "lower":
        return D.LowerBounds(vec(_require(doc, "c", "constraint")))
    if kind == "box":
        return D.Box(vec(_require(doc, "lo", "constraint")), vec(_require(doc, "hi", "constraint")))
    raise InvalidConfig(f"unknown constraint type {kind!r}")


def parse_scenario(doc, base="."):
    kind = _require(doc, "type", "scenario")
    if kind in ("builtin_csiszar", "builtin_exponential"):
        c = float(doc.get("c", 2.0))
        R = Density1D.csiszar(1.0, 3.0) if kind == "builtin_csiszar" else Density1D.exponential(1.0)
        return Scenario(kind, R, EntropySpec("relative"), [TestFunction.identity()],
                        D.LowerBounds(np.array([c])), c)
    if kind != "custom":
        raise InvalidConfig(f"unknown scenario type {kind!r}")
    R = parse_measure(_require(doc, "measure", "scenario"), base)
    ent = _require(doc, "entropy", "scenario")
    ent = {"name": ent} if isinstance(ent, str) else ent
    try:
        spec = EntropySpec(_require(ent, "name", "entropy"), ent.get("p"))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    theta = parse_theta(_require(doc, "theta", "scenario"), R, base)
    constraint = parse_constraint(_require(doc, "constraint", "scenario"), len(theta))
    c = None
    if isinstance(constraint, D.LowerBounds) and len(theta) == 1:
        c = float(constraint.c[0])
    return Scenario("custom", R, spec, theta, constraint, c)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))
    scen = parse_scenario(_require(doc, "scenario", "config"), base)
    return RunConfig(scenario=scen, out=doc.get("out", "out"), seed=doc.get("seed"),
                     analyze=doc.get("analyze", {}), gibbs=doc.get("gibbs", {}), base_dir=base)


# -- helpers --------------------------------------------------------------------------

class Report:
    def __init__(self, quiet=False):
        self.quiet = quiet

    def __call__(self, msg=""):
        if not self.quiet:
            print(msg)


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _fmt(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _grid(R) -> np.ndarray:
    """Output grid for tabulated densities: geometric spacing from the left end up to T."""
    lo = R.support[0]
    if not np.isfinite(lo):
        lo = R.params[0] - 12 * R.params[1]
    span = R.truncation_point - lo
    return lo + np.concatenate([[0.0], np.geomspace(1e-10 * span, span, GRID_POINTS - 1)])


def grid_entropy(R, spec: EntropySpec, z, f, logf=None) -> float:
    """int gamma_star(f) dR from density values on the output grid.

    For relative entropy the log density is used so that overflowing tails
    (f = inf where R has no mass) do not poison the sum.
    """
    f = np.asarray(f, dtype=float)
    if R.is_discrete:
        return float(R.weights @ spec.gamma_star(f))
    if spec.name == "relative" and logf is not None:
        lr = R.logpdf(z)
        with np.errstate(over="ignore", invalid="ignore"):
            g = np.exp(logf + lr) * (logf - 1.0) + np.exp(lr)
        g = np.where(np.isfinite(lr), g, 0.0)
    else:
        g = spec.gamma_star(f) * R.pdf(z)
    lo = z[0]
    s = z[1:] - lo  # Simpson in log(z - lo), plus the first sliver by trapezoid
    head = 0.5 * (g[0] + g[1]) * s[0]
    return float(head + simpson(g[1:] * s, x=np.log(s)))


def read_density_csv(path):
    """(z, density, log_density) columns of a density.csv file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["z", "density", "log_density"]:
        raise InvalidConfig(f"{path}: unexpected header {rows[0]}")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return data[:, 0], data[:, 1], data[:, 2]


# -- validate ------------------------------------------------------------------------

def validate(scen: Scenario):
    """Return (verdict, findings) with verdict GOOD, CRITICAL or INVALID."""
    findings = []
    R = scen.R
    mass = R.mass
    if not (np.isfinite(mass) and mass > 0):
        return "INVALID", [f"reference measure is not bounded (mass {mass})"]
    findings.append(f"reference measure bounded: mass {mass:.6g}")
    try:
        D.MomentProblem(R, scen.spec, scen.theta, scen.constraint, check=False)._check()
    except (ValueError, TypeError) as exc:
        return "INVALID", findings + [f"test functions: {exc}"]
    findings.append(f"{len(scen.theta)} test function(s), linearly independent on the support")
    classes = []
    for k, t in enumerate(scen.theta):
        cls = integrability_class(t, scen.spec, R)
        classes.append(cls)
        findings.append(f"theta[{k}] ({t.kind}): {cls}")
    if any(c == OUTSIDE for c in classes):
        return "INVALID", findings + ["a test function lies outside the Orlicz space"]
    if any(c == ORLICZ_ONLY for c in classes):
        return "CRITICAL", findings
    return "GOOD", findings


def cmd_validate(cfg: RunConfig, say: Report) -> int:
    verdict, findings = validate(cfg.scenario)
    say(f"scenario {cfg.scenario.name}: {cfg.scenario.R!r}, entropy {cfg.scenario.spec}")
    for line in findings:
        say(f"  {line}")
    say(f"verdict: {verdict}")
    return EXIT_INVALID if verdict == "INVALID" else EXIT_OK


# -- solve ---------------------------------------------------------------------------

def _solve_relative_1d(scen: Scenario):
    """Lower-bound constraint on a single test function under relative entropy."""
    proj = entropic_projection(scen.R, scen.theta, scen.c)
    kind = "R-itself" if proj.is_reference else proj.kind
    aug = augmented_problem(scen.R, scen.theta, scen.constraint)
    sol = D.solve_dual(aug)
    res = None
    if sol.ok:
        res = D.fenchel_residuals(aug, sol, D.reconstruct_primal(aug, sol))
    if scen.R.is_discrete:
        dens = proj.density()
    else:
        dens = proj.density
    singular_cost = proj.x_s * float(proj.dual_y[0])
    return dict(kind=kind, y=list(proj.dual_y), entropy=proj.entropy_value,
                density_entropy=proj.entropy_value - singular_cost, x_hat=proj.x_hat, x_a=proj.x_a,
                x_s=proj.x_s, log_normalizer=proj.log_normalizer, residuals=res,
                status=sol.status), dens


def _solve_general(scen: Scenario):
    prob = D.MomentProblem(scen.R, scen.spec, scen.theta, scen.constraint)
    sol = D.solve_dual(prob)
    if sol.status == D.INFEASIBLE:
        return None, None
    if not sol.ok:
        raise RuntimeError(f"dual solver stopped with status {sol.status}")
    f = D.reconstruct_primal(prob, sol)
    res = D.fenchel_residuals(prob, sol, f)
    x_hat = np.asarray(sol.x_hat, dtype=float)
    x_a = np.asarray(sol.moments, dtype=float)
    x_s = x_hat - x_a
    if not np.any(sol.y):
        kind = "R-itself"
    elif np.linalg.norm(x_s) > 1e-6 * (1 + np.linalg.norm(x_hat)):
        kind = "generalized"
    else:
        kind, x_s = "projection", np.zeros_like(x_hat)
    dens = f.values if scen.R.is_discrete else f
    return dict(kind=kind, y=list(sol.y), entropy=sol.dual_value,
                density_entropy=D.primal_entropy(prob, f), x_hat=list(x_hat), x_a=list(x_a),
                x_s=list(x_s), log_normalizer=None, residuals=res, status=sol.status), dens


def solve_scenario(scen: Scenario):
    if scen.spec.name == "relative" and scen.c is not None and len(scen.theta) == 1:
        if scen.R.is_discrete and not D.primal_feasible(
                D.MomentProblem(scen.R, scen.spec, scen.theta, scen.constraint, check=False)):
            return None, None
        try:
            return _solve_relative_1d(scen)
        except ValueError:
            return None, None
    return _solve_general(scen)


def cmd_solve(cfg: RunConfig, say: Report) -> int:
    scen = cfg.scenario
    verdict, _ = validate(scen)
    if verdict == "INVALID":
        say("verdict: INVALID; run validate for details")
        return EXIT_INVALID
    info, dens = solve_scenario(scen)
    if info is None:
        say("constraint set holds no measure of finite entropy: infeasible")
        return EXIT_INFEASIBLE
    os.makedirs(cfg.out, exist_ok=True)
    R = scen.R
    if R.is_discrete:
        z, f = R.points, np.asarray(dens, dtype=float)
    else:
        z = _grid(R)
        with np.errstate(over="ignore"):
            f = dens(z)
    with np.errstate(divide="ignore"):
        logf = dens.log(z) if hasattr(dens, "log") and scen.spec.name == "relative" else np.log(f)
    with open(os.path.join(cfg.out, "density.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "density", "log_density"])
        for row in zip(z, f, np.broadcast_to(logf, z.shape)):
            w.writerow([_fmt(v) for v in row])
    res = info.pop("residuals")
    doc = {k: (_num(v) if np.isscalar(v) and not isinstance(v, str) else v) for k, v in info.items()}
    for key in ("y", "x_hat", "x_a", "x_s"):
        if isinstance(doc[key], list):
            doc[key] = [_num(v) for v in doc[key]]
    doc["scenario"] = scen.name
    doc["entropy_name"] = str(scen.spec)
    doc["residuals"] = None if res is None else {
        "dual_equality_gap": _num(res.dual_equality_gap), "d3_gap": _num(res.d3_gap)}
    doc["grid_entropy"] = _num(grid_entropy(R, scen.spec, z, f, logf))
    _write_json(os.path.join(cfg.out, "solution.json"), doc)
    say(f"kind: {doc['kind']}")
    say(f"dual vector: {doc['y']}")
    say(f"entropy: {doc['entropy']}")
    if doc["kind"] == "generalized":
        say(f"absolutely continuous moment {doc['x_a']}, singular moment {doc['x_s']}")
    say(f"wrote {cfg.out}/solution.json and {cfg.out}/density.csv")
    return EXIT_OK


# -- analyze -------------------------------------------------------------------------

_DEFAULT_GRIDS = {
    "builtin_csiszar": ((-3.0, 1.0, 41), (0.05, 4.0, 80)),
    "builtin_exponential": ((-3.0, 0.9, 40), (0.05, 4.0, 80)),
}


def _linspace(spec):
    lo, hi, num = spec
    return np.round(np.linspace(lo, hi, int(num)), 12) + 0.0  # no "-0" labels


def analyze_scenario(scen: Scenario, opts: dict):
    if scen.spec.name != "relative" or len(scen.theta) != 1:
        raise InvalidConfig("analyze needs relative entropy and a single test function")
    y_def, x_def = _DEFAULT_GRIDS.get(scen.name, ((-2.0, 2.0, 41), (0.05, 4.0, 80)))
    ys = _linspace(opts.get("y_grid", y_def))
    xs = _linspace(opts.get("x_grid", x_def))
    R, theta = scen.R, scen.theta
    lam = lambda_curve(R, theta, ys)
    xi = xi_curve(R, theta, xs)
    probe = steepness_probe(R, theta[0])
    rec = {"steep": bool(probe.steep), "y_max": _num(probe.y_max),
           "x_star": _num(probe.x_star), "lambda_at_boundary": _num(probe.lambda_at_boundary),
           "recession_slope": _num(probe.y_max), "affine_tail_slope": None}
    if not probe.steep:
        tail = xs > probe.x_star + 0.25
        if tail.sum() >= 2 and np.all(np.isfinite(xi[tail])):
            rec["affine_tail_slope"] = _num(np.polyfit(xs[tail], xi[tail], 1)[0])
    return ys, lam, xs, xi, rec


def cmd_analyze(cfg: RunConfig, say: Report) -> int:
    ys, lam, xs, xi, rec = analyze_scenario(cfg.scenario, cfg.analyze)
    os.makedirs(cfg.out, exist_ok=True)
    write_curve_csv(os.path.join(cfg.out, "lambda_curve.csv"), ["y", "Lambda"], [ys, lam])
    write_curve_csv(os.path.join(cfg.out, "xi_curve.csv"), ["x", "Xi"], [xs, xi])
    _write_json(os.path.join(cfg.out, "recession.json"), rec)
    say(f"log-Laplace {'steep' if rec['steep'] else 'not steep'}; domain edge y = {rec['y_max']}")
    if not rec["steep"]:
        say(f"x_star = {rec['x_star']}, affine tail slope = {rec['affine_tail_slope']}")
    say(f"wrote {cfg.out}/lambda_curve.csv, xi_curve.csv, recession.json")
    return EXIT_OK


# -- gibbs ---------------------------------------------------------------------------

_SIM_FIELDS = {f.name for f in fields(G.SimConfig)}


def _sim_config(scen: Scenario, opts: dict, seed):
    kw = {k: v for k, v in opts.items() if k in _SIM_FIELDS}
    if seed is not None:
        kw["seed"] = int(seed)
    if "bins" in opts and isinstance(opts["bins"], dict):
        b = opts["bins"]
        kw["bins"] = np.linspace(b["lo"], b["hi"], int(b["num"]))
    try:
        return G.SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"gibbs: {exc}") from None


def gibbs_scenario(scen: Scenario, opts: dict, seed=None):
    if scen.c is None or len(scen.theta) != 1:
        raise InvalidConfig("gibbs needs a lower bound on a single test function")
    tilt_auto = opts.get("tilt", "auto") == "auto"
    if opts.get("mode") == "weighted_empirical":
        # weighted empirical measures carry free total mass: no unit-mass constraint
        info, dens = _solve_general(scen)
    elif scen.spec.name == "relative":
        info, dens = solve_scenario(scen)
    else:
        info, dens = None, None
    opts = dict(opts)
    if tilt_auto:
        opts["tilt"] = float(info["y"][0]) if info else 0.0
    cfg = _sim_config(scen, opts, seed)
    R = scen.R
    target = None
    if info is not None:
        if R.is_discrete:
            target = G.bin_discrete(R.points, np.asarray(dens) * R.weights / R.mass, cfg.bins)
        else:
            target = lambda z: dens(z) * R.pdf(z)
    out = {"config": cfg}
    theta = scen.theta[0]
    out["result"] = G.run_conditional_sim(cfg, R, scen.c, target=target, theta=theta)
    if "diagnostic" in opts:
        probe = steepness_probe(R, theta)
        band = float(opts["diagnostic"].get("band", 0.1))
        out["diagnostic"] = G.singular_diagnostic(out["result"], probe.x_star, band)
    if "rate" in opts:
        r = opts["rate"]
        out["rate"] = G.rate_estimate(
            R, scen.c, r["ns"], int(r.get("trials", cfg.trials)), seed=cfg.seed,
            proposal=r.get("proposal", cfg.proposal), tilt=cfg.tilt,
            mixture_prob=cfg.mixture_prob, block_size=cfg.block_size)
    return out


def cmd_gibbs(cfg: RunConfig, say: Report) -> int:
    scen = cfg.scenario
    verdict, _ = validate(scen)
    if verdict == "INVALID":
        say("verdict: INVALID; run validate for details")
        return EXIT_INVALID
    try:
        out = gibbs_scenario(scen, cfg.gibbs, cfg.seed)
    except NoAcceptedTrials as exc:
        say(str(exc))
        return EXIT_NO_TRIALS
    os.makedirs(cfg.out, exist_ok=True)
    res = out["result"]
    res.to_json(os.path.join(cfg.out, "sim_result.json"))
    res.write_hist_csv(os.path.join(cfg.out, "histogram.csv"))
    say(f"accepted {res.accepted}/{res.trials} trials, effective {res.effective_trials:.1f}")
    if res.distance_to_target is not None:
        say(f"binned TV to the projection: {res.distance_to_target:.4f}")
    say(f"top particle / n: {res.top_particle_over_n:.4f}, bulk mean: {res.bulk_mean:.4f}")
    extra = {}
    if "diagnostic" in out:
        d = out["diagnostic"]
        extra["diagnostic"] = {"topk_ratio_mean": _num(d.topk_ratio_mean),
                               "bulk_mean": _num(d.bulk_mean), "k_over_n": _num(d.k_over_n),
                               "smallest_k": d.smallest_k}
    if "rate" in out:
        ladder = out["rate"]
        extra["rate"] = [{"n": r.n, "rate": _num(r.rate), "stderr": _num(r.stderr),
                          "probability": _num(r.probability), "accepted": r.accepted,
                          "omitted": r.omitted} for r in ladder]
        extra["rate_nondecreasing"] = G.ladder_nondecreasing(ladder)
        for r in ladder:
            say(f"  n={r.n}: rate {r.rate:.4f} +- {r.stderr:.4f}" + (" (omitted)" if r.omitted else ""))
        if all(r.omitted for r in ladder):
            _write_json(os.path.join(cfg.out, "diagnostics.json"), extra)
            say("no rung of the rate ladder accepted a trial")
            return EXIT_NO_TRIALS
    if extra:
        _write_json(os.path.join(cfg.out, "diagnostics.json"), extra)
    say(f"wrote results to {cfg.out}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------

COMMANDS = {"validate": cmd_validate, "solve": cmd_solve, "analyze": cmd_analyze, "gibbs": cmd_gibbs}


def build_parser():
    ap = argparse.ArgumentParser(prog="entroproj", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="simulation seed (overrides the config)")
    ap.add_argument("--quiet", action="store_true", help="suppress the human-readable report")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    say = Report(args.quiet)
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        elif cfg.seed is None:
            cfg.seed = cfg.gibbs.get("seed")
        return COMMANDS[args.command](cfg, say)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
