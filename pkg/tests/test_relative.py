import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroproj import relative as RL
from entroproj.errors import EstimateDisagreement
from entroproj.measures import Density1D, DiscreteMeasure, TestFunction, mellin_one_plus_cube

Z = TestFunction.identity()
EXP = Density1D.exponential(1.0)
CSZ = Density1D.csiszar(1.0, 3.0)
UNI = Density1D.uniform(0.0, 1.0)


def xi_exp(x):
    return x - 1 - math.log(x)


# -- log-Laplace ----------------------------------------------------------------------

@pytest.mark.parametrize("R", [EXP, CSZ, UNI, DiscreteMeasure([0, 1, 3], [0.2, 0.5, 0.3])], ids=repr)
def test_log_laplace_at_zero(R):
    assert abs(RL.log_laplace(R, Z, 0.0)) <= 1e-12
    mean = R.integrate(lambda z: z) if not R.is_discrete else float(R.weights @ R.points)
    assert RL.log_laplace_prime(R, Z, 0.0)[0] == pytest.approx(mean, abs=1e-12)


def test_log_laplace_examples():
    assert RL.log_laplace(EXP, Z, 0.5) == pytest.approx(math.log(2), abs=1e-12)
    assert RL.log_laplace(CSZ, Z, 1.2) == math.inf
    assert RL.log_laplace(EXP, Z, 1.0) == math.inf
    assert math.isfinite(RL.log_laplace(CSZ, Z, 1.0))


@given(st.floats(-3, 0.95))
@settings(max_examples=40, deadline=None)
def test_log_laplace_closed_form_exponential(y):
    assert abs(RL.log_laplace(EXP, Z, y) + math.log(1 - y)) <= 1e-10
    assert abs(RL.log_laplace_prime(EXP, Z, y)[0] - 1 / (1 - y)) <= 1e-9 / (1 - y) ** 2


def test_lambda_convex():
    for R, ys in [(EXP, np.linspace(-3, 0.9, 40)), (CSZ, np.linspace(-3, 1, 41))]:
        lam = RL.lambda_curve(R, Z, ys)
        assert np.all(np.diff(lam, 2) >= -1e-9)


# -- Cramér transform -------------------------------------------------------------------

def test_cramer_at_mean():
    assert abs(RL.cramer_transform(EXP, Z, 1.0)) <= 1e-8
    mean = CSZ.integrate(lambda z: z)
    assert abs(RL.cramer_transform(CSZ, Z, mean)) <= 1e-8


@pytest.mark.parametrize("x", [0.2, 0.5, 2.0, 3.7])
def test_cramer_exponential(x):
    assert abs(RL.cramer_transform(EXP, Z, x) - xi_exp(x)) <= 1e-8


def test_cramer_csiszar_affine_tail():
    xi1 = RL.cramer_transform(CSZ, Z, 1.0)
    for t in (0.0, 0.5, 1.0, 2.0, 3.0):
        assert abs(RL.cramer_transform(CSZ, Z, 1.0 + t) - (xi1 + t)) <= 1e-4


def test_cramer_outside_range():
    assert RL.cramer_transform(UNI, Z, 1.5) == math.inf
    assert RL.cramer_transform(EXP, Z, -0.5) == math.inf


def test_cramer_nonnegative():
    xs = np.linspace(0.1, 4, 25)
    for R in (EXP, CSZ):
        assert np.all(RL.xi_curve(R, Z, xs) >= -1e-12)


def test_cramer_vector_discrete():
    R = DiscreteMeasure([0, 1, 2, 3], [0.1, 0.4, 0.3, 0.2])
    theta = [Z, TestFunction.power(2)]
    x = np.array([1.5, 3.0])
    val = RL.cramer_transform(R, theta, x)
    # brute force: maximise <y,x> - Lambda(y) on a grid around the optimum
    g = np.linspace(-3, 3, 601)
    Y1, Y2 = np.meshgrid(g, g)
    T = np.stack([R.points, R.points ** 2])
    lam = np.log(np.einsum("j,abj->ab", R.weights, np.exp(Y1[..., None] * T[0] + Y2[..., None] * T[1])))
    brute = np.max(Y1 * x[0] + Y2 * x[1] - lam)
    assert brute <= val + 1e-12
    assert val - brute <= 1e-3


def test_tilted_moment_identity():
    assert RL.lemma_518_check(EXP, Z, 2.0) <= 1e-6
    assert RL.lemma_518_check(EXP, Z, 1.0) <= 1e-6
    assert RL.lemma_518_check(CSZ, Z, 0.9) <= 1e-6
    for x in np.linspace(0.3, 3.5, 10):
        assert RL.lemma_518_check(EXP, Z, x) <= 1e-6
        assert RL.lemma_518_check(CSZ, Z, x) <= 1e-6


# -- steepness ------------------------------------------------------------------------

def test_steepness_exponential():
    rep = RL.steepness_probe(EXP, Z)
    assert rep.y_max == pytest.approx(1.0, abs=1e-12)
    assert rep.steep and rep.x_star == math.inf


def test_steepness_csiszar():
    rep = RL.steepness_probe(CSZ, Z)
    oracle = mellin_one_plus_cube(2.0) / mellin_one_plus_cube(1.0)
    assert rep.y_max == 1.0
    assert not rep.steep
    assert abs(rep.x_star - oracle) <= 1e-4
    assert rep.lambda_at_boundary == pytest.approx(
        math.log(mellin_one_plus_cube(1.0) / RL.csiszar_constants()[0]), abs=1e-10)


def test_steepness_uniform():
    rep = RL.steepness_probe(UNI, Z)
    assert rep.y_max == math.inf
    assert not rep.steep
    assert rep.x_star == pytest.approx(1.0, abs=1e-4)


def test_steepness_ladder_must_be_monotone(monkeypatch):
    real = RL.log_laplace_prime
    calls = {"n": 0}

    def wobbly(R, theta, y):
        calls["n"] += 1
        v = real(R, theta, y)
        return v + (0.5 if calls["n"] % 2 else 0.0)

    monkeypatch.setattr(RL, "log_laplace_prime", wobbly)
    with pytest.raises(EstimateDisagreement):
        RL.steepness_probe(CSZ, Z)


def test_ladder_values_nondecreasing():
    rep = RL.steepness_probe(CSZ, Z)
    assert np.all(np.diff(rep.ladder) >= -1e-12)


# -- projections ------------------------------------------------------------------------

def test_projection_exponential():
    rep = RL.entropic_projection(EXP, Z, 2.0)
    assert rep.kind == "projection"
    assert rep.dual_y[0] == pytest.approx(0.5, abs=1e-10)
    assert rep.entropy_value == pytest.approx(1 - math.log(2), abs=1e-10)
    z = np.linspace(0, 20, 201)
    assert np.max(np.abs(rep.density(z) - 0.5 * np.exp(0.5 * z))) <= 1e-8 * np.exp(10)


def test_projection_csiszar_generalized():
    rep = RL.entropic_projection(CSZ, Z, 2.0)
    assert rep.kind == "generalized"
    assert rep.x_s == pytest.approx(1.0, abs=1e-4)
    # against Lebesgue the density is 1/(a1 (1 + z^3))
    a1 = mellin_one_plus_cube(1.0)
    z = np.linspace(0, 40, 81)
    leb = rep.density(z) * CSZ.pdf(z)
    assert np.allclose(leb, 1 / (a1 * (1 + z ** 3)), rtol=1e-9, atol=0)
    xi1 = RL.cramer_transform(CSZ, Z, rep.x_a)
    assert rep.entropy_value == pytest.approx(xi1 + rep.x_s, abs=1e-8)


@pytest.mark.parametrize("R", [EXP, CSZ], ids=repr)
def test_projection_below_mean_is_reference(R):
    rep = RL.entropic_projection(R, Z, 0.3)
    assert rep.is_reference
    assert rep.entropy_value == 0.0


@pytest.mark.parametrize("R,c", [(EXP, 1.5), (EXP, 3.0), (CSZ, 0.9), (UNI, 0.8)], ids=str)
def test_projection_invariants(R, c):
    rep = RL.entropic_projection(R, Z, c)
    assert rep.kind == "projection"
    mass = R.integrate(lambda z: np.ones_like(z), log_factor=rep.density.log)
    assert abs(mass - 1) <= 1e-9
    kl = R.integrate(lambda z: rep.density.log(z), log_factor=rep.density.log)
    assert abs(kl - rep.entropy_value) <= 1e-6
    y = rep.dual_y[0]
    assert abs(rep.entropy_value - (y * rep.x_hat - RL.log_laplace(R, Z, y))) <= 1e-7


def test_infeasible_projection():
    with pytest.raises(ValueError):
        RL.entropic_projection(UNI, Z, 1.5)


# -- worked example packages ------------------------------------------------------------

def test_csiszar_constants():
    a0, a1 = RL.csiszar_constants()
    assert abs(a1 - 2 * math.pi / (3 * math.sqrt(3))) <= 1e-6
    assert a0 == pytest.approx(0.6282554389796211, abs=1e-9)


@pytest.mark.parametrize("c,verdict", [(0.3, "R-itself"), (0.9, "projection"), (2.0, "generalized")])
def test_csiszar_scenario(c, verdict):
    rep = RL.csiszar_scenario(c)
    assert rep.verdict == verdict
    if verdict == "generalized":
        assert rep.x_s == pytest.approx(1.0, abs=1e-4)
        xi1 = RL.cramer_transform(CSZ, Z, 1.0)
        assert rep.Xi_c == pytest.approx(xi1 + 1.0, abs=1e-6)


def test_csiszar_scenario_rejects_negative():
    with pytest.raises(ValueError):
        RL.csiszar_scenario(-1.0)


def test_curve_shapes():
    xs = np.linspace(0.2, 5, 49)
    d2 = np.diff(RL.xi_curve(EXP, Z, xs), 2)
    assert np.all(d2 > 1e-4)
    xs = np.linspace(1, 4, 31)
    xi = RL.xi_curve(CSZ, Z, xs)
    assert np.max(np.abs(np.diff(xi, 2))) <= 1e-4
    slope = np.polyfit(xs, xi, 1)[0]
    assert abs(slope - 1) <= 1e-3


def test_write_curve_csv(tmp_path):
    path = tmp_path / "c.csv"
    RL.write_curve_csv(path, ["y", "Lambda"], [[0.0, 0.5, 1.0], [0.0, math.log(2), math.inf]])
    lines = path.read_text().splitlines()
    assert lines[0] == "y,Lambda"
    assert lines[2].split(",")[1].startswith("0.693147180")
    assert lines[3].endswith("inf")
