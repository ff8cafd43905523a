import math

import numpy as np
import pytest

from entroproj import dual as D
from entroproj import projection as P
from entroproj.entropies import EntropySpec
from entroproj.errors import EstimateDisagreement
from entroproj.measures import Density1D, DiscreteMeasure, TestFunction
from entroproj.relative import augmented_problem, csiszar_constants

REL = EntropySpec("relative")
Z = TestFunction.identity()
LAMBDA_1 = math.log(csiszar_constants(0.0, 3.0)[0] / csiszar_constants(1.0, 3.0)[0])


@pytest.fixture(scope="module")
def csiszar():
    return augmented_problem(Density1D.csiszar(1.0, 3.0), [Z], D.Equality([2.0]))


@pytest.fixture(scope="module")
def exponential():
    return augmented_problem(Density1D.exponential(1.0), [Z], D.Equality([2.0]))


@pytest.fixture(scope="module")
def exp_1d():
    """Exp(1) without the unit-mass row: dom of the integral term is y < 1."""
    return D.MomentProblem(Density1D.exponential(1.0), REL, [Z], D.Equality([2.0]))


def test_gamma_star_at_reference_mean(exponential):
    rep = P.gamma_star_of_x(exponential, [1.0, 1.0])
    assert abs(rep.value) <= 1e-12


def test_gamma_star_exponential(exponential):
    assert P.gamma_star_of_x(exponential, [1.0, 2.0]).value == pytest.approx(1 - math.log(2), abs=1e-10)


def test_gamma_star_csiszar_affine(csiszar):
    xi1 = 1.0 - LAMBDA_1
    assert abs(P.gamma_star_of_x(csiszar, [1.0, 3.0]).value - (xi1 + 2.0)) <= 1e-4


def test_gamma_star_infeasible_is_infinite():
    R = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    prob = D.MomentProblem(R, REL, [TestFunction.constant(), Z], D.Equality([1.0, 0.5]))
    assert P.gamma_star_of_x(prob, [1.0, 2.0]).value == math.inf


def test_gamma_star_nonnegative():
    rng = np.random.default_rng(4)
    R = DiscreteMeasure(np.linspace(-1, 2, 6), rng.uniform(0.2, 1, 6))
    prob = D.MomentProblem(R, REL, [TestFunction.constant(), Z], D.Equality([1.0, 0.0]))
    for x in rng.uniform([0.5, -0.5], [2.0, 1.5], size=(10, 2)):
        assert P.gamma_star_of_x(prob, x).value >= -1e-12


# -- recession function -------------------------------------------------------------------

def test_recession_at_zero(csiszar):
    assert P.recession_function(csiszar, [0.0, 0.0]).value == 0.0


def test_recession_csiszar_mean_direction(csiszar):
    rec = P.recession_function(csiszar, [0.0, 1.0])
    assert abs(rec.value - 1.0) <= 1e-3
    assert abs(rec.quotient - rec.support) <= 1e-3 * (1 + abs(rec.quotient))


def test_recession_exponential_variant(exp_1d):
    assert abs(P.recession_function(exp_1d, [1.0]).value - 1.0) <= 1e-3
    assert P.recession_function(exp_1d, [-1.0]).value == math.inf


def test_recession_homogeneous(csiszar, exp_1d):
    base = P.recession_function(csiszar, [0.0, 1.0]).value
    for t in (2.0, 5.0):
        assert abs(P.recession_function(csiszar, [0.0, t]).value - t * base) <= 1e-6 * t * base
    base = P.recession_function(exp_1d, [1.0]).value
    assert abs(P.recession_function(exp_1d, [2.0]).value - 2 * base) <= 1e-6 * 2 * base


def test_recession_subadditive(csiszar):
    a = P.recession_function(csiszar, [0.0, 1.0]).value
    b = P.recession_function(csiszar, [0.0, 0.5]).value
    ab = P.recession_function(csiszar, [0.0, 1.5]).value
    assert ab <= a + b + 1e-6
    assert P.recession_function(csiszar, [0.5, 1.0]).value == math.inf


def test_disagreement_is_raised(monkeypatch, csiszar):
    monkeypatch.setattr(P, "quotient_estimate", lambda prob, xi: 1.5)
    with pytest.raises(EstimateDisagreement) as err:
        P.recession_function(csiszar, [0.0, 1.0])
    assert err.value.first == 1.5


def test_singular_entropy_value(csiszar, exp_1d):
    assert P.singular_entropy_value(csiszar, [0.0, 0.0]) == 0.0
    assert abs(P.singular_entropy_value(csiszar, [0.0, 2.0]) - 2.0) <= 2e-3
    assert abs(P.singular_entropy_value(exp_1d, [0.7]) - 0.7) <= 1e-3


# -- decomposition ------------------------------------------------------------------------

def test_decompose_exponential(exponential):
    dec = P.decompose(exponential, [1.0, 2.0])
    assert dec.is_dominating
    assert np.allclose(dec.x_a, [1.0, 2.0]) and np.all(dec.x_s == 0)


def test_decompose_at_mean(csiszar):
    dec = P.decompose(csiszar, [1.0, 1.0 - 1e-3])
    assert dec.is_dominating and np.all(dec.x_s == 0)


@pytest.mark.parametrize("x", [1.5, 2.0, 3.0])
def test_decompose_csiszar(csiszar, x):
    dec = P.decompose(csiszar, [1.0, x])
    assert not dec.is_dominating
    assert abs(dec.x_a[1] - 1.0) <= 1e-4
    assert abs(dec.x_s[1] - (x - 1.0)) <= 1e-4
    assert np.array_equal(dec.x_s, np.array([1.0, x]) - dec.x_a)
    assert abs(dec.gamma_star_x - dec.gamma_star_xa - dec.recession_xs) <= 1e-5
    # the absolutely continuous part is non-recessive
    again = P.decompose(csiszar, dec.x_a)
    assert np.max(np.abs(again.x_s)) <= 1e-6


def test_density_a_is_boundary_tilt(csiszar):
    dec = P.decompose(csiszar, [1.0, 3.0])
    R = Density1D.csiszar(1.0, 3.0)
    z = np.linspace(0, 30, 7)
    assert np.allclose(dec.density_a(z), np.exp(z - LAMBDA_1), rtol=1e-9)
    mass = R.integrate(lambda t: np.ones_like(t), log_factor=dec.density_a.log)
    assert mass == pytest.approx(1.0, abs=1e-9)


# -- dominating points --------------------------------------------------------------------

@pytest.mark.parametrize("c,expected", [(0.5, True), (0.9, True), (1.5, False), (2.0, False), (3.0, False)])
def test_dominating_point_verdicts(c, expected):
    prob = augmented_problem(Density1D.csiszar(1.0, 3.0), [Z], D.LowerBounds([c]))
    rep = P.is_dominating_point(prob)
    assert bool(rep) is expected
    assert rep.feasible
    if expected:
        assert rep.representation_residual <= 1e-7
        assert rep.support_violation <= 1e-9


def test_dominating_interior_solution_at_09():
    prob = augmented_problem(Density1D.csiszar(1.0, 3.0), [Z], D.LowerBounds([0.9]))
    rep = P.is_dominating_point(prob)
    assert 0 < rep.y[1] < 1
    assert rep.x[1] == pytest.approx(0.9, abs=1e-8)


def test_dominating_when_mean_is_inside():
    prob = augmented_problem(Density1D.exponential(1.0), [Z], D.LowerBounds([0.5]))
    rep = P.is_dominating_point(prob)
    assert rep and np.all(rep.y == 0)
