import numpy as np
import pytest

from entroproj import dual as D
from entroproj.entropies import EntropySpec
from entroproj.measures import DiscreteMeasure, TestFunction

ORACLE_SPECS = (EntropySpec("relative"), EntropySpec("lp_norm", 2.0), EntropySpec("fermi_dirac"))


def random_instance(rng, spec):
    """A feasible discrete moment problem: <= 8 points, K <= 2 grid test functions.

    The constraint set is built around the moments of a random density inside
    (0, 1), which lies in the domain of every entropy used here.
    """
    n = int(rng.integers(3, 9))
    K = int(rng.integers(1, 3))
    R = DiscreteMeasure(np.sort(rng.normal(size=n)), rng.uniform(0.2, 1.0, n))
    Theta = rng.normal(size=(n, K))
    theta = [TestFunction.grid(Theta[:, k]) for k in range(K)]
    g = rng.uniform(0.2, 0.8, n)
    x0 = Theta.T @ (g * R.weights)
    kind = rng.integers(3)
    if kind == 0:
        C = D.Equality(x0)
    elif kind == 1:
        C = D.LowerBounds(x0 - rng.uniform(-0.05, 0.1, K))
    else:
        half = rng.uniform(0.0, 0.2, K)
        C = D.Box(x0 - half, x0 + rng.uniform(0.0, 0.2, K))
    return D.MomentProblem(R, spec, theta, C)


def oracle_instances(seed=2024, count=50):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, ORACLE_SPECS[i % 3]) for i in range(count)]


@pytest.fixture(scope="session")
def exp_problem():
    """Exp(1) with unit mass and mean >= 2."""
    from entroproj.measures import Density1D
    from entroproj.relative import augmented_problem
    return augmented_problem(Density1D.exponential(1.0), [TestFunction.identity()],
                             D.LowerBounds([2.0]))


@pytest.fixture(scope="session")
def csiszar_problem():
    from entroproj.measures import Density1D
    from entroproj.relative import augmented_problem
    return augmented_problem(Density1D.csiszar(1.0, 3.0), [TestFunction.identity()],
                             D.LowerBounds([2.0]))
