import pytest

from cmsum.marginals import (
    Degenerate,
    EmpiricalDiscrete,
    Gamma,
    Normal,
    Poisson,
    Uniform,
)
from cmsum.crossing import GPair


@pytest.fixture(scope="session")
def pair_gamma_gamma():
    """Worked example 1: smooth U-shaped quantile sum, two crossings."""
    return GPair(Gamma(4.0, 1.0), Gamma(3.0, 1.0))


@pytest.fixture(scope="session")
def pair_gamma_poisson():
    """Worked example 2: sawtooth quantile sum, twelve crossings at the median."""
    return GPair(Gamma(5.0, 1.0), Poisson(5.0))


@pytest.fixture(scope="session")
def pair_normal():
    """Monotone case: g(u) = Phi^{-1}(u), so the sum is standard normal."""
    return GPair(Normal(0.0, 2.0), Normal(0.0, 1.0))


@pytest.fixture(scope="session")
def pair_discrete():
    """Two-point x two-point empirical pair with jump crossings only."""
    return GPair(
        EmpiricalDiscrete([0.0, 1.0], [0.3, 0.7]),
        EmpiricalDiscrete([0.0, 2.0], [0.5, 0.5]),
    )


@pytest.fixture(scope="session")
def pair_degenerate_first():
    """Shifted empirical marginal; the sum has the second marginal's law."""
    return GPair(Degenerate(0.0), EmpiricalDiscrete([0.0, 1.0, 2.0], [0.4, 0.3, 0.3]))


def all_marginals():
    return [
        Gamma(4.0, 1.0),
        Gamma(3.0, 1.0),
        Poisson(5.0),
        Normal(0.5, 1.5),
        Uniform(0.0, 1.0),
        Degenerate(2.0),
        EmpiricalDiscrete([1.0, 3.0], [0.25, 0.75]),
    ]
