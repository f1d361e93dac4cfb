import numpy as np
import pytest

from levy_replenish import (
    CostModel,
    JumpLaw,
    LevyModel,
    ProblemSpec,
    validate,
)


@pytest.fixture(scope="session")
def model_a():
    """mu=1, sigma=0, lam=1, J ~ Exp(1); kappa(theta) = theta^2/(1+theta)."""
    return LevyModel(mu=1.0, sigma=0.0, lam=1.0, jump_law=JumpLaw.exponential(1.0))


@pytest.fixture(scope="session")
def brownian():
    """kappa(theta) = theta^2 (sigma^2 = 2, no drift, no jumps)."""
    return LevyModel(mu=0.0, sigma=float(np.sqrt(2.0)), lam=0.0)


@pytest.fixture(scope="session")
def two_phase_mix():
    """Two-phase hyperexponential demand with a Gaussian component."""
    return LevyModel(mu=1.2, sigma=0.4, lam=0.8,
                     jump_law=JumpLaw.hyperexponential([0.6, 0.4], [1.5, 3.0]))


@pytest.fixture(scope="session")
def cyclic_phase_type():
    """3-phase law with feedback: the scale basis has a conjugate root pair."""
    T = [[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.05, 0.0, -1.0]]
    return LevyModel(mu=1.0, sigma=0.0, lam=1.0,
                     jump_law=JumpLaw.phase_type([1.0, 0.0, 0.0], T))


@pytest.fixture(scope="session")
def spec_a(model_a):
    return validate(ProblemSpec(model=model_a, q=0.05, r=0.5, C=1.0,
                                cost=CostModel.quadratic()))


@pytest.fixture(scope="session")
def spec_brownian(brownian):
    return validate(ProblemSpec(model=brownian, q=0.5, r=1.0, C=0.5,
                                cost=CostModel.quadratic()))


@pytest.fixture(scope="session")
def spec_pwl(model_a):
    return validate(ProblemSpec(model=model_a, q=0.05, r=0.5, C=1.0,
                                cost=CostModel.piecewise_linear(h=1.0, p=1.0)))


@pytest.fixture(scope="session")
def spec_mix(two_phase_mix):
    return validate(ProblemSpec(model=two_phase_mix, q=0.1, r=0.8, C=0.3,
                                cost=CostModel.quadratic()))
