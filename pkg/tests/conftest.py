import numpy as np
import pytest

from rankdiffusion import CoefficientModel, GridSpec, RunConfig


class ZeroNoise:
    """Stand-in generator: every normal draw is 0, every uniform draw is ``u``."""

    def __init__(self, u=0.5):
        self.u = u

    def standard_normal(self, size=None):
        return np.zeros(size)

    def random(self, size=None):
        return np.full(size, self.u)


@pytest.fixture
def stationary():
    # mu(u) = 0.5 - u, sigma^2 = 1: the logistic law is a steady state
    return CoefficientModel(0.5, -1.0, 0.0, 1.0)


@pytest.fixture
def shifted():
    # mu(u) = 1 - u: logistic profile translated at speed 1/2
    return CoefficientModel(1.0, -1.0, 0.0, 1.0)


@pytest.fixture
def zero_noise():
    return ZeroNoise()


def small_config(model, **kw):
    base = dict(n=50, t_final=0.1, dt=0.01, grid=GridSpec(-10.0, 10.0, 0.05))
    base.update(kw)
    return RunConfig(model, **base)
