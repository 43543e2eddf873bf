import numpy as np
import pytest

from rews.cp_model import default_cp_curve, load_cp_curve
from rews.turbine import default_turbine_params


@pytest.fixture(scope="session")
def curve():
    return default_cp_curve()


@pytest.fixture(scope="session")
def params():
    return default_turbine_params()


@pytest.fixture(scope="session")
def sine_curve():
    """Analytic single-peak test curve with maximizer at lambda = 6."""
    lam = np.linspace(2.1, 9.9, 33)
    cp = 0.5 * np.sin(np.pi * (lam - 2.0) / 8.0)
    return load_cp_curve(zip(lam, cp))


def sine_cp(lam):
    return 0.5 * np.sin(np.pi * (lam - 2.0) / 8.0)
