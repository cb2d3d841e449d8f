import numpy as np
import pytest
from hypothesis import settings

from jacobi_density.core import CoefficientFamily, Perturbation

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def free():
    return CoefficientFamily.free()


@pytest.fixture(scope="session")
def rank_one():
    return CoefficientFamily.explicit([1.0], [1.0, 0.0])


@pytest.fixture(scope="session")
def critical_ref():
    return CoefficientFamily.critical(0.5)


@pytest.fixture(scope="session")
def critical_perturbed():
    pert = Perturbation.power(1.0, 1.2)
    return CoefficientFamily.critical(0.5, pert, pert)


@pytest.fixture(scope="session")
def hermite():
    return CoefficientFamily.noncritical(0.5, 0.0)


@pytest.fixture(scope="session")
def ref_grid():
    return np.linspace(-4.0, -0.5, 36)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
