import math

import pytest

from polar_ray import ScalarField, build_model
from polar_ray.model import require_invariant
from polar_ray.scenarios import builtin


class Setup:
    def __init__(self, name):
        sc = builtin(name)
        self.scenario = sc
        self.model = sc.model
        self.points = list(sc.points)
        self.rho = require_invariant(sc.model, sc.rho, self.points)
        self.phi = sc.phi

    def regular_points(self):
        from polar_ray import regularity

        return [p for p in self.points if regularity(self.model, p).is_regular]


@pytest.fixture(scope="session")
def cyl():
    return Setup("cylinder")


@pytest.fixture(scope="session")
def wc2():
    return Setup("weighted-c2")


@pytest.fixture(scope="session")
def mixed():
    return Setup("mixed-tc-c")


@pytest.fixture(scope="session")
def cyl_e(cyl):
    return cyl.model.point([math.e])


@pytest.fixture(scope="session")
def plane():
    """C with its standard potential, as a (model, rho) pair."""
    model = build_model(1, 1, 1, [[1]])
    rho = ScalarField.parse("z1*zb1")
    return model, require_invariant(model, rho, [model.point([], [0.4 + 0.3j])])
