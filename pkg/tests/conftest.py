import numpy as np
import pytest

import ellipticmc as emc
from ellipticmc import problemspec as ps


@pytest.fixture(scope="session")
def unit_ball():
    return emc.ball(3)


@pytest.fixture(scope="session")
def unit_box():
    return emc.box(3, [-1, -1, -1], [1, 1, 1])


@pytest.fixture
def rng():
    return emc.RngStream(20240817)


def quadratic_problem(**solver):
    """The reference problem: F = u^2, U = 2, phi = 1, b = 2 on the unit
    ball (C = 1, C_tilde = 1/3)."""
    cfg = {"seed": 5, "paths": 400, "dt": 1e-3, "grid_h": 0.5}
    cfg.update(solver)
    return ps.from_dict({
        "dimension": 3,
        "domain": {"shape": "ball", "radius": 1.0},
        "F": "u^2", "U": "2", "phi": "1", "b": 2.0,
        "solver": cfg,
    })


def linear_problem(lam=0.5, **solver):
    """F = lam u: the operator is constant in u (C = 0) and the solution
    matches the radial Feynman-Kac oracle."""
    cfg = {"seed": 5, "paths": 400, "dt": 1e-3, "grid_h": 0.5}
    cfg.update(solver)
    return ps.from_dict({
        "dimension": 3,
        "domain": {"shape": "ball", "radius": 1.0},
        "F": f"{lam} * u", "U": f"{lam}", "phi": "1",
        "solver": cfg,
    })


@pytest.fixture
def quad_problem():
    return quadratic_problem()
