import numpy as np
import pytest

from hurwitz_wp.combinatorics import MonodromyDatum
from hurwitz_wp.mesh import BranchConfiguration, build_cover, hexagon_configuration
from hurwitz_wp.solver import assemble_operators, solve_liouville


@pytest.fixture(scope="session")
def hexagon():
    return hexagon_configuration()


@pytest.fixture(scope="session")
def hex_r1(hexagon):
    return build_cover(hexagon, 1)


@pytest.fixture(scope="session")
def hex_r2(hexagon):
    return build_cover(hexagon, 2)


@pytest.fixture(scope="session")
def hex_r2_solved(hex_r2):
    ops = assemble_operators(hex_r2)
    return hex_r2, ops, solve_liouville(hex_r2, ops, tol=1e-12)


@pytest.fixture(scope="session")
def trigonal():
    """Genus-2 three-sheeted cover, b = 8, at irregular positions."""
    pts = [0.3 + 0.1j, -0.8 + 0.5j, 1.6 - 0.4j, -0.2 - 1.1j, 2.5 + 2.0j, -2.2 - 0.3j,
           0.9 + 1.3j, np.inf]
    pairs = [(1, 2), (1, 2), (2, 3), (2, 3), (1, 3), (1, 3), (1, 2), (1, 2)]
    return BranchConfiguration(tuple(complex(p) for p in pts), MonodromyDatum.from_pairs(3, pairs))
