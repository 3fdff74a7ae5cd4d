import pytest
from hypothesis import assume, given, strategies as st

from hurwitz_wp.cohomology import (BundleDegrees, cohomology_profile, hypercohomology_dims,
                                   obstruction_vanishes, tangent_dims)
from hurwitz_wp.combinatorics import genus_from_relation


@pytest.mark.parametrize("b", [1, 6, 40])
def test_tangent_dims(b):
    assert tangent_dims(b) == (0, b, 0)


def test_hexagon_profile():
    assert cohomology_profile(2, 0, 6).as_tuple() == (3, 6, 3, 0)


def test_higher_genus_base():
    prof = cohomology_profile(2, 2, 2)
    assert prof.as_tuple() == (0, 2, 9, 7)


@pytest.mark.parametrize("p,b,expected", [(2, 6, True), (2, 4, False), (3, 9, True)])
def test_obstruction(p, b, expected):
    assert obstruction_vanishes(p, b) is expected


def test_elliptic_base_is_flagged():
    prof = cohomology_profile(2, 1, 4)
    assert prof.h0_pullback == 1 and prof.notes


def test_undetermined_entries():
    # p = 3 double cover of P1: both degrees non-negative, nothing is forced
    prof = cohomology_profile(2, 0, 8)
    assert prof.determined == {"h0_pullback": False, "t1": True, "h1_tx": True,
                               "h1_pullback": False}
    assert prof.alternating_sum() is None


def test_genus_one_rejected():
    with pytest.raises(ValueError):
        cohomology_profile(2, 0, 4)


@st.composite
def covering_types(draw):
    n = draw(st.integers(2, 8))
    h = draw(st.integers(0, 4))
    p = draw(st.integers(2, 12))
    b = n * (2 - 2 * h) + 2 * p - 2
    assume(b >= 1)
    return n, h, b


@given(covering_types())
def test_profile_invariants(t):
    n, h, b = t
    p = genus_from_relation(n, h, b)
    assert b == n * (2 - 2 * h) + 2 * p - 2
    prof = cohomology_profile(n, h, b)
    assert prof.t1 == b and prof.h1_tx == 3 * p - 3
    if all(prof.determined.values()):
        assert prof.alternating_sum() == 0
    if obstruction_vanishes(p, b):
        assert prof.h1_pullback == 0
    deg = BundleDegrees.of(n, h, b)
    assert deg.deg_dual_twist == deg.deg_kx - deg.deg_pullback
    assert hypercohomology_dims(n, h, b) == tangent_dims(b)
