import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from hurwitz_wp.combinatorics import (
    BudgetExceeded, MonodromyDatum, Permutation, automorphism_order, braid_move,
    braid_move_inverse, braid_orbits, brute_force_classes, canonical_datum, delta_degree,
    enumerate_classes, genus_from_relation, validate, validation_error,
)


def test_enumeration_matches_brute_force():
    classes = enumerate_classes(3, 4)
    assert len(classes) == 4
    assert [canonical_datum(d).pairs() for d in classes] == [
        tuple((a + 1, b + 1) for a, b in r) for r in brute_force_classes(3, 4)]


@pytest.mark.parametrize("b", range(1, 9))
def test_double_covers(b):
    assert delta_degree(2, b) == (1 if b % 2 == 0 else 0)


@pytest.mark.parametrize("n,b", [(3, 2), (3, 4), (3, 6), (4, 4)])
def test_brute_force_oracle(n, b):
    assert len(enumerate_classes(n, b)) == len(brute_force_classes(n, b))


def test_all_representatives_valid_and_canonical():
    for d in enumerate_classes(4, 6):
        assert validate(d)
        assert canonical_datum(d) == d


def test_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_classes(7, 4)


@pytest.mark.parametrize("n,b", [(2, 6), (3, 4), (4, 6)])
def test_single_braid_orbit(n, b):
    assert len(braid_orbits(enumerate_classes(n, b))) == 1


@pytest.mark.parametrize("pairs,reason", [
    ([(1, 2), (1, 2), (1, 2)], "product"),
    ([(1, 2), (1, 2), (3, 4), (3, 4)], "not_transitive"),
])
def test_validation_reasons(pairs, reason):
    assert validation_error(MonodromyDatum.from_pairs(4 if reason == "not_transitive" else 2,
                                                      pairs)) == reason


def test_genus_relation():
    assert genus_from_relation(2, 0, 6) == 2
    assert genus_from_relation(3, 0, 4) == 0
    with pytest.raises(ValueError):
        genus_from_relation(2, 0, 5)


def test_json_roundtrip():
    d = enumerate_classes(3, 4)[2]
    assert MonodromyDatum.from_json(json.loads(json.dumps(d.to_json()))) == d


def test_hyperelliptic_involution():
    assert automorphism_order(MonodromyDatum.from_pairs(2, [(1, 2)] * 6)) == 2


data_34 = st.sampled_from(enumerate_classes(3, 4) + enumerate_classes(4, 4))


@given(data_34, st.integers(1, 3), st.permutations(range(1, 5)))
def test_braid_move_properties(d, i, perm):
    moved = braid_move(d, i)
    assert validate(moved)
    assert braid_move_inverse(moved, i) == d
    g = Permutation(tuple(perm[: d.n])) if sorted(perm[: d.n]) == list(range(1, d.n + 1)) \
        else Permutation.identity(d.n)
    # conjugation commutes with the braid action
    assert braid_move(d.conjugate(g), i) == moved.conjugate(g)


@settings(max_examples=50)
@given(st.lists(st.sampled_from(list(itertools.combinations(range(1, 4), 2))),
                min_size=4, max_size=4))
def test_canonical_form_is_class_invariant(pairs):
    d = MonodromyDatum.from_pairs(3, pairs)
    if not validate(d):
        return
    for perm in itertools.permutations(range(1, 4)):
        assert canonical_datum(d.conjugate(Permutation(perm))) == canonical_datum(d)
