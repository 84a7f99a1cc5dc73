from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptcf import combinatorics as cb
from ptcf.errors import DomainError


def test_partitions():
    assert len(list(cb.partitions(3, 3))) == 1
    assert len(list(cb.partitions(4, 2))) == 7 == cb.stirling2(4, 2)
    assert sum(len(list(cb.partitions(4, k))) for k in range(1, 5)) == 15 == cb.bell(4)
    assert list(cb.partitions(3, 2)) == [((1, 2), (3,)), ((1, 3), (2,)), ((1,), (2, 3))]


@pytest.mark.parametrize("r", range(0, 8))
def test_bell_matches_enumeration(r):
    assert sum(1 for _ in cb.all_partitions(range(r))) == cb.bell(r)


def test_cayley():
    assert cb.cayley_count(2) == 1
    assert cb.cayley_count(3) == 3
    assert cb.cayley_count(6) == 1296 == sum(1 for _ in cb.spanning_trees_brute(6))
    assert set(cb.labeled_trees(5)) == set(tuple(sorted(t)) for t in cb.spanning_trees_brute(5))


def test_forest_counts():
    assert cb.forest_count_formula((1, 1), 0) == 1
    assert cb.forest_count_formula((1, 1), 1) == 3
    assert cb.forest_count_formula((2, 1), 0) == 2
    assert cb.forest_count_recursion((1,), 0) == 1
    assert cb.forest_count_recursion((1, 1, 1), 2) == 125 == cb.forest_count_formula((1, 1, 1), 2)
    with pytest.raises(DomainError):
        cb.forest_count_formula((1, 0), 1)


def test_single_cluster_counts():
    for l in range(1, 4):
        for n in range(5):
            assert cb.forest_count_recursion((l,), n) == cb.n1(n, l)


def test_remarkable_identity_examples():
    assert cb.remarkable_identity_check(0, 3) == (1, 1)
    assert cb.remarkable_identity_check(1, 2) == (2, 2)
    lhs, rhs = cb.remarkable_identity_check(3, 3)
    assert lhs == rhs


def test_partition_identity_examples():
    assert cb.partition_identity_check((2, 3, 1), 3) == (1, 1)
    assert cb.partition_identity_check((4, 5), 2) == (1, 1)
    lhs, rhs = cb.partition_identity_check((1, 2, 1, 3), 2)
    assert lhs == rhs == 3 * 7**2


@pytest.mark.parametrize("sizes", [(1, 1), (2, 1), (1, 2, 1), (3, 1, 2), (2, 2, 2)])
@pytest.mark.parametrize("n", range(4))
def test_m_sums(sizes, n):
    (M1, M2, M3), closed = cb.m_sums(sizes, n)
    assert (M1, M2, M3) == closed
    l, m = sum(sizes), len(sizes)
    assert M1 + M2 + M3 == sizes[0] * Fraction(l + n) ** (m + n - 2)


def test_auxiliary_sum():
    for n in range(9):
        for l in range(1, 6):
            if l + n - 1:
                lhs, rhs = cb.auxiliary_sum_identity(n, l)
                assert lhs == rhs
    with pytest.raises(DomainError):
        cb.auxiliary_sum_identity(0, 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=1, max_size=4), st.integers(0, 4))
def test_recursion_equals_formula(sizes, n):
    assert cb.forest_count_recursion(sizes, n) == cb.forest_count_formula(sizes, n)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=6), st.data())
def test_partition_identity_property(sizes, data):
    sigma = data.draw(st.integers(2, len(sizes)))
    lhs, rhs = cb.partition_identity_check(sizes, sigma)
    assert lhs == rhs
    if sigma == 2:
        assert lhs == (len(sizes) - 1) * sum(sizes) ** (len(sizes) - 2)


def test_rgs_order_and_prufer():
    strings = list(cb.restricted_growth_strings(3))
    assert strings == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (0, 1, 2)]
    assert cb.prufer_decode((3, 3), 4) == ((0, 3), (1, 3), (2, 3))
    assert sum(1 for _ in cb.compositions(4, 3)) == comb(6, 2)
