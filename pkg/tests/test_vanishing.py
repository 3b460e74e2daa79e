import math
from itertools import permutations, product

import pytest
from sympy.utilities.iterables import multiset_partitions

from instanton.errors import CombinatorialBudgetExceeded
from instanton.vanishing import (DimensionVector, admissible_block_counts, count_vectors, dimension_budget,
                                 enumerate_contributions, expand_count_vector, first_block_partitions,
                                 set_partitions, verify_vanishing)


def admissible(blocks, dims):
    first, rest = blocks[0], blocks[1:]
    if len(first) < 2 or sum(dims[i] for i in first) != 4 * len(first) - 5:
        return False
    return all(sum(dims[i] for i in b) == 4 * len(b) - 4 for b in rest)


def brute_force(dims):
    """(p -> number of admissible tuple-partitions) from sympy set partitions and
    a choice of first block, weighted by orderings of blocks and their members."""
    out = {}
    l = len(dims)
    for part in multiset_partitions(list(range(l))):
        for i, first in enumerate(part):
            blocks = [first] + part[:i] + part[i + 1:]
            if admissible(blocks, dims):
                p = len(blocks)
                mult = math.factorial(p - 1) * math.prod(math.factorial(len(b)) for b in blocks)
                out[p] = out.get(p, 0) + mult
    return out


def ordered_partitions(seq):
    """Every way to cut a sequence into a tuple of nonempty tuples (blocks in order)."""
    n = len(seq)
    for cuts in product((0, 1), repeat=n - 1):
        blocks, cur = [], [seq[0]]
        for c, e in zip(cuts, seq[1:]):
            if c:
                blocks.append(tuple(cur))
                cur = [e]
            else:
                cur.append(e)
        blocks.append(tuple(cur))
        yield tuple(blocks)


def fully_ordered_count(dims):
    """Tuple-of-tuples partitions counted directly, for tiny l."""
    out = {}
    seen = set()
    for perm in permutations(range(len(dims))):
        for blocks in ordered_partitions(perm):
            if blocks in seen:
                continue
            seen.add(blocks)
            if admissible(blocks, dims):
                out[len(blocks)] = out.get(len(blocks), 0) + 1
    return out


def certificate_counts(k, dims):
    res = enumerate_contributions(k, dims, relaxed=True)
    out = {}
    for c in list(res) + res.near_misses:
        out[c.p] = out.get(c.p, 0) + c.multiplicity
    return out


def test_dimension_budget_examples():
    assert dimension_budget(1, 2) == 3
    assert dimension_budget(1, 3) == 7
    assert dimension_budget(2, 5) == 7


def test_point_and_three_cycle():
    res = enumerate_contributions(1, (0, 3))
    assert len(res) == 1
    assert res[0].blocks == ((1, 2),) and res[0].p == 1 and res[0].contributing


def test_k2_example_is_empty():
    res = enumerate_contributions(2, (0, 0, 3, 2, 2))
    assert res == [] and res.reason is None
    assert all(c.p == 3 for c in res.near_misses)
    assert enumerate_contributions(2, (0, 0, 0, 0, 0)).reason == "budget"


def test_k1_l2_table():
    hits = {d for d in product(range(4), repeat=2) if enumerate_contributions(1, d)}
    assert hits == {(0, 3), (3, 0), (1, 2), (2, 1)}
    rep = verify_vanishing([1], 2)
    assert sorted(map(expand_count_vector, rep.row(1, 2).contributing)) == [(0, 3), (1, 2)]


def test_vanishing_table():
    rep = verify_vanishing(range(2, 6), 12)
    assert rep.all_empty and rep.identity_ok
    for row in rep.rows:
        assert all(p == 2 * row.k - 1 for p in row.near_miss_p)


def test_relaxed_bound_reveals_p_equal_2k_minus_1():
    rep = verify_vanishing([2], 8, relaxed=True)
    assert not rep.all_empty
    assert rep.row(2, 4).contributing
    res = enumerate_contributions(2, (0, 0, 3, 2, 2), relaxed=True)
    assert res and all(c.p == 3 for c in res)


def test_partition_generators():
    for l in range(1, 8):
        mine = {tuple(sorted(b)) for b in set_partitions(tuple(range(l)))}
        assert len(list(set_partitions(tuple(range(l))))) == len(list(multiset_partitions(list(range(l)))))
        assert len(mine) == len(list(set_partitions(tuple(range(l)))))
    firsts = list(first_block_partitions(4))
    assert all(len(p[0]) >= 2 for p in firsts)
    assert len(firsts) == len(set(firsts))


@pytest.mark.parametrize("k,dims", [
    (1, (0, 3)), (1, (2, 2, 3)), (1, (3, 3, 1)), (2, (0, 0, 3, 2, 2)), (2, (3, 0, 0, 0)),
])
def test_multiplicities_against_fully_ordered_enumeration(k, dims):
    assert DimensionVector(dims).meets_budget(k)
    assert certificate_counts(k, dims) == fully_ordered_count(dims)


@pytest.mark.parametrize("k,dims", [
    (1, (3, 3, 3, 3, 3)), (2, (3, 2, 2, 2, 1, 1)), (2, (3, 3, 3, 0, 2, 2, 2)),
    (2, (3, 3, 3, 3, 3, 3, 1, 0)), (3, (3, 3, 3, 2, 0, 0, 0, 0)),
])
def test_multiplicities_against_sympy_partitions(k, dims):
    assert DimensionVector(dims).meets_budget(k)
    assert certificate_counts(k, dims) == brute_force(dims)


@pytest.mark.parametrize("l", range(1, 9))
def test_count_vector_search_matches_explicit_enumeration(l):
    for k in (1, 2, 3):
        budget = dimension_budget(k, l)
        if budget < 0:
            continue
        for cv in count_vectors(l, budget):
            dims = expand_count_vector(cv)
            ps = sorted(set(c.p for c in list(enumerate_contributions(k, dims, relaxed=True))
                            + enumerate_contributions(k, dims, relaxed=True).near_misses))
            assert admissible_block_counts(cv) == ps


def test_count_vectors_cover_every_dimension_vector():
    for l, total in ((3, 7), (4, 3), (5, 7)):
        brute = sum(1 for d in product(range(4), repeat=l) if sum(d) == total)
        assert sum(math.factorial(l) // math.prod(math.factorial(c) for c in cv)
                   for cv in count_vectors(l, total)) == brute
        assert verify_vanishing([1], l).row(1, l).n_dimension_vectors == (
            sum(1 for d in product(range(4), repeat=l) if sum(d) == dimension_budget(1, l)))


def test_limits_and_validation():
    with pytest.raises(CombinatorialBudgetExceeded):
        enumerate_contributions(4, (3,) * 15)
    with pytest.raises(CombinatorialBudgetExceeded):
        verify_vanishing([2], 15)
    with pytest.raises(ValueError):
        DimensionVector((0, 4))
    with pytest.raises(ValueError):
        dimension_budget(0, 3)
