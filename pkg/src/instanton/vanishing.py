"""Partition combinatorics behind the k >= 2 vanishing of the Donaldson functional.

A term of the k-instanton functional on cycles of dimensions d_1..d_l is
indexed by a partition of {1..l} into blocks I_1, ..., I_p with #I_1 >= 2.
It can be nonzero only if

    sum_{I_1} d = 4 #I_1 - 5,   sum_{I_j} d = 4 #I_j - 4 (j > 1),   p <= k.

Summing the block equations gives sum d = 4l - 4p - 1, so under the total
budget 4l - 8k + 3 every dimension-admissible partition has p = 2k - 1,
which exceeds k as soon as k >= 2.

Block orderings (the blocks are tuples in the original definition) never
change which constraints hold, so partitions are enumerated as sets with a
distinguished first block; orderings are kept as a multiplicity.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product

from .errors import CombinatorialBudgetExceeded
from .geometry import chunked_map

MAX_L = 14
DIMS = (0, 1, 2, 3)


def dimension_budget(k, l):
    """Total cycle dimension required for a nonzero k-instanton term: 4l - 8k + 3."""
    if k < 1 or l < 1:
        raise ValueError("k and l must be positive")
    return 4 * l - 8 * k + 3


@dataclass(frozen=True)
class DimensionVector:
    dims: tuple

    def __post_init__(self):
        if any(d not in DIMS for d in self.dims):
            raise ValueError("cycle dimensions must lie in {0, 1, 2, 3}")

    @property
    def l(self):
        return len(self.dims)

    @property
    def total(self):
        return sum(self.dims)

    def meets_budget(self, k):
        return self.total == dimension_budget(k, self.l)

    def counts(self):
        return tuple(self.dims.count(v) for v in DIMS)


@dataclass(frozen=True)
class PartitionCertificate:
    """Blocks use 1-based cycle labels; blocks[0] is the distinguished I_1."""
    blocks: tuple
    dim_sums: tuple
    first_ok: bool
    rest_ok: tuple
    k: int
    p_limit: int
    sign: str = "±"

    @property
    def p(self):
        return len(self.blocks)

    @property
    def dimension_ok(self):
        return self.first_ok and all(self.rest_ok)

    @property
    def contributing(self):
        return self.dimension_ok and self.p <= self.p_limit

    @property
    def multiplicity(self):
        """Number of ordered-tuple partitions with these underlying sets."""
        m = math.factorial(self.p - 1)
        for b in self.blocks:
            m *= math.factorial(len(b))
        return m

    def to_json(self):
        return {"blocks": [list(b) for b in self.blocks], "dim_sums": list(self.dim_sums), "p": self.p,
                "first_ok": self.first_ok, "rest_ok": list(self.rest_ok), "contributing": self.contributing,
                "multiplicity": self.multiplicity, "sign": self.sign}


class ContributionList(list):
    """List of certificates; `reason` is "budget" when the query was vacuous."""

    def __init__(self, items=(), reason=None, near_misses=()):
        super().__init__(items)
        self.reason = reason
        self.near_misses = list(near_misses)


def set_partitions(elements):
    """Set partitions of a tuple, blocks in order of their smallest element."""
    elements = tuple(elements)
    if not elements:
        yield ()
        return
    head, rest = elements[0], elements[1:]
    for r in range(len(rest) + 1):
        for mates in combinations(rest, r):
            block = (head,) + mates
            remaining = tuple(e for e in rest if e not in mates)
            for tail in set_partitions(remaining):
                yield (block,) + tail


def first_block_partitions(l):
    """Partitions of {1..l} with a distinguished first block of size >= 2."""
    labels = tuple(range(1, l + 1))
    for size in range(2, l + 1):
        for first in combinations(labels, size):
            rest = tuple(e for e in labels if e not in first)
            for tail in set_partitions(rest):
                yield (first,) + tail


def _certify(blocks, dims, k, p_limit):
    sums = tuple(sum(dims[i - 1] for i in b) for b in blocks)
    first_ok = sums[0] == 4 * len(blocks[0]) - 5
    rest_ok = tuple(s == 4 * len(b) - 4 for s, b in zip(sums[1:], blocks[1:]))
    return PartitionCertificate(tuple(blocks), sums, first_ok, rest_ok, k, p_limit)


def _first_block_chunk(args):
    first, l, dims, k, p_limit = args
    labels = tuple(range(1, l + 1))
    rest = tuple(e for e in labels if e not in first)
    # cheap prune: the first block's own constraint
    if sum(dims[i - 1] for i in first) != 4 * len(first) - 5:
        return [], []
    hits, near = [], []
    for tail in set_partitions(rest):
        c = _certify((first,) + tail, dims, k, p_limit)
        if c.dimension_ok:
            (hits if c.contributing else near).append(c)
    return hits, near


def enumerate_contributions(k, dims, relaxed=False):
    """Certificates of every contributing partition for cycles of dimensions `dims`.

    relaxed=True replaces p <= k by p <= 2k - 1.  Dimension-admissible
    partitions rejected only by the p bound are kept on `.near_misses`.
    """
    dv = dims if isinstance(dims, DimensionVector) else DimensionVector(tuple(dims))
    if dv.l > MAX_L:
        raise CombinatorialBudgetExceeded("l = %d exceeds %d" % (dv.l, MAX_L))
    if not dv.meets_budget(k):
        return ContributionList(reason="budget")
    p_limit = 2 * k - 1 if relaxed else k
    labels = tuple(range(1, dv.l + 1))
    firsts = [f for size in range(2, dv.l + 1) for f in combinations(labels, size)]
    parts = chunked_map(_first_block_chunk, [(f, dv.l, dv.dims, k, p_limit) for f in firsts])
    hits = [c for h, _ in parts for c in h]
    near = [c for _, n in parts for c in n]
    return ContributionList(hits, near_misses=near)


# --------------------------------------------------------------- count-vector search

def _block_types(counts, first):
    """Sub-count-vectors usable as one block (first block: sum = 4n - 5, n >= 2)."""
    out = []
    for sub in product(*(range(c + 1) for c in counts)):
        n = sum(sub)
        if n == 0 or (first and n < 2):
            continue
        s = sum(a * v for a, v in zip(sub, DIMS))
        if s == 4 * n - (5 if first else 4):
            out.append(sub)
    return out


@lru_cache(maxsize=None)
def _rest_block_counts(counts):
    """All numbers of ordinary blocks that can exactly cover `counts`."""
    if sum(counts) == 0:
        return frozenset({0})
    # the block holding the first nonzero dimension class, to avoid recounting
    lead = next(i for i, c in enumerate(counts) if c)
    found = set()
    for sub in _block_types(counts, False):
        if sub[lead] == 0:
            continue
        rem = tuple(c - a for c, a in zip(counts, sub))
        found |= {q + 1 for q in _rest_block_counts(rem)}
    return frozenset(found)


def admissible_block_counts(counts):
    """Values of p over all dimension-admissible partitions of a count vector."""
    counts = tuple(counts)
    ps = set()
    for sub in _block_types(counts, True):
        rem = tuple(c - a for c, a in zip(counts, sub))
        ps |= {1 + q for q in _rest_block_counts(rem)}
    return sorted(ps)


def count_vectors(l, total):
    """(c0, c1, c2, c3) with c0+..+c3 = l and c1 + 2 c2 + 3 c3 = total."""
    for c3 in range(l + 1):
        for c2 in range(l - c3 + 1):
            c1 = total - 3 * c3 - 2 * c2
            c0 = l - c3 - c2 - c1
            if c1 >= 0 and c0 >= 0:
                yield (c0, c1, c2, c3)


def _orderings(counts):
    m = math.factorial(sum(counts))
    for c in counts:
        m //= math.factorial(c)
    return m


@dataclass
class VanishingRow:
    k: int
    l: int
    budget: int
    n_dimension_vectors: int
    n_count_vectors: int
    contributing: list
    near_miss_p: list
    identity_ok: bool

    @property
    def empty(self):
        return not self.contributing

    def to_json(self):
        return {"k": self.k, "l": self.l, "budget": self.budget, "n_dimension_vectors": self.n_dimension_vectors,
                "n_count_vectors": self.n_count_vectors, "contributing": [list(c) for c in self.contributing],
                "near_miss_p": self.near_miss_p, "identity_ok": self.identity_ok, "empty": self.empty}


@dataclass
class VanishingReport:
    rows: list = field(default_factory=list)
    relaxed: bool = False

    @property
    def all_empty(self):
        return all(r.empty for r in self.rows if r.k >= 2)

    @property
    def identity_ok(self):
        return all(r.identity_ok for r in self.rows)

    def row(self, k, l):
        return next(r for r in self.rows if r.k == k and r.l == l)

    def to_json(self):
        return {"relaxed": self.relaxed, "all_empty_k_ge_2": self.all_empty, "identity_ok": self.identity_ok,
                "rows": [r.to_json() for r in self.rows]}


def verify_vanishing(k_range, l_max, relaxed=False):
    """Emptiness table over all dimension vectors in {0..3}^l meeting the budget.

    Constraints only see how many cycles of each dimension a block holds, so
    each dimension vector is represented by its count vector.  Every
    admissible partition found is checked against p = 2k - 1.
    """
    if l_max > MAX_L:
        raise CombinatorialBudgetExceeded("l_max = %d exceeds %d" % (l_max, MAX_L))
    report = VanishingReport(relaxed=relaxed)
    for k in k_range:
        p_limit = 2 * k - 1 if relaxed else k
        for l in range(1, l_max + 1):
            budget = dimension_budget(k, l)
            contributing, near_p, n_vec, n_cv, ok = [], set(), 0, 0, True
            if budget >= 0:
                for cv in count_vectors(l, budget):
                    n_cv += 1
                    n_vec += _orderings(cv)
                    ps = admissible_block_counts(cv)
                    near_p.update(ps)
                    # sum d = 4l - 4p - 1 and the budget force p = 2k - 1
                    ok &= all(4 * l - 4 * p - 1 == budget and p == 2 * k - 1 for p in ps)
                    if any(p <= p_limit for p in ps):
                        contributing.append(cv)
            report.rows.append(VanishingRow(k, l, budget, n_vec, n_cv, contributing, sorted(near_p), ok))
    return report


def expand_count_vector(cv):
    """The sorted dimension vector with the given counts."""
    return tuple(v for v, c in zip(DIMS, cv) for _ in range(c))
