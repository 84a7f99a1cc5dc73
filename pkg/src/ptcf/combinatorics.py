"""Exact enumeration and counting with Python integers and Fractions."""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from math import comb, factorial, prod

from .errors import DomainError


def restricted_growth_strings(r: int, k: int | None = None):
    """Restricted growth strings of length r, optionally with exactly k blocks.

    a[0] = 0 and a[i] <= 1 + max(a[:i]).  Generated in lexicographic order.
    """
    if r == 0:
        if k in (None, 0):
            yield ()
        return
    a = [0] * r

    def rec(i, mx):
        if i == r:
            if k is None or mx + 1 == k:
                yield tuple(a)
            return
        # prune: not enough positions left to reach k blocks
        top = mx + 1 if k is None else min(mx + 1, k - 1)
        if k is not None and (k - 1 - mx) > r - i:
            return
        for v in range(top + 1):
            a[i] = v
            yield from rec(i + 1, max(mx, v))

    yield from rec(1, 0)


def partitions(r: int, k: int):
    """Set partitions of {1..r} into exactly k blocks, as tuples of tuples."""
    if k < 1 or k > r:
        return
    for rgs in restricted_growth_strings(r, k):
        blocks = [[] for _ in range(k)]
        for i, b in enumerate(rgs):
            blocks[b].append(i + 1)
        yield tuple(tuple(b) for b in blocks)


def all_partitions(items):
    """Every set partition of ``items`` (any sequence), blocks as tuples."""
    items = tuple(items)
    for rgs in restricted_growth_strings(len(items)):
        k = max(rgs, default=-1) + 1
        blocks = [[] for _ in range(k)]
        for x, b in zip(items, rgs):
            blocks[b].append(x)
        yield tuple(tuple(b) for b in blocks)


def stirling2(r, k):
    @lru_cache(maxsize=None)
    def s(n, j):
        if n == j:
            return 1
        if j == 0 or j > n:
            return 0
        return j * s(n - 1, j) + s(n - 1, j - 1)

    return s(r, k)


def bell(r):
    # Bell triangle
    row = [1]
    for _ in range(r):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def cayley_count(n: int) -> int:
    if n < 1:
        raise DomainError("n must be >= 1")
    return 1 if n == 1 else n ** (n - 2)


def prufer_decode(seq, n: int):
    """Edges of the labeled tree on 0..n-1 encoded by ``seq`` (length n-2)."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = next(u for u in range(n) if degree[u] == 1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = [x for x in range(n) if degree[x] == 1]
    edges.append((u, w))
    return tuple(sorted(edges))


def labeled_trees(n: int):
    """All labeled trees on n vertices, via sequence decoding."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if n == 1:
        yield ()
        return
    for seq in product(range(n), repeat=n - 2):
        yield prufer_decode(seq, n)


def spanning_trees_brute(n: int):
    """Labeled trees on n vertices found by filtering all (n-1)-edge subsets."""
    pairs = list(combinations(range(n), 2))
    for edges in combinations(pairs, n - 1):
        parent = list(range(n))

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        ok = True
        for a, b in edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            yield edges


def _check_sizes(sizes):
    sizes = tuple(int(x) for x in sizes)
    if not sizes:
        raise DomainError("need at least one cluster")
    if any(x <= 0 for x in sizes):
        raise DomainError(f"cluster sizes must be >= 1, got {sizes}")
    return sizes


def n1(n: int, l: int) -> int:
    """N^(1)_n(l) = l (l+n)^(n-1), with N^(1)_0 = 1."""
    if n == 0:
        return 1
    return l * (l + n) ** (n - 1)


def forest_count_formula(sizes, n: int) -> int:
    sizes = _check_sizes(sizes)
    if n < 0:
        raise DomainError("n must be >= 0")
    if len(sizes) == 1:
        return n1(n, sizes[0])
    l = sum(sizes)
    return sizes[0] * prod(2**x - 1 for x in sizes[1:]) * (l + n) ** (len(sizes) + n - 2)


@lru_cache(maxsize=None)
def _count_rec(first: int, rest: tuple, n: int) -> int:
    if first == 0:
        if rest:
            return 0
        return 1 if n == 0 else 0
    total = 0
    m_rest = len(rest)
    for k in range(n + 1):
        ck = comb(n, k)
        for r in range(m_rest + 1):
            for I in combinations(range(m_rest), r):
                LI = prod(2 ** rest[i] - 1 for i in I)
                lI = sum(rest[i] for i in I)
                left = tuple(x for i, x in enumerate(rest) if i not in I)
                total += ck * LI * _count_rec(first - 1 + lI + k, left, n - k)
    return total


def forest_count_recursion(sizes, n: int) -> int:
    sizes = _check_sizes(sizes)
    return _count_rec(sizes[0], sizes[1:], n)


def compositions(n: int, parts: int):
    """Weak compositions of n into ``parts`` non-negative parts."""
    if parts == 0:
        if n == 0:
            yield ()
        return
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for tail in compositions(n - first, parts - 1):
            yield (first,) + tail


def remarkable_identity_check(n: int, l: int):
    if n < 0 or l < 1:
        raise DomainError("need n >= 0 and l >= 1")
    lhs = n1(n, l)
    rhs = 0
    for c in compositions(n, l):
        multinom = factorial(n) // prod(factorial(x) for x in c)
        # (k+1)^(k-1) is 1 at k = 0
        rhs += multinom * prod((k + 1) ** (k - 1) if k else 1 for k in c)
    return lhs, rhs


def partition_identity_check(sizes, sigma: int):
    sizes = _check_sizes(sizes)
    m = len(sizes)
    if not 2 <= sigma <= m:
        raise DomainError(f"sigma must lie in [2, {m}], got {sigma}")
    lhs = 0
    for blocks in partitions(m, sigma):
        lhs += prod(sum(sizes[i - 1] for i in b) ** (len(b) - 1) for b in blocks)
    rhs = comb(m - 1, sigma - 1) * sum(sizes) ** (m - sigma)
    return lhs, rhs


def _power(base, e):
    return Fraction(base) ** e


def m_sums(sizes, n: int):
    """The three sums into which the reduced recursion splits, and their closed forms.

    Returns ((M1, M2, M3), (closed1, closed2, closed3)) as Fractions.
    """
    sizes = _check_sizes(sizes)
    m = len(sizes)
    l1 = sizes[0]
    l = sum(sizes)
    rest = list(range(1, m))
    M1 = M2 = M3 = Fraction(0)
    for k in range(n + 1):
        for r in range(len(rest) + 1):
            for I in combinations(rest, r):
                lI = sum(sizes[i] for i in I)
                weight = comb(n, k) * _power(l + n - 1, n - k - 1) * _power(l + n - 1, m - len(I) - 1)
                M1 += l1 * weight
                M2 += lI * weight
                M3 += (k - 1) * weight
    c = Fraction(1, l + n - 1)
    closed = (
        l1 * c * Fraction(l + n) ** (m + n - 1),
        (l - l1) * c * Fraction(l + n) ** (m + n - 2),
        -l * c * Fraction(l + n) ** (m + n - 2),
    )
    return (M1, M2, M3), closed


def auxiliary_sum_identity(n: int, l: int):
    """Both sides of sum_k C(n,k)(k-1)(l+n-1)^(n-k-1) = -l (l+n)^(n-1)/(l+n-1)."""
    if l + n - 1 == 0:
        raise DomainError("l + n - 1 must be nonzero")
    lhs = sum(comb(n, k) * (k - 1) * _power(l + n - 1, n - k - 1) for k in range(n + 1))
    rhs = -Fraction(l, l + n - 1) * Fraction(l + n) ** (n - 1)
    return lhs, rhs
